//! Cross-variant comparison: baseline time-series divergence, trend-direction
//! disagreement and conclusion-stability verdicts.
//!
//! Verdict semantics: `agree` means identical outcomes, `differ` covers
//! magnitude-only deltas, `conflict` is reserved for sign or label reversals.
//! For kappa the comparison is band-level: a one-band change is `differ`,
//! two or more bands `conflict`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::stats::{kappa_band, ols};

#[derive(Debug, Error, PartialEq)]
pub enum AgreementError {
    #[error("variants do not share window boundaries ({0} vs {1})")]
    MisalignedWindows(String, String),
    #[error("series has {len} points, trend needs at least {k}")]
    SeriesTooShort { len: usize, k: usize },
    #[error("trend window k must be >= 3 (got {0})")]
    BadTrendWindow(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Subject {
    BaselineCounts,
    RoleClassification,
    BrooksSign,
    TurnoverSignificance,
}

impl Subject {
    pub fn label(self) -> &'static str {
        match self {
            Subject::BaselineCounts => "baseline_counts",
            Subject::RoleClassification => "role_classification",
            Subject::BrooksSign => "brooks_sign",
            Subject::TurnoverSignificance => "turnover_significance",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Agree,
    Differ,
    Conflict,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Agree => "agree",
            Verdict::Differ => "differ",
            Verdict::Conflict => "conflict",
        }
    }
}

/// One comparison outcome between two variants.
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementVerdict {
    pub subject: Subject,
    pub variant_a: String,
    pub variant_b: String,
    /// What was compared (metric, metric pair, model, ...).
    pub item: String,
    pub verdict: Verdict,
    /// Quantitative delta backing the verdict.
    pub detail: String,
    /// Config keys whose values differ between the variants.
    pub provenance: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BaselineMetric {
    Commits,
    Files,
    Developers,
    EntityBlocks,
}

impl BaselineMetric {
    pub const ALL: [BaselineMetric; 4] = [
        BaselineMetric::Commits,
        BaselineMetric::Files,
        BaselineMetric::Developers,
        BaselineMetric::EntityBlocks,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BaselineMetric::Commits => "commits",
            BaselineMetric::Files => "files",
            BaselineMetric::Developers => "developers",
            BaselineMetric::EntityBlocks => "entity_blocks",
        }
    }
}

/// Per-variant baseline counts with the window boundaries they refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantBaseline {
    pub variant: String,
    pub boundaries: Vec<(i64, i64)>,
    pub counts: BTreeMap<usize, BTreeMap<BaselineMetric, f64>>,
}

/// One cell of the aligned long-format baseline table.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineCell {
    pub variant: String,
    pub window: usize,
    pub metric: BaselineMetric,
    pub value: f64,
    /// True when the variant had no facts in this window.
    pub absent: bool,
}

/// Align per-variant baseline counts into a long-format table. Variants must
/// share window boundaries; windows missing in a variant emit zero with the
/// absence flag set.
pub fn baseline_series(variants: &[VariantBaseline]) -> Result<Vec<BaselineCell>, AgreementError> {
    if let Some(first) = variants.first() {
        for other in &variants[1..] {
            if other.boundaries != first.boundaries {
                return Err(AgreementError::MisalignedWindows(
                    first.variant.clone(),
                    other.variant.clone(),
                ));
            }
        }
    }
    let mut cells = Vec::new();
    for v in variants {
        for window in 0..v.boundaries.len() {
            let present = v.counts.get(&window);
            for metric in BaselineMetric::ALL {
                let value = present.and_then(|m| m.get(&metric)).copied();
                cells.push(BaselineCell {
                    variant: v.variant.clone(),
                    window,
                    metric,
                    value: value.unwrap_or(0.0),
                    absent: value.is_none(),
                });
            }
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    Up,
    Down,
    Flat,
}

impl Trend {
    pub fn label(self) -> &'static str {
        match self {
            Trend::Up => "up",
            Trend::Down => "down",
            Trend::Flat => "flat",
        }
    }
}

const TREND_EPSILON: f64 = 0.01;

/// Sign of the least-squares slope over the trailing `k` points; slopes below
/// epsilon * mean magnitude count as flat.
pub fn trend_direction(series: &[f64], k: usize) -> Result<Trend, AgreementError> {
    if k < 3 {
        return Err(AgreementError::BadTrendWindow(k));
    }
    if series.len() < k {
        return Err(AgreementError::SeriesTooShort {
            len: series.len(),
            k,
        });
    }
    let tail = &series[series.len() - k..];
    let mean = tail.iter().sum::<f64>() / k as f64;
    if tail.iter().all(|v| *v == tail[0]) {
        return Ok(Trend::Flat);
    }
    let rows: Vec<Vec<f64>> = (0..k).map(|i| vec![1.0, i as f64]).collect();
    let slope = match ols(&rows, tail, &["intercept", "t"]) {
        Ok(fit) => fit.terms[1].coefficient,
        Err(_) => return Ok(Trend::Flat),
    };
    if slope.abs() < TREND_EPSILON * mean.abs() {
        Ok(Trend::Flat)
    } else if slope > 0.0 {
        Ok(Trend::Up)
    } else {
        Ok(Trend::Down)
    }
}

/// Significance label including the could-not-estimate case.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignificanceLabel {
    Positive,
    Negative,
    None,
    Absent,
}

impl SignificanceLabel {
    pub fn label(self) -> &'static str {
        match self {
            SignificanceLabel::Positive => "positive",
            SignificanceLabel::Negative => "negative",
            SignificanceLabel::None => "none",
            SignificanceLabel::Absent => "absent",
        }
    }
}

/// Everything one variant contributes to the conclusion comparison.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VariantSummary {
    pub variant: String,
    /// Flattened resolved configuration, for provenance diffing.
    pub config: BTreeMap<String, String>,
    pub baseline: Option<VariantBaseline>,
    /// Mean kappa per metric pair, keyed "metric_a/metric_b".
    pub role_kappas: BTreeMap<String, f64>,
    /// TS coefficient per model, keyed "target/form".
    pub brooks_ts: BTreeMap<String, f64>,
    /// Turnover significance label and interval per activity metric.
    pub turnover: BTreeMap<String, (SignificanceLabel, Option<(f64, f64)>)>,
}

fn differing_keys(a: &BTreeMap<String, String>, b: &BTreeMap<String, String>) -> Vec<String> {
    let mut keys: Vec<String> = Vec::new();
    for key in a.keys().chain(b.keys()) {
        if a.get(key) != b.get(key) && !keys.contains(key) {
            keys.push(key.clone());
        }
    }
    keys
}

fn trend_window(len: usize) -> usize {
    len.min(5).max(3)
}

/// Pairwise conclusion-stability verdicts for two variant summaries.
pub fn conclusion_verdicts(a: &VariantSummary, b: &VariantSummary) -> Vec<AgreementVerdict> {
    let provenance = differing_keys(&a.config, &b.config);
    let mut verdicts = Vec::new();
    let mut push = |subject: Subject, item: String, verdict: Verdict, detail: String| {
        verdicts.push(AgreementVerdict {
            subject,
            variant_a: a.variant.clone(),
            variant_b: b.variant.clone(),
            item,
            verdict,
            detail,
            provenance: provenance.clone(),
        });
    };

    // baseline trends
    if let (Some(ba), Some(bb)) = (&a.baseline, &b.baseline) {
        for metric in BaselineMetric::ALL {
            let series = |v: &VariantBaseline| -> Vec<f64> {
                (0..v.boundaries.len())
                    .map(|w| {
                        v.counts
                            .get(&w)
                            .and_then(|m| m.get(&metric))
                            .copied()
                            .unwrap_or(0.0)
                    })
                    .collect()
            };
            let sa = series(ba);
            let sb = series(bb);
            if sa.len() < 3 || sb.len() < 3 {
                continue;
            }
            let (Ok(ta), Ok(tb)) = (
                trend_direction(&sa, trend_window(sa.len())),
                trend_direction(&sb, trend_window(sb.len())),
            ) else {
                continue;
            };
            let verdict = if sa == sb {
                Verdict::Agree
            } else if matches!((ta, tb), (Trend::Up, Trend::Down) | (Trend::Down, Trend::Up)) {
                Verdict::Conflict
            } else {
                Verdict::Differ
            };
            let max_delta = sa
                .iter()
                .zip(&sb)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0f64, f64::max);
            push(
                Subject::BaselineCounts,
                metric.label().to_string(),
                verdict,
                format!(
                    "trend {}->{}; max window delta {max_delta}",
                    ta.label(),
                    tb.label()
                ),
            );
        }
    }

    // role agreement bands
    for (pair, ka) in &a.role_kappas {
        let Some(kb) = b.role_kappas.get(pair) else {
            continue;
        };
        let band_a = kappa_band(*ka);
        let band_b = kappa_band(*kb);
        let distance = (band_a.index() - band_b.index()).abs();
        let verdict = if distance == 0 {
            Verdict::Agree
        } else if distance == 1 {
            Verdict::Differ
        } else {
            Verdict::Conflict
        };
        push(
            Subject::RoleClassification,
            pair.clone(),
            verdict,
            format!(
                "kappa {ka:.4} ({}) vs {kb:.4} ({})",
                band_a.label(),
                band_b.label()
            ),
        );
    }

    // brooks TS coefficient signs
    for (model, ca) in &a.brooks_ts {
        let Some(cb) = b.brooks_ts.get(model) else {
            continue;
        };
        let verdict = if (ca - cb).abs() < 1e-12 {
            Verdict::Agree
        } else if *ca > 0.0 && *cb < 0.0 || *ca < 0.0 && *cb > 0.0 {
            Verdict::Conflict
        } else {
            Verdict::Differ
        };
        push(
            Subject::BrooksSign,
            model.clone(),
            verdict,
            format!("ts coefficient {ca:.6} vs {cb:.6}"),
        );
    }

    // turnover significance labels
    for (metric, (la, ci_a)) in &a.turnover {
        let Some((lb, ci_b)) = b.turnover.get(metric) else {
            continue;
        };
        let verdict = if la == lb {
            if ci_a == ci_b {
                Verdict::Agree
            } else {
                Verdict::Differ
            }
        } else if *la == SignificanceLabel::Absent || *lb == SignificanceLabel::Absent {
            Verdict::Differ
        } else {
            Verdict::Conflict
        };
        let fmt_ci = |ci: &Option<(f64, f64)>| match ci {
            Some((lo, hi)) => format!("[{lo:.4},{hi:.4}]"),
            None => "-".to_string(),
        };
        push(
            Subject::TurnoverSignificance,
            metric.clone(),
            verdict,
            format!(
                "{} {} vs {} {}",
                la.label(),
                fmt_ci(ci_a),
                lb.label(),
                fmt_ci(ci_b)
            ),
        );
    }

    verdicts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trend_directions() {
        let up: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let down: Vec<f64> = (0..10).map(|i| 100.0 - 3.0 * i as f64).collect();
        let flat = vec![5.0; 10];
        assert_eq!(trend_direction(&up, 5).unwrap(), Trend::Up);
        assert_eq!(trend_direction(&down, 5).unwrap(), Trend::Down);
        assert_eq!(trend_direction(&flat, 5).unwrap(), Trend::Flat);
        assert!(matches!(
            trend_direction(&up, 2),
            Err(AgreementError::BadTrendWindow(2))
        ));
        assert!(matches!(
            trend_direction(&up[..3], 5),
            Err(AgreementError::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn tiny_slopes_count_as_flat() {
        let nearly_flat = vec![100.0, 100.01, 100.0, 100.02, 100.01];
        assert_eq!(trend_direction(&nearly_flat, 5).unwrap(), Trend::Flat);
    }

    fn baseline(variant: &str, values: &[f64]) -> VariantBaseline {
        VariantBaseline {
            variant: variant.into(),
            boundaries: (0..values.len() as i64).map(|i| (i * 10, i * 10 + 10)).collect(),
            counts: values
                .iter()
                .enumerate()
                .map(|(w, v)| {
                    (
                        w,
                        BaselineMetric::ALL.iter().map(|m| (*m, *v)).collect(),
                    )
                })
                .collect(),
        }
    }

    #[test]
    fn baseline_series_alignment_and_absence() {
        let mut a = baseline("a", &[1.0, 2.0, 3.0]);
        a.counts.remove(&1);
        let cells = baseline_series(&[a]).unwrap();
        let absent: Vec<&BaselineCell> = cells.iter().filter(|c| c.absent).collect();
        assert_eq!(absent.len(), BaselineMetric::ALL.len());
        assert!(absent.iter().all(|c| c.window == 1 && c.value == 0.0));
    }

    #[test]
    fn misaligned_windows_error() {
        let a = baseline("a", &[1.0, 2.0]);
        let mut b = baseline("b", &[1.0, 2.0]);
        b.boundaries[1].1 += 5;
        assert!(matches!(
            baseline_series(&[a, b]),
            Err(AgreementError::MisalignedWindows(..))
        ));
    }

    fn summary(variant: &str) -> VariantSummary {
        VariantSummary {
            variant: variant.into(),
            config: [("branch_mode".to_string(), "all_branches".to_string())]
                .into_iter()
                .collect(),
            baseline: Some(baseline(variant, &[5.0, 6.0, 9.0, 12.0])),
            role_kappas: [("loc/commits".to_string(), 0.72)].into_iter().collect(),
            brooks_ts: [("commits/linear".to_string(), -0.5)].into_iter().collect(),
            turnover: [(
                "ENA".to_string(),
                (SignificanceLabel::Positive, Some((0.2, 0.8))),
            )]
            .into_iter()
            .collect(),
        }
    }

    #[test]
    fn self_comparison_agrees_everywhere() {
        let s = summary("a");
        let verdicts = conclusion_verdicts(&s, &s);
        assert!(!verdicts.is_empty());
        assert!(verdicts.iter().all(|v| v.verdict == Verdict::Agree));
        assert!(verdicts.iter().all(|v| v.provenance.is_empty()));
    }

    #[test]
    fn band_distance_drives_role_verdicts() {
        let mut a = summary("a");
        let mut b = summary("b");
        b.config.insert("branch_mode".into(), "single:main".into());
        // same band (substantial): agree despite different values
        a.role_kappas.insert("loc/commits".into(), 0.65);
        b.role_kappas.insert("loc/commits".into(), 0.79);
        let v = conclusion_verdicts(&a, &b);
        let role = v
            .iter()
            .find(|v| v.subject == Subject::RoleClassification)
            .unwrap();
        assert_eq!(role.verdict, Verdict::Agree);
        // one band apart: differ
        b.role_kappas.insert("loc/commits".into(), 0.85);
        let v = conclusion_verdicts(&a, &b);
        assert_eq!(
            v.iter()
                .find(|v| v.subject == Subject::RoleClassification)
                .unwrap()
                .verdict,
            Verdict::Differ
        );
        // two bands apart: conflict, carrying the differing flag
        b.role_kappas.insert("loc/commits".into(), 0.2);
        let v = conclusion_verdicts(&a, &b);
        let role = v
            .iter()
            .find(|v| v.subject == Subject::RoleClassification)
            .unwrap();
        assert_eq!(role.verdict, Verdict::Conflict);
        assert_eq!(role.provenance, vec!["branch_mode".to_string()]);
    }

    #[test]
    fn brooks_sign_flip_is_conflict() {
        let a = summary("a");
        let mut b = summary("b");
        b.config.insert("filters".into(), "deny:.md".into());
        b.brooks_ts.insert("commits/linear".into(), 0.4);
        let v = conclusion_verdicts(&a, &b);
        let brooks = v.iter().find(|v| v.subject == Subject::BrooksSign).unwrap();
        assert_eq!(brooks.verdict, Verdict::Conflict);
        // same sign, different magnitude: differ
        b.brooks_ts.insert("commits/linear".into(), -0.9);
        let v = conclusion_verdicts(&a, &b);
        assert_eq!(
            v.iter()
                .find(|v| v.subject == Subject::BrooksSign)
                .unwrap()
                .verdict,
            Verdict::Differ
        );
    }

    #[test]
    fn turnover_label_change_is_conflict_absent_is_differ() {
        let a = summary("a");
        let mut b = summary("b");
        b.config.insert("filters".into(), "deny:.md".into());
        b.turnover
            .insert("ENA".into(), (SignificanceLabel::None, Some((-0.1, 0.8))));
        let v = conclusion_verdicts(&a, &b);
        let t = v
            .iter()
            .find(|v| v.subject == Subject::TurnoverSignificance)
            .unwrap();
        assert_eq!(t.verdict, Verdict::Conflict);
        assert!(!t.provenance.is_empty());

        b.turnover
            .insert("ENA".into(), (SignificanceLabel::Absent, None));
        let v = conclusion_verdicts(&a, &b);
        assert_eq!(
            v.iter()
                .find(|v| v.subject == Subject::TurnoverSignificance)
                .unwrap()
                .verdict,
            Verdict::Differ
        );
    }

    #[test]
    fn opposite_baseline_trends_conflict() {
        let mut a = summary("a");
        let mut b = summary("b");
        b.config.insert("branch_mode".into(), "single:main".into());
        a.baseline = Some(baseline("a", &[1.0, 2.0, 4.0, 8.0]));
        b.baseline = Some(baseline("b", &[8.0, 4.0, 2.0, 1.0]));
        let v = conclusion_verdicts(&a, &b);
        assert!(v
            .iter()
            .filter(|v| v.subject == Subject::BaselineCounts)
            .all(|v| v.verdict == Verdict::Conflict));
    }

    #[test]
    fn verdicts_are_symmetric_in_the_pair() {
        let a = summary("a");
        let mut b = summary("b");
        b.config.insert("branch_mode".into(), "single:main".into());
        b.brooks_ts.insert("commits/linear".into(), 0.4);
        let ab = conclusion_verdicts(&a, &b);
        let ba = conclusion_verdicts(&b, &a);
        for (x, y) in ab.iter().zip(&ba) {
            assert_eq!(x.subject, y.subject);
            assert_eq!(x.item, y.item);
            assert_eq!(x.verdict, y.verdict);
            assert_eq!(x.provenance, y.provenance);
        }
    }
}
