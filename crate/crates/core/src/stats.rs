//! Shared statistical kernel: correlations, agreement statistics, ordinary
//! least squares and bootstrap confidence intervals.
//!
//! All randomness is driven by a seedable, portable generator (ChaCha20) so
//! that intervals are reproducible byte-for-byte across platforms and thread
//! counts. Resamples are seeded per-index (counter-based), which makes the
//! bootstrap schedule-independent.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

/// Identity of the pseudo-random generator, recorded in report metadata.
pub const BOOTSTRAP_RNG: &str = "chacha20";

#[derive(Debug, Clone, Error, PartialEq)]
pub enum StatsError {
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error("kappa undefined: expected agreement is 1 (both raters use a single identical class)")]
    KappaUndefined,
    #[error("vectors must have equal, sufficient length (got {0} and {1})")]
    BadLength(usize, usize),
    #[error("design matrix is rank deficient (pivot {0} ~ 0)")]
    RankDeficient(usize),
    #[error("need more observations than parameters (n={n}, p={p})")]
    TooFewObservations { n: usize, p: usize },
    #[error("response has zero variance")]
    ConstantResponse,
    #[error("bootstrap requires B >= 1 and at least 3 pairs (B={b}, pairs={pairs})")]
    BadBootstrapInput { b: usize, pairs: usize },
    #[error("all {0} bootstrap resamples had an undefined statistic")]
    AllResamplesUndefined(usize),
}

pub type Result<T> = std::result::Result<T, StatsError>;

/// Product-moment correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(StatsError::BadLength(x.len(), y.len()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxy += (xi - mx) * (yi - my);
        sxx += (xi - mx) * (xi - mx);
        syy += (yi - my) * (yi - my);
    }
    if sxx == 0.0 {
        return Err(StatsError::UndefinedCorrelation("x is constant".into()));
    }
    if syy == 0.0 {
        return Err(StatsError::UndefinedCorrelation("y is constant".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Average ranks, ties sharing the mean rank of their run (1-based).
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("non-NaN input"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j hold tied values; mean of ranks i+1..=j+1
        let mean_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = mean_rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rank correlation: pearson of average-ranked data.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(StatsError::BadLength(x.len(), y.len()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Cohen's kappa on two equal-length categorical vectors.
///
/// Expected agreement comes from the marginal label frequencies; kappa is
/// undefined when both raters place everything in the same single class.
pub fn cohen_kappa<T: Eq + Ord + Clone>(a: &[T], b: &[T]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(StatsError::BadLength(a.len(), b.len()));
    }
    let n = a.len() as f64;
    let mut labels: Vec<T> = a.iter().chain(b.iter()).cloned().collect();
    labels.sort();
    labels.dedup();
    let mut p_o = 0.0;
    for (ai, bi) in a.iter().zip(b) {
        if ai == bi {
            p_o += 1.0;
        }
    }
    p_o /= n;
    let mut p_e = 0.0;
    for label in &labels {
        let pa = a.iter().filter(|v| *v == label).count() as f64 / n;
        let pb = b.iter().filter(|v| *v == label).count() as f64 / n;
        p_e += pa * pb;
    }
    if (1.0 - p_e).abs() < 1e-15 {
        return Err(StatsError::KappaUndefined);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Strength-of-agreement bands for Cohen's kappa, boundaries inclusive upward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum KappaBand {
    Poor,
    Slight,
    Fair,
    Moderate,
    Substantial,
    AlmostPerfect,
}

impl KappaBand {
    /// Ordinal index used for band-distance comparisons.
    pub fn index(self) -> i32 {
        match self {
            KappaBand::Poor => 0,
            KappaBand::Slight => 1,
            KappaBand::Fair => 2,
            KappaBand::Moderate => 3,
            KappaBand::Substantial => 4,
            KappaBand::AlmostPerfect => 5,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            KappaBand::Poor => "poor",
            KappaBand::Slight => "slight",
            KappaBand::Fair => "fair",
            KappaBand::Moderate => "moderate",
            KappaBand::Substantial => "substantial",
            KappaBand::AlmostPerfect => "almost_perfect",
        }
    }
}

impl std::fmt::Display for KappaBand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Map a kappa value to its agreement band.
pub fn kappa_band(kappa: f64) -> KappaBand {
    if kappa < 0.0 {
        KappaBand::Poor
    } else if kappa <= 0.20 {
        KappaBand::Slight
    } else if kappa <= 0.40 {
        KappaBand::Fair
    } else if kappa <= 0.60 {
        KappaBand::Moderate
    } else if kappa <= 0.80 {
        KappaBand::Substantial
    } else {
        KappaBand::AlmostPerfect
    }
}

/// One fitted regression term.
#[derive(Debug, Clone, PartialEq)]
pub struct FitTerm {
    pub name: String,
    pub coefficient: f64,
    pub standard_error: f64,
}

/// A least-squares fit with coefficient table and goodness-of-fit measures.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFit {
    pub terms: Vec<FitTerm>,
    pub r2: f64,
    pub adj_r2: f64,
    pub n: usize,
}

impl ModelFit {
    pub fn term(&self, name: &str) -> Option<&FitTerm> {
        self.terms.iter().find(|t| t.name == name)
    }
}

/// Ordinary least squares via Householder QR.
///
/// `rows` holds one predictor vector per observation (the intercept column
/// must already be present); `names` labels the columns. Standard errors come
/// from the residual variance and the diagonal of (X'X)^-1 = R^-1 R^-T.
pub fn ols(rows: &[Vec<f64>], y: &[f64], names: &[&str]) -> Result<ModelFit> {
    let n = rows.len();
    if n == 0 || n != y.len() {
        return Err(StatsError::BadLength(n, y.len()));
    }
    let p = rows[0].len();
    if p == 0 || names.len() != p || rows.iter().any(|r| r.len() != p) {
        return Err(StatsError::BadLength(p, names.len()));
    }
    if n <= p {
        return Err(StatsError::TooFewObservations { n, p });
    }

    // Column-major working copy of X and a copy of y, reduced in place.
    let mut a = vec![0.0; n * p];
    for (i, row) in rows.iter().enumerate() {
        for j in 0..p {
            a[j * n + i] = row[j];
        }
    }
    let mut qty = y.to_vec();

    let col_scale = a
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1e-300);

    for j in 0..p {
        // Householder reflection zeroing column j below the diagonal.
        let mut norm = 0.0;
        for i in j..n {
            norm += a[j * n + i] * a[j * n + i];
        }
        let norm = norm.sqrt();
        if norm < 1e-12 * col_scale {
            return Err(StatsError::RankDeficient(j));
        }
        let alpha = if a[j * n + j] >= 0.0 { -norm } else { norm };
        let mut v = vec![0.0; n - j];
        v[0] = a[j * n + j] - alpha;
        for i in (j + 1)..n {
            v[i - j] = a[j * n + i];
        }
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        a[j * n + j] = alpha;
        for i in (j + 1)..n {
            a[j * n + i] = 0.0;
        }
        if vtv < 1e-300 {
            continue;
        }
        for k in (j + 1)..p {
            let mut dot = 0.0;
            for i in j..n {
                dot += v[i - j] * a[k * n + i];
            }
            let f = 2.0 * dot / vtv;
            for i in j..n {
                a[k * n + i] -= f * v[i - j];
            }
        }
        let mut dot = 0.0;
        for i in j..n {
            dot += v[i - j] * qty[i];
        }
        let f = 2.0 * dot / vtv;
        for i in j..n {
            qty[i] -= f * v[i - j];
        }
    }

    // Diagonal rank check on R.
    for j in 0..p {
        if a[j * n + j].abs() < 1e-10 * col_scale {
            return Err(StatsError::RankDeficient(j));
        }
    }

    // Back-substitute R beta = (Q'y)[..p].
    let mut beta = vec![0.0; p];
    for j in (0..p).rev() {
        let mut s = qty[j];
        for k in (j + 1)..p {
            s -= a[k * n + j] * beta[k];
        }
        beta[j] = s / a[j * n + j];
    }

    let rss: f64 = qty[p..].iter().map(|v| v * v).sum();
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean_y) * (v - mean_y)).sum();
    if tss <= 0.0 {
        return Err(StatsError::ConstantResponse);
    }
    let sigma2 = rss / (n - p) as f64;

    // R^-1 by back substitution, then diag((X'X)^-1) = row sums of squares.
    let mut rinv = vec![0.0; p * p];
    for col in 0..p {
        let mut e = vec![0.0; p];
        e[col] = 1.0;
        for j in (0..=col).rev() {
            let mut s = e[j];
            for k in (j + 1)..=col {
                s -= a[k * n + j] * rinv[col * p + k];
            }
            rinv[col * p + j] = s / a[j * n + j];
        }
    }
    let terms = (0..p)
        .map(|j| {
            let mut d = 0.0;
            for k in j..p {
                d += rinv[k * p + j] * rinv[k * p + j];
            }
            FitTerm {
                name: names[j].to_string(),
                coefficient: beta[j],
                standard_error: (sigma2 * d).sqrt(),
            }
        })
        .collect();

    let r2 = 1.0 - rss / tss;
    let adj_r2 = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / ((n - p) as f64);
    Ok(ModelFit {
        terms,
        r2,
        adj_r2,
        n,
    })
}

/// Percentile bootstrap confidence interval for a rank statistic over pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub b_resamples: usize,
    pub seed: u64,
    /// Resamples whose statistic was undefined (skipped, but counted).
    pub skipped: usize,
}

/// Conclusion drawn from a confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Significance {
    Positive,
    Negative,
    None,
}

impl Significance {
    pub fn label(self) -> &'static str {
        match self {
            Significance::Positive => "positive",
            Significance::Negative => "negative",
            Significance::None => "none",
        }
    }
}

impl std::fmt::Display for Significance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// An interval is significant only when it lies entirely on one side of zero.
pub fn significance(ci: &ConfidenceInterval) -> Significance {
    if ci.lo > 0.0 {
        Significance::Positive
    } else if ci.hi < 0.0 {
        Significance::Negative
    } else {
        Significance::None
    }
}

fn resample_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&index.to_le_bytes());
    ChaCha20Rng::from_seed(bytes)
}

/// Percentile bootstrap interval over `b` with-replacement resamples of the
/// pairs, statistic = Spearman's rho. Fixed seed makes runs byte-identical.
pub fn bootstrap_spearman_ci(
    pairs: &[(f64, f64)],
    b: usize,
    seed: u64,
    level: f64,
) -> Result<ConfidenceInterval> {
    if b == 0 || pairs.len() < 3 {
        return Err(StatsError::BadBootstrapInput {
            b,
            pairs: pairs.len(),
        });
    }
    let n = pairs.len();
    let mut stats = Vec::with_capacity(b);
    let mut skipped = 0usize;
    for i in 0..b {
        let mut rng = resample_rng(seed, i as u64);
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let idx = rng.random_range(0..n);
            xs.push(pairs[idx].0);
            ys.push(pairs[idx].1);
        }
        match spearman(&xs, &ys) {
            Ok(rho) => stats.push(rho),
            Err(_) => skipped += 1,
        }
    }
    if stats.is_empty() {
        return Err(StatsError::AllResamplesUndefined(b));
    }
    stats.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN statistic"));
    let alpha = (1.0 - level) / 2.0;
    Ok(ConfidenceInterval {
        lo: quantile_sorted(&stats, alpha),
        hi: quantile_sorted(&stats, 1.0 - alpha),
        level,
        b_resamples: b,
        seed,
        skipped,
    })
}

/// Linear-interpolation quantile of a sorted slice (R type 7).
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let m = sorted.len();
    if m == 1 {
        return sorted[0];
    }
    let h = (m - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pearson_perfect_lines() {
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let y2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let yn: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &y2).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &yn).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_constant_errors() {
        let x = vec![1.0, 2.0, 3.0];
        let y = vec![5.0, 5.0, 5.0];
        assert!(matches!(
            pearson(&x, &y),
            Err(StatsError::UndefinedCorrelation(_))
        ));
    }

    #[test]
    fn spearman_monotone_and_reversed() {
        let x = vec![1.0, 2.0, 5.0, 9.0];
        let y = vec![0.1, 0.7, 0.9, 4.0];
        assert!((spearman(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        let yr: Vec<f64> = y.iter().rev().cloned().collect();
        assert!((spearman(&x, &yr).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_tied_ranks_hand_value() {
        // x = [1,2,2,3] ranks to [1, 2.5, 2.5, 4]; pearson against [1,2,3,4]
        // evaluates to 3/sqrt(10) by hand.
        let x = vec![1.0, 2.0, 2.0, 3.0];
        let y = vec![1.0, 2.0, 3.0, 4.0];
        let expected = 3.0 / 10.0f64.sqrt();
        assert!((spearman(&x, &y).unwrap() - expected).abs() < 1e-12);
        assert_eq!(average_ranks(&x), vec![1.0, 2.5, 2.5, 4.0]);
    }

    #[test]
    fn kappa_examples() {
        let a = vec![1, 1, 0, 0];
        assert!((cohen_kappa(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let b = vec![1, 0, 1, 0];
        assert!(cohen_kappa(&a, &b).unwrap().abs() < 1e-12);
        let c = vec![0, 1, 0, 1];
        assert!((cohen_kappa(&b, &c).unwrap() + 1.0).abs() < 1e-12);
        let ones = vec![1, 1, 1];
        assert_eq!(cohen_kappa(&ones, &ones), Err(StatsError::KappaUndefined));
    }

    #[test]
    fn kappa_band_boundaries() {
        assert_eq!(kappa_band(0.27), KappaBand::Fair);
        assert_eq!(kappa_band(0.82), KappaBand::AlmostPerfect);
        assert_eq!(kappa_band(-0.1), KappaBand::Poor);
        assert_eq!(kappa_band(0.0), KappaBand::Slight);
        assert_eq!(kappa_band(0.20), KappaBand::Slight);
        assert_eq!(kappa_band(0.40), KappaBand::Fair);
        assert_eq!(kappa_band(0.60), KappaBand::Moderate);
        assert_eq!(kappa_band(0.80), KappaBand::Substantial);
        assert_eq!(kappa_band(1.0), KappaBand::AlmostPerfect);
    }

    #[test]
    fn ols_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![1.0, x]).collect();
        let y: Vec<f64> = xs.iter().map(|&x| 2.0 * x + 1.0).collect();
        let fit = ols(&rows, &y, &["intercept", "x"]).unwrap();
        assert!((fit.terms[0].coefficient - 1.0).abs() < 1e-10);
        assert!((fit.terms[1].coefficient - 2.0).abs() < 1e-10);
        assert!((fit.r2 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ols_exact_quadratic() {
        let xs = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0];
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![1.0, x, x * x]).collect();
        let y: Vec<f64> = xs.iter().map(|&x| 1.0 - x + 0.5 * x * x).collect();
        let fit = ols(&rows, &y, &["intercept", "x", "x2"]).unwrap();
        assert!((fit.terms[0].coefficient - 1.0).abs() < 1e-9);
        assert!((fit.terms[1].coefficient + 1.0).abs() < 1e-9);
        assert!((fit.terms[2].coefficient - 0.5).abs() < 1e-9);
        assert!((fit.r2 - 1.0).abs() < 1e-10);
    }

    /// Independent oracle: closed-form normal equations solved by Gaussian
    /// elimination with partial pivoting; inverse by Gauss-Jordan.
    fn normal_equation_oracle(rows: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = rows.len();
        let p = rows[0].len();
        let mut xtx = vec![vec![0.0; p]; p];
        let mut xty = vec![0.0; p];
        for i in 0..n {
            for j in 0..p {
                xty[j] += rows[i][j] * y[i];
                for k in 0..p {
                    xtx[j][k] += rows[i][j] * rows[i][k];
                }
            }
        }
        // Gauss-Jordan inversion of X'X.
        let mut aug: Vec<Vec<f64>> = xtx
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r = row.clone();
                r.extend((0..p).map(|j| if i == j { 1.0 } else { 0.0 }));
                r
            })
            .collect();
        for col in 0..p {
            let pivot = (col..p)
                .max_by(|&a, &b| aug[a][col].abs().partial_cmp(&aug[b][col].abs()).unwrap())
                .unwrap();
            aug.swap(col, pivot);
            let pv = aug[col][col];
            for v in aug[col].iter_mut() {
                *v /= pv;
            }
            for r in 0..p {
                if r != col {
                    let f = aug[r][col];
                    for c in 0..2 * p {
                        aug[r][c] -= f * aug[col][c];
                    }
                }
            }
        }
        let inv: Vec<Vec<f64>> = aug.iter().map(|r| r[p..].to_vec()).collect();
        let beta: Vec<f64> = (0..p)
            .map(|j| (0..p).map(|k| inv[j][k] * xty[k]).sum())
            .collect();
        let rss: f64 = (0..n)
            .map(|i| {
                let fitted: f64 = (0..p).map(|j| rows[i][j] * beta[j]).sum();
                (y[i] - fitted) * (y[i] - fitted)
            })
            .sum();
        let sigma2 = rss / (n - p) as f64;
        let se: Vec<f64> = (0..p).map(|j| (sigma2 * inv[j][j]).sqrt()).collect();
        (beta, se)
    }

    #[test]
    fn ols_matches_normal_equation_oracle() {
        let rows = vec![
            vec![1.0, 0.3],
            vec![1.0, 1.1],
            vec![1.0, 2.2],
            vec![1.0, 2.9],
            vec![1.0, 4.5],
        ];
        let y = vec![0.9, 2.4, 5.3, 6.5, 10.2];
        let fit = ols(&rows, &y, &["intercept", "x"]).unwrap();
        let (beta, se) = normal_equation_oracle(&rows, &y);
        for j in 0..2 {
            assert!((fit.terms[j].coefficient - beta[j]).abs() < 1e-9);
            assert!((fit.terms[j].standard_error - se[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn ols_rejects_degenerate_inputs() {
        let rows = vec![vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]];
        let y = vec![1.0, 2.0, 3.0];
        assert!(matches!(
            ols(&rows, &y, &["intercept", "x"]),
            Err(StatsError::RankDeficient(_))
        ));
        let rows2 = vec![vec![1.0, 1.0], vec![1.0, 2.0]];
        let y2 = vec![1.0, 2.0];
        assert!(matches!(
            ols(&rows2, &y2, &["intercept", "x"]),
            Err(StatsError::TooFewObservations { .. })
        ));
    }

    #[test]
    fn bootstrap_monotone_pairs_pin_at_one() {
        let pairs: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, (i * i) as f64)).collect();
        let ci = bootstrap_spearman_ci(&pairs, 200, 42, 0.95).unwrap();
        assert_eq!((ci.lo, ci.hi), (1.0, 1.0));
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let pairs: Vec<(f64, f64)> = (0..15)
            .map(|i| (i as f64, ((i * 7) % 5) as f64 + 0.1 * i as f64))
            .collect();
        let a = bootstrap_spearman_ci(&pairs, 500, 7, 0.95).unwrap();
        let b = bootstrap_spearman_ci(&pairs, 500, 7, 0.95).unwrap();
        assert_eq!(a, b);
        let c = bootstrap_spearman_ci(&pairs, 500, 8, 0.95).unwrap();
        assert!(a != c);
    }

    #[test]
    fn bootstrap_rejects_bad_inputs() {
        let pairs = vec![(1.0, 2.0), (2.0, 3.0), (3.0, 1.0)];
        assert!(matches!(
            bootstrap_spearman_ci(&pairs, 0, 1, 0.95),
            Err(StatsError::BadBootstrapInput { .. })
        ));
        assert!(matches!(
            bootstrap_spearman_ci(&pairs[..2], 10, 1, 0.95),
            Err(StatsError::BadBootstrapInput { .. })
        ));
    }

    #[test]
    fn significance_rule() {
        let ci = |lo, hi| ConfidenceInterval {
            lo,
            hi,
            level: 0.95,
            b_resamples: 1,
            seed: 0,
            skipped: 0,
        };
        assert_eq!(significance(&ci(0.2, 0.6)), Significance::Positive);
        assert_eq!(significance(&ci(-0.3, 0.4)), Significance::None);
        assert_eq!(significance(&ci(-0.6, -0.1)), Significance::Negative);
    }

    /// Contingency-table formula for binary labels, written independently.
    fn kappa_binary_oracle(a: &[u8], b: &[u8]) -> Option<f64> {
        let n = a.len() as f64;
        let mut n00 = 0.0;
        let mut n01 = 0.0;
        let mut n10 = 0.0;
        let mut n11 = 0.0;
        for (x, y) in a.iter().zip(b) {
            match (x, y) {
                (0, 0) => n00 += 1.0,
                (0, 1) => n01 += 1.0,
                (1, 0) => n10 += 1.0,
                (1, 1) => n11 += 1.0,
                _ => unreachable!(),
            }
        }
        let po = (n00 + n11) / n;
        let pe = ((n00 + n01) * (n00 + n10) + (n10 + n11) * (n01 + n11)) / (n * n);
        if (1.0 - pe).abs() < 1e-15 {
            None
        } else {
            Some((po - pe) / (1.0 - pe))
        }
    }

    #[test]
    fn kappa_exhaustive_binary_oracle() {
        // Every binary label pair of length 1..=8: 4^len combined patterns.
        for len in 1usize..=8 {
            for code in 0u32..4u32.pow(len as u32) {
                let mut a = vec![0u8; len];
                let mut b = vec![0u8; len];
                let mut c = code;
                for i in 0..len {
                    a[i] = (c % 2) as u8;
                    c /= 2;
                    b[i] = (c % 2) as u8;
                    c /= 2;
                }
                let ours = cohen_kappa(&a, &b).ok();
                let oracle = kappa_binary_oracle(&a, &b);
                match (ours, oracle) {
                    (Some(x), Some(y)) => assert!(
                        (x - y).abs() < 1e-12,
                        "kappa mismatch for a={a:?} b={b:?}: {x} vs {y}"
                    ),
                    (None, None) => {}
                    (x, y) => panic!("definedness mismatch for a={a:?} b={b:?}: {x:?} vs {y:?}"),
                }
            }
        }
    }

    #[test]
    fn bootstrap_widens_as_samples_shrink() {
        // Fixed data-generating process, width compared over 100 seeds.
        let mut wins = 0;
        for seed in 0..100u64 {
            let mut rng = resample_rng(seed, u64::MAX);
            let gen_pairs = |rng: &mut ChaCha20Rng, n: usize| -> Vec<(f64, f64)> {
                (0..n)
                    .map(|_| {
                        let x: f64 = rng.random_range(0.0..1.0);
                        let noise: f64 = rng.random_range(-0.8..0.8);
                        (x, x + noise)
                    })
                    .collect()
            };
            let small = gen_pairs(&mut rng, 8);
            let large = gen_pairs(&mut rng, 40);
            let ci_small = bootstrap_spearman_ci(&small, 300, seed, 0.95).unwrap();
            let ci_large = bootstrap_spearman_ci(&large, 300, seed, 0.95).unwrap();
            if (ci_small.hi - ci_small.lo) >= (ci_large.hi - ci_large.lo) {
                wins += 1;
            }
        }
        assert!(wins >= 90, "small-sample CI wider in only {wins}/100 seeds");
    }

    proptest! {
        #[test]
        fn kappa_symmetric_and_self_perfect(labels in proptest::collection::vec(0u8..3, 2..20)) {
            let flipped: Vec<u8> = labels.iter().map(|v| (v + 1) % 3).collect();
            if let (Ok(k1), Ok(k2)) = (cohen_kappa(&labels, &flipped), cohen_kappa(&flipped, &labels)) {
                prop_assert!((k1 - k2).abs() < 1e-12);
            }
            let classes: std::collections::BTreeSet<u8> = labels.iter().cloned().collect();
            if classes.len() >= 2 {
                prop_assert!((cohen_kappa(&labels, &labels).unwrap() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn spearman_invariant_under_monotone_transform(
            xs in proptest::collection::vec(-100.0f64..100.0, 4..30),
            ys in proptest::collection::vec(-100.0f64..100.0, 4..30),
        ) {
            let n = xs.len().min(ys.len());
            let x = &xs[..n];
            let y = &ys[..n];
            if let Ok(rho) = spearman(x, y) {
                // exp is strictly monotone; ranks are unchanged.
                let xt: Vec<f64> = x.iter().map(|v| (v / 50.0).exp()).collect();
                let yt: Vec<f64> = y.iter().map(|v| v * 3.0 + 7.0).collect();
                let rho_t = spearman(&xt, &yt).unwrap();
                prop_assert!((rho - rho_t).abs() < 1e-9);
            }
        }

        #[test]
        fn ols_residuals_orthogonal_to_predictors(
            pts in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 5..40)
        ) {
            let rows: Vec<Vec<f64>> = pts.iter().map(|(x, _)| vec![1.0, *x]).collect();
            let y: Vec<f64> = pts.iter().map(|(_, y)| *y).collect();
            if let Ok(fit) = ols(&rows, &y, &["intercept", "x"]) {
                let scale = y.iter().fold(1.0f64, |a, v| a.max(v.abs()));
                for j in 0..2 {
                    let dot: f64 = rows.iter().zip(&y).map(|(row, yi)| {
                        let fitted: f64 = row.iter().zip(&fit.terms)
                            .map(|(v, t)| v * t.coefficient).sum();
                        row[j] * (yi - fitted)
                    }).sum();
                    prop_assert!(dot.abs() < 1e-8 * scale * rows.len() as f64);
                }
            }
        }
    }
}
