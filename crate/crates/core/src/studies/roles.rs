//! Replication suite 1: agreement of count- and network-based core/peripheral
//! operationalisations and the hierarchical embedding of developer roles.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::identity::DevId;
use crate::network::NodeMetrics;
use crate::stats;

#[derive(Debug, Error, PartialEq)]
pub enum RolesError {
    #[error("cannot classify: all metric values are zero")]
    AllZero,
    #[error("no window with a defined kappa for pair {0} / {1}")]
    NoDefinedWindow(String, String),
    #[error("variants share no developers")]
    EmptyIntersection,
}

/// The five core/peripheral operationalisations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RoleMetric {
    Loc,
    Commits,
    Degree,
    Evcent,
    Hierarchy,
}

impl RoleMetric {
    pub const ALL: [RoleMetric; 5] = [
        RoleMetric::Loc,
        RoleMetric::Commits,
        RoleMetric::Degree,
        RoleMetric::Evcent,
        RoleMetric::Hierarchy,
    ];

    pub fn label(self) -> &'static str {
        match self {
            RoleMetric::Loc => "loc",
            RoleMetric::Commits => "commits",
            RoleMetric::Degree => "degree",
            RoleMetric::Evcent => "evcent",
            RoleMetric::Hierarchy => "hierarchy",
        }
    }
}

impl std::fmt::Display for RoleMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Core set for one metric in one window.
#[derive(Debug, Clone, PartialEq)]
pub struct RoleClassification {
    pub window: usize,
    pub metric: RoleMetric,
    pub core: BTreeSet<DevId>,
    pub universe: BTreeSet<DevId>,
}

impl RoleClassification {
    pub fn is_core(&self, dev: &DevId) -> bool {
        self.core.contains(dev)
    }
}

/// Per-developer counts for one window.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CountMetrics {
    pub commit_count: BTreeMap<DevId, u32>,
    pub loc_churn: BTreeMap<DevId, u64>,
}

/// Sort by (value desc, dev id asc) and take the minimal prefix whose sum
/// reaches `threshold_fraction` of the total.
pub fn classify_core(
    values: &BTreeMap<DevId, f64>,
    threshold_fraction: f64,
) -> Result<BTreeSet<DevId>, RolesError> {
    let total: f64 = values.values().sum();
    if total <= 0.0 {
        return Err(RolesError::AllZero);
    }
    let mut ranked: Vec<(&DevId, f64)> = values.iter().map(|(d, v)| (d, *v)).collect();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("finite metric values")
            .then_with(|| a.0.cmp(b.0))
    });
    let mut core = BTreeSet::new();
    let mut cumulative = 0.0;
    for (dev, value) in ranked {
        if cumulative >= threshold_fraction * total {
            break;
        }
        cumulative += value;
        core.insert(dev.clone());
    }
    Ok(core)
}

/// A pairwise agreement cell, averaged over windows.
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementCell {
    pub metric_a: RoleMetric,
    pub metric_b: RoleMetric,
    pub mean_kappa: f64,
    pub windows_used: usize,
    pub windows_skipped: usize,
}

/// Kappa on binary core/peripheral labels of one window.
fn window_kappa(a: &RoleClassification, b: &RoleClassification) -> Option<f64> {
    let universe: BTreeSet<&DevId> = a.universe.union(&b.universe).collect();
    if universe.is_empty() {
        return None;
    }
    let la: Vec<u8> = universe.iter().map(|d| u8::from(a.core.contains(*d))).collect();
    let lb: Vec<u8> = universe.iter().map(|d| u8::from(b.core.contains(*d))).collect();
    stats::cohen_kappa(&la, &lb).ok()
}

/// Time-averaged pairwise agreement over the given windows. Windows with an
/// undefined kappa (degenerate single-class labelings) are skipped and
/// counted. Pairs without any defined window are an error.
pub fn agreement_matrix(
    per_window: &[BTreeMap<RoleMetric, RoleClassification>],
) -> Result<Vec<AgreementCell>, RolesError> {
    let mut cells = Vec::new();
    for (i, a) in RoleMetric::ALL.iter().enumerate() {
        for b in RoleMetric::ALL.iter().skip(i) {
            let mut kappas = Vec::new();
            let mut skipped = 0usize;
            for window in per_window {
                let (Some(ca), Some(cb)) = (window.get(a), window.get(b)) else {
                    skipped += 1;
                    continue;
                };
                match window_kappa(ca, cb) {
                    Some(k) => kappas.push(k),
                    None => skipped += 1,
                }
            }
            if kappas.is_empty() {
                return Err(RolesError::NoDefinedWindow(
                    a.label().into(),
                    b.label().into(),
                ));
            }
            cells.push(AgreementCell {
                metric_a: *a,
                metric_b: *b,
                mean_kappa: kappas.iter().sum::<f64>() / kappas.len() as f64,
                windows_used: kappas.len(),
                windows_skipped: skipped,
            });
        }
    }
    Ok(cells)
}

/// One row of the hierarchical-embedding table.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyRow {
    pub window: usize,
    pub dev: DevId,
    pub degree: u32,
    pub clustering: f64,
    pub core: bool,
}

/// Per-developer (degree, clustering, role) for degree >= 2 developers, plus
/// the log-log slope of clustering on degree. The slope is absent when fewer
/// than three developers have positive clustering or the fit degenerates.
pub fn hierarchy_embedding(
    window: usize,
    metrics: &[NodeMetrics],
    classification: &RoleClassification,
) -> (Vec<HierarchyRow>, Option<f64>) {
    let rows: Vec<HierarchyRow> = metrics
        .iter()
        .filter_map(|m| {
            m.clustering.map(|c| HierarchyRow {
                window,
                dev: m.dev.clone(),
                degree: m.degree,
                clustering: c,
                core: classification.is_core(&m.dev),
            })
        })
        .collect();
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.clustering > 0.0 && r.degree >= 2)
        .map(|r| ((r.degree as f64).ln(), r.clustering.ln()))
        .collect();
    let slope = if points.len() < 3 {
        None
    } else {
        let design: Vec<Vec<f64>> = points.iter().map(|(x, _)| vec![1.0, *x]).collect();
        let y: Vec<f64> = points.iter().map(|(_, y)| *y).collect();
        stats::ols(&design, &y, &["intercept", "log_degree"])
            .ok()
            .map(|fit| fit.terms[1].coefficient)
    };
    (rows, slope)
}

/// A classification keyed by display name, for cross-variant comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedClassification {
    pub window: usize,
    pub metric: RoleMetric,
    pub core: BTreeSet<String>,
    pub universe: BTreeSet<String>,
}

/// Kappa between two variants' classifications, restricted to developers
/// found by both (joined on canonical display names). Windows with undefined
/// kappa are skipped; the mean over defined windows is returned.
pub fn cross_variant_agreement(
    a: &[NamedClassification],
    b: &[NamedClassification],
) -> Result<BTreeMap<RoleMetric, f64>, RolesError> {
    let mut out = BTreeMap::new();
    for metric in RoleMetric::ALL {
        let mut kappas = Vec::new();
        for ca in a.iter().filter(|c| c.metric == metric) {
            let Some(cb) = b.iter().find(|c| c.metric == metric && c.window == ca.window) else {
                continue;
            };
            let shared: Vec<&String> = ca.universe.intersection(&cb.universe).collect();
            if shared.len() < 2 {
                continue;
            }
            let la: Vec<u8> = shared.iter().map(|d| u8::from(ca.core.contains(*d))).collect();
            let lb: Vec<u8> = shared.iter().map(|d| u8::from(cb.core.contains(*d))).collect();
            if let Ok(k) = stats::cohen_kappa(&la, &lb) {
                kappas.push(k);
            }
        }
        if !kappas.is_empty() {
            out.insert(metric, kappas.iter().sum::<f64>() / kappas.len() as f64);
        }
    }
    if out.is_empty() {
        return Err(RolesError::EmptyIntersection);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn values(pairs: &[(&str, f64)]) -> BTreeMap<DevId, f64> {
        pairs.iter().map(|(d, v)| (d.to_string(), *v)).collect()
    }

    #[test]
    fn classify_core_cumulative_prefix() {
        let v = values(&[("a", 10.0), ("b", 5.0), ("c", 3.0), ("d", 1.0), ("e", 1.0)]);
        let core = classify_core(&v, 0.8).unwrap();
        // cumulative 10 (50%), 15 (75%), 18 (90%): top three reach 80%
        let expect: BTreeSet<DevId> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        assert_eq!(core, expect);
    }

    #[test]
    fn classify_core_single_dev_and_ties() {
        let single = classify_core(&values(&[("only", 7.0)]), 0.8).unwrap();
        assert_eq!(single.len(), 1);

        let equal = values(&[("a", 4.0), ("b", 4.0), ("c", 4.0), ("d", 4.0), ("e", 4.0)]);
        let core = classify_core(&equal, 0.8).unwrap();
        // ties broken by dev id ascending: first four reach 16/20
        let expect: BTreeSet<DevId> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        assert_eq!(core, expect);
    }

    #[test]
    fn classify_core_rejects_all_zero() {
        assert_eq!(
            classify_core(&values(&[("a", 0.0), ("b", 0.0)]), 0.8),
            Err(RolesError::AllZero)
        );
    }

    #[test]
    fn classify_core_is_scale_invariant() {
        let v = values(&[("a", 12.0), ("b", 7.0), ("c", 2.0), ("d", 1.0)]);
        let scaled: BTreeMap<DevId, f64> = v.iter().map(|(d, x)| (d.clone(), x * 31.7)).collect();
        assert_eq!(
            classify_core(&v, 0.8).unwrap(),
            classify_core(&scaled, 0.8).unwrap()
        );
    }

    #[test]
    fn threshold_one_takes_all_nonzero() {
        let v = values(&[("a", 3.0), ("b", 1.0), ("c", 0.0)]);
        let core = classify_core(&v, 1.0).unwrap();
        let expect: BTreeSet<DevId> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        assert_eq!(core, expect);
    }

    fn classification(
        window: usize,
        metric: RoleMetric,
        core: &[&str],
        universe: &[&str],
    ) -> RoleClassification {
        RoleClassification {
            window,
            metric,
            core: core.iter().map(|s| s.to_string()).collect(),
            universe: universe.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn full_window(core: &[&str], universe: &[&str], w: usize) -> BTreeMap<RoleMetric, RoleClassification> {
        RoleMetric::ALL
            .iter()
            .map(|m| (*m, classification(w, *m, core, universe)))
            .collect()
    }

    #[test]
    fn identical_classifications_give_unit_kappa() {
        let windows = vec![
            full_window(&["a"], &["a", "b", "c"], 0),
            full_window(&["a", "b"], &["a", "b", "c", "d"], 1),
        ];
        let cells = agreement_matrix(&windows).unwrap();
        for cell in &cells {
            assert!((cell.mean_kappa - 1.0).abs() < 1e-12);
            assert_eq!(cell.windows_used, 2);
        }
        // diagonal present and symmetric representation is the upper triangle
        assert_eq!(cells.len(), 15);
    }

    #[test]
    fn complement_classification_on_fixture() {
        // six devs, metric A cores {a,b,c}, metric B cores {d,e,f}: hand kappa
        // from the contingency table is -1 at this exact class balance.
        let mut window = BTreeMap::new();
        window.insert(
            RoleMetric::Loc,
            classification(0, RoleMetric::Loc, &["a", "b", "c"], &["a", "b", "c", "d", "e", "f"]),
        );
        window.insert(
            RoleMetric::Commits,
            classification(0, RoleMetric::Commits, &["d", "e", "f"], &["a", "b", "c", "d", "e", "f"]),
        );
        let a = window.get(&RoleMetric::Loc).unwrap();
        let b = window.get(&RoleMetric::Commits).unwrap();
        assert!((window_kappa(a, b).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_rankings_average_near_zero() {
        // 200 synthetic windows with independently shuffled rankings
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(11);
        let devs: Vec<DevId> = (0..10).map(|i| format!("d{i}")).collect();
        let mut windows = Vec::new();
        for w in 0..200 {
            let random_core = |rng: &mut rand_chacha::ChaCha20Rng| -> BTreeSet<DevId> {
                devs.iter()
                    .filter(|_| rng.random_range(0.0..1.0) < 0.3)
                    .cloned()
                    .collect()
            };
            let mut window = BTreeMap::new();
            for m in [RoleMetric::Loc, RoleMetric::Commits] {
                window.insert(
                    m,
                    RoleClassification {
                        window: w,
                        metric: m,
                        core: random_core(&mut rng),
                        universe: devs.iter().cloned().collect(),
                    },
                );
            }
            windows.push(window);
        }
        let mut kappas = Vec::new();
        for w in &windows {
            if let Some(k) = window_kappa(&w[&RoleMetric::Loc], &w[&RoleMetric::Commits]) {
                kappas.push(k);
            }
        }
        let mean = kappas.iter().sum::<f64>() / kappas.len() as f64;
        assert!(mean.abs() < 0.1, "mean kappa {mean} not near zero");
    }

    #[test]
    fn hierarchy_embedding_on_core_periphery_graph() {
        use crate::network::{build_bipartite_projection, node_metrics};
        // dense core of 4 sharing one file; 6 pendant pairs each sharing a
        // file with one core member
        let mut changes: Vec<(DevId, String)> = Vec::new();
        for c in 0..4 {
            changes.push((format!("core{c}"), "hub".to_string()));
        }
        for p in 0..6 {
            let core = format!("core{}", p % 4);
            let pa = format!("p{p}a");
            let pb = format!("p{p}b");
            let file = format!("leaf{p}");
            changes.push((core, file.clone()));
            changes.push((pa, file.clone()));
            changes.push((pb, file));
        }
        let net = build_bipartite_projection(&changes, 0);
        let metrics = node_metrics(&net).unwrap();
        let core_set: BTreeSet<DevId> = (0..4).map(|c| format!("core{c}")).collect();
        let classification = RoleClassification {
            window: 0,
            metric: RoleMetric::Degree,
            core: core_set,
            universe: net.nodes.clone(),
        };
        let (rows, slope) = hierarchy_embedding(0, &metrics, &classification);
        assert!(!rows.is_empty());
        let slope = slope.expect("slope defined");
        assert!(slope < 0.0, "expected negative log-log slope, got {slope}");
    }

    #[test]
    fn complete_graph_slope_is_absent() {
        use crate::network::{node_metrics, DevNetwork, Edge, NetworkVariant};
        let names: Vec<DevId> = (0..5).map(|i| format!("d{i}")).collect();
        let mut edges = Vec::new();
        for i in 0..5 {
            for j in (i + 1)..5 {
                edges.push(Edge {
                    src: names[i].clone(),
                    dst: names[j].clone(),
                    weight: 1.0,
                    multiplicity: 1,
                });
            }
        }
        let net = DevNetwork {
            window: 0,
            nodes: names.iter().cloned().collect(),
            edges,
            directed: false,
            variant: NetworkVariant::BipartiteProjection,
        };
        let metrics = node_metrics(&net).unwrap();
        let classification = RoleClassification {
            window: 0,
            metric: RoleMetric::Degree,
            core: BTreeSet::new(),
            universe: net.nodes.clone(),
        };
        // all clustering 1, all degrees equal: the design matrix degenerates
        let (_, slope) = hierarchy_embedding(0, &metrics, &classification);
        assert_eq!(slope, None);
    }

    #[test]
    fn star_of_triangles_center_has_lowest_clustering() {
        use crate::network::{node_metrics, DevNetwork, Edge, NetworkVariant};
        let mut edges = Vec::new();
        let mk = |a: &str, b: &str| Edge {
            src: a.to_string(),
            dst: b.to_string(),
            weight: 1.0,
            multiplicity: 1,
        };
        for p in ["1", "2", "3"] {
            let a = format!("a{p}");
            let b = format!("b{p}");
            edges.push(mk("center", &a));
            edges.push(mk("center", &b));
            edges.push(mk(&a, &b));
        }
        let nodes: BTreeSet<DevId> = edges
            .iter()
            .flat_map(|e| [e.src.clone(), e.dst.clone()])
            .collect();
        let net = DevNetwork {
            window: 0,
            nodes,
            edges,
            directed: false,
            variant: NetworkVariant::BipartiteProjection,
        };
        let metrics = node_metrics(&net).unwrap();
        let center = metrics.iter().find(|m| m.dev == "center").unwrap();
        // hand computation: 3 adjacent neighbor pairs out of C(6,2)=15
        assert!((center.clustering.unwrap() - 0.2).abs() < 1e-12);
        for leaf in metrics.iter().filter(|m| m.dev != "center") {
            assert_eq!(leaf.clustering, Some(1.0));
            assert!(center.clustering.unwrap() < leaf.clustering.unwrap());
        }
    }

    #[test]
    fn cross_variant_agreement_on_shared_names() {
        let mk = |metric, core: &[&str], universe: &[&str]| NamedClassification {
            window: 0,
            metric,
            core: core.iter().map(|s| s.to_string()).collect(),
            universe: universe.iter().map(|s| s.to_string()).collect(),
        };
        let a: Vec<NamedClassification> = RoleMetric::ALL
            .iter()
            .map(|m| mk(*m, &["ann"], &["ann", "bob", "cat"]))
            .collect();
        // variant b found an extra dev not present in a; intersection drops it
        let b: Vec<NamedClassification> = RoleMetric::ALL
            .iter()
            .map(|m| mk(*m, &["ann"], &["ann", "bob", "cat", "dan"]))
            .collect();
        let out = cross_variant_agreement(&a, &b).unwrap();
        for (_, kappa) in out {
            assert!((kappa - 1.0).abs() < 1e-12);
        }
        // disjoint universes: error
        let c: Vec<NamedClassification> = RoleMetric::ALL
            .iter()
            .map(|m| mk(*m, &["x"], &["x", "y"]))
            .collect();
        assert_eq!(
            cross_variant_agreement(&a, &c),
            Err(RolesError::EmptyIntersection)
        );
    }
}
