//! Per-window developer networks under three construction variants, plus
//! node and graph metrics.
//!
//! Metrics other than in-degree are computed on the symmetrized simple graph
//! (parallel edges collapsed by weight summation, direction dropped):
//! clustering and hierarchy are undirected notions and a single metric
//! substrate keeps variants comparable. Eigenvector centrality is weighted,
//! clustering unweighted.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::identity::DevId;

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("network is empty")]
    EmptyNetwork,
    #[error("eigenvector centrality did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkVariant {
    TemporalEntity,
    LineOwnership,
    BipartiteProjection,
}

impl NetworkVariant {
    pub fn label(self) -> &'static str {
        match self {
            NetworkVariant::TemporalEntity => "temporal_entity",
            NetworkVariant::LineOwnership => "line_ownership",
            NetworkVariant::BipartiteProjection => "bipartite_projection",
        }
    }
}

/// Edge weight aggregation for the temporal variant: lines credited to every
/// distinct prior contributor, or only to the most recent one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    CountPerPriorDev,
    CountOnce,
}

/// One (possibly parallel) edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub src: DevId,
    pub dst: DevId,
    pub weight: f64,
    /// Number of events aggregated into this record (1 for parallel edges).
    pub multiplicity: u32,
}

/// A per-window developer graph with construction-variant metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct DevNetwork {
    pub window: usize,
    pub nodes: BTreeSet<DevId>,
    pub edges: Vec<Edge>,
    pub directed: bool,
    pub variant: NetworkVariant,
}

/// An entity change carrying its window-local ordering key.
#[derive(Debug, Clone)]
pub struct OrderedEntityChange {
    pub commit_time: i64,
    pub hash: String,
    pub path: String,
    pub entity: String,
    pub dev: DevId,
    pub lines: u32,
}

/// One modified pre-image line: modifier plus prior owner where blame knew one.
#[derive(Debug, Clone)]
pub struct LineModification {
    pub commit_time: i64,
    pub hash: String,
    pub path: String,
    pub modifier: DevId,
    pub owner: Option<DevId>,
}

/// Directed edge d1 -> d2 for each change by d1 to an entity previously
/// changed by d2 within the window. No self-edges; weights aggregated per
/// scheme; `count_once` credits the most recent prior contributor.
pub fn build_temporal_entity_network(
    changes: &[OrderedEntityChange],
    window: usize,
    scheme: WeightScheme,
) -> DevNetwork {
    let mut ordered: Vec<&OrderedEntityChange> = changes.iter().collect();
    ordered.sort_by(|a, b| {
        (a.commit_time, &a.hash, &a.path, &a.entity)
            .cmp(&(b.commit_time, &b.hash, &b.path, &b.entity))
    });

    let mut nodes: BTreeSet<DevId> = BTreeSet::new();
    // per entity: contributor sequence in window order
    let mut contributors: BTreeMap<(String, String), Vec<DevId>> = BTreeMap::new();
    let mut weights: BTreeMap<(DevId, DevId), (f64, u32)> = BTreeMap::new();

    let mut i = 0;
    while i < ordered.len() {
        // one commit at a time: edges look at state before the commit
        let hash = &ordered[i].hash;
        let mut j = i;
        while j < ordered.len() && &ordered[j].hash == hash {
            j += 1;
        }
        for change in &ordered[i..j] {
            nodes.insert(change.dev.clone());
            let key = (change.path.clone(), change.entity.clone());
            if let Some(prior) = contributors.get(&key) {
                match scheme {
                    WeightScheme::CountPerPriorDev => {
                        let distinct: BTreeSet<&DevId> =
                            prior.iter().filter(|d| **d != change.dev).collect();
                        for dst in distinct {
                            let entry = weights
                                .entry((change.dev.clone(), dst.clone()))
                                .or_insert((0.0, 0));
                            entry.0 += change.lines as f64;
                            entry.1 += 1;
                        }
                    }
                    WeightScheme::CountOnce => {
                        if let Some(dst) = prior.iter().rev().find(|d| **d != change.dev) {
                            let entry = weights
                                .entry((change.dev.clone(), dst.clone()))
                                .or_insert((0.0, 0));
                            entry.0 += change.lines as f64;
                            entry.1 += 1;
                        }
                    }
                }
            }
        }
        for change in &ordered[i..j] {
            contributors
                .entry((change.path.clone(), change.entity.clone()))
                .or_default()
                .push(change.dev.clone());
        }
        i = j;
    }

    let edges: Vec<Edge> = weights
        .into_iter()
        .map(|((src, dst), (weight, multiplicity))| {
            nodes.insert(dst.clone());
            Edge {
                src,
                dst,
                weight,
                multiplicity,
            }
        })
        .collect();
    DevNetwork {
        window,
        nodes,
        edges,
        directed: true,
        variant: NetworkVariant::TemporalEntity,
    }
}

/// One parallel edge per modified line whose pre-image owner differs from the
/// modifier. Unowned lines (root commits, fresh additions) produce no edge.
pub fn build_line_ownership_network(mods: &[LineModification], window: usize) -> DevNetwork {
    let mut ordered: Vec<&LineModification> = mods.iter().collect();
    ordered.sort_by(|a, b| {
        (a.commit_time, &a.hash, &a.path)
            .cmp(&(b.commit_time, &b.hash, &b.path))
            .then_with(|| a.owner.cmp(&b.owner))
    });
    let mut nodes: BTreeSet<DevId> = BTreeSet::new();
    let mut edges = Vec::new();
    for m in ordered {
        nodes.insert(m.modifier.clone());
        if let Some(owner) = &m.owner {
            if *owner != m.modifier {
                nodes.insert(owner.clone());
                edges.push(Edge {
                    src: m.modifier.clone(),
                    dst: owner.clone(),
                    weight: 1.0,
                    multiplicity: 1,
                });
            }
        }
    }
    DevNetwork {
        window,
        nodes,
        edges,
        directed: true,
        variant: NetworkVariant::LineOwnership,
    }
}

/// Undirected simple edge between developers sharing a changed file;
/// weight = sum over shared files of min(change counts).
pub fn build_bipartite_projection(changes: &[(DevId, String)], window: usize) -> DevNetwork {
    let mut per_file: BTreeMap<&str, BTreeMap<&DevId, u32>> = BTreeMap::new();
    let mut nodes: BTreeSet<DevId> = BTreeSet::new();
    for (dev, path) in changes {
        nodes.insert(dev.clone());
        *per_file.entry(path).or_default().entry(dev).or_insert(0) += 1;
    }
    let mut weights: BTreeMap<(DevId, DevId), f64> = BTreeMap::new();
    for devs in per_file.values() {
        let list: Vec<(&DevId, u32)> = devs.iter().map(|(d, c)| (*d, *c)).collect();
        for a in 0..list.len() {
            for b in (a + 1)..list.len() {
                let key = (list[a].0.clone(), list[b].0.clone());
                *weights.entry(key).or_insert(0.0) += list[a].1.min(list[b].1) as f64;
            }
        }
    }
    let edges = weights
        .into_iter()
        .map(|((src, dst), weight)| Edge {
            src,
            dst,
            weight,
            multiplicity: 1,
        })
        .collect();
    DevNetwork {
        window,
        nodes,
        edges,
        directed: false,
        variant: NetworkVariant::BipartiteProjection,
    }
}

/// Node metrics on the symmetrized simple graph (except in-degree, which
/// reads the directed edge records).
#[derive(Debug, Clone, PartialEq)]
pub struct NodeMetrics {
    pub dev: DevId,
    pub degree: u32,
    pub in_degree: Option<u32>,
    pub evcent: f64,
    /// Defined only for degree >= 2.
    pub clustering: Option<f64>,
    pub hierarchy: f64,
}

/// Symmetrized simple weighted adjacency, parallel edges collapsed by sum.
fn simple_adjacency(net: &DevNetwork) -> BTreeMap<&DevId, BTreeMap<&DevId, f64>> {
    let mut adj: BTreeMap<&DevId, BTreeMap<&DevId, f64>> = BTreeMap::new();
    for node in &net.nodes {
        adj.entry(node).or_default();
    }
    for e in &net.edges {
        if e.src == e.dst {
            continue;
        }
        *adj.entry(&e.src).or_default().entry(&e.dst).or_insert(0.0) += e.weight;
        *adj.entry(&e.dst).or_default().entry(&e.src).or_insert(0.0) += e.weight;
    }
    adj
}

const EVCENT_TOLERANCE: f64 = 1e-10;
const EVCENT_MAX_ITERATIONS: usize = 10_000;

/// Weighted eigenvector centrality by power iteration (uniform start vector,
/// unit Euclidean norm). A positive diagonal shift removes bipartite
/// oscillation without changing eigenvectors.
fn eigenvector_centrality(
    order: &[&DevId],
    adj: &BTreeMap<&DevId, BTreeMap<&DevId, f64>>,
) -> Result<Vec<f64>, NetworkError> {
    let n = order.len();
    let uniform = 1.0 / (n as f64).sqrt();
    let max_strength = order
        .iter()
        .map(|d| adj[*d].values().sum::<f64>())
        .fold(0.0f64, f64::max);
    if max_strength == 0.0 {
        // edgeless graph: every node is equally (un)central
        return Ok(vec![uniform; n]);
    }
    let index: BTreeMap<&DevId, usize> = order.iter().enumerate().map(|(i, d)| (*d, i)).collect();
    let mut x = vec![uniform; n];
    for iteration in 0..EVCENT_MAX_ITERATIONS {
        let mut next = x.clone(); // the +I shift
        for (i, dev) in order.iter().enumerate() {
            for (nbr, w) in &adj[*dev] {
                next[i] += w / max_strength * x[index[nbr]];
            }
        }
        let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in next.iter_mut() {
            *v /= norm;
        }
        let delta = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        x = next;
        if delta < EVCENT_TOLERANCE {
            return Ok(x);
        }
        let _ = iteration;
    }
    Err(NetworkError::NonConvergence {
        iterations: EVCENT_MAX_ITERATIONS,
    })
}

fn local_clustering(
    dev: &DevId,
    adj: &BTreeMap<&DevId, BTreeMap<&DevId, f64>>,
) -> Option<f64> {
    let neighbors: Vec<&DevId> = adj[dev].keys().copied().collect();
    let k = neighbors.len();
    if k < 2 {
        return None;
    }
    let mut links = 0usize;
    for a in 0..k {
        for b in (a + 1)..k {
            if adj[neighbors[a]].contains_key(neighbors[b]) {
                links += 1;
            }
        }
    }
    Some(2.0 * links as f64 / (k * (k - 1)) as f64)
}

/// Compute per-node metrics. Hierarchy is degree * (1 - clustering), with
/// absent clustering treated as 0.
pub fn node_metrics(net: &DevNetwork) -> Result<Vec<NodeMetrics>, NetworkError> {
    if net.nodes.is_empty() {
        return Err(NetworkError::EmptyNetwork);
    }
    let adj = simple_adjacency(net);
    let order: Vec<&DevId> = net.nodes.iter().collect();
    let evcent = eigenvector_centrality(&order, &adj)?;
    let mut in_degrees: BTreeMap<&DevId, u32> = BTreeMap::new();
    if net.directed {
        for e in &net.edges {
            *in_degrees.entry(&e.dst).or_insert(0) += 1;
        }
    }
    Ok(order
        .iter()
        .enumerate()
        .map(|(i, dev)| {
            let clustering = local_clustering(dev, &adj);
            let degree = adj[*dev].len() as u32;
            NodeMetrics {
                dev: (*dev).clone(),
                degree,
                in_degree: net
                    .directed
                    .then(|| in_degrees.get(*dev).copied().unwrap_or(0)),
                evcent: evcent[i],
                clustering,
                hierarchy: degree as f64 * (1.0 - clustering.unwrap_or(0.0)),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphMetrics {
    pub n_nodes: usize,
    /// Edge records: multiplicity preserved for the line-ownership variant.
    pub n_edges: usize,
    pub density: f64,
    /// Unweighted diameter of the largest connected component.
    pub diameter: u32,
    /// Transitivity: 3 * triangles / connected triples.
    pub global_clustering: f64,
    /// Mean directed in-degree; absent for undirected variants.
    pub mean_in_degree: Option<f64>,
}

/// Graph-level metrics on the simple symmetrized graph (except n_edges and
/// mean in-degree, which read the raw edge records).
pub fn graph_metrics(net: &DevNetwork) -> Result<GraphMetrics, NetworkError> {
    if net.nodes.is_empty() {
        return Err(NetworkError::EmptyNetwork);
    }
    let adj = simple_adjacency(net);
    let n = net.nodes.len();
    let simple_edges: usize = adj.values().map(|nbrs| nbrs.len()).sum::<usize>() / 2;
    let density = if n > 1 {
        simple_edges as f64 / (n * (n - 1) / 2) as f64
    } else {
        0.0
    };

    // largest connected component by BFS, ties by smallest member id
    let order: Vec<&DevId> = net.nodes.iter().collect();
    let index: BTreeMap<&DevId, usize> = order.iter().enumerate().map(|(i, d)| (*d, i)).collect();
    let mut component = vec![usize::MAX; n];
    let mut components: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut queue = std::collections::VecDeque::from([start]);
        let mut members = Vec::new();
        component[start] = id;
        while let Some(v) = queue.pop_front() {
            members.push(v);
            for nbr in adj[order[v]].keys() {
                let u = index[nbr];
                if component[u] == usize::MAX {
                    component[u] = id;
                    queue.push_back(u);
                }
            }
        }
        components.push(members);
    }
    let largest = components
        .iter()
        .max_by_key(|m| m.len())
        .expect("non-empty graph");
    let mut diameter = 0u32;
    for &src in largest {
        let mut dist = vec![u32::MAX; n];
        dist[src] = 0;
        let mut queue = std::collections::VecDeque::from([src]);
        while let Some(v) = queue.pop_front() {
            for nbr in adj[order[v]].keys() {
                let u = index[nbr];
                if dist[u] == u32::MAX {
                    dist[u] = dist[v] + 1;
                    queue.push_back(u);
                }
            }
        }
        for &m in largest {
            if dist[m] != u32::MAX {
                diameter = diameter.max(dist[m]);
            }
        }
    }

    // transitivity
    let mut triangles = 0usize;
    let mut triples = 0usize;
    for dev in &order {
        let neighbors: Vec<&DevId> = adj[*dev].keys().copied().collect();
        let k = neighbors.len();
        triples += k * (k.saturating_sub(1)) / 2;
        for a in 0..k {
            for b in (a + 1)..k {
                if adj[neighbors[a]].contains_key(neighbors[b]) {
                    triangles += 1;
                }
            }
        }
    }
    // each triangle was counted once per corner
    let global_clustering = if triples > 0 {
        triangles as f64 / triples as f64
    } else {
        0.0
    };

    let mean_in_degree = if net.directed {
        let mut in_deg: BTreeMap<&DevId, usize> = BTreeMap::new();
        for e in &net.edges {
            *in_deg.entry(&e.dst).or_insert(0) += 1;
        }
        Some(net.edges.len() as f64 / n as f64)
            .map(|_| in_deg.values().sum::<usize>() as f64 / n as f64)
    } else {
        None
    };

    Ok(GraphMetrics {
        n_nodes: n,
        n_edges: net.edges.len(),
        density,
        diameter,
        global_clustering,
        mean_in_degree,
    })
}

/// Per-developer foreign modification ratio and its mean.
///
/// FModR(d) = lines modified by d previously owned by someone else, over all
/// of d's modified lines with a known prior owner. Developers without any
/// known-owner modification are excluded from the mean.
pub fn foreign_modification_ratio(
    mods: &[LineModification],
) -> (BTreeMap<DevId, f64>, Option<f64>) {
    let mut known: BTreeMap<&DevId, (u32, u32)> = BTreeMap::new();
    for m in mods {
        if let Some(owner) = &m.owner {
            let entry = known.entry(&m.modifier).or_insert((0, 0));
            entry.0 += 1;
            if *owner != m.modifier {
                entry.1 += 1;
            }
        }
    }
    let ratios: BTreeMap<DevId, f64> = known
        .into_iter()
        .map(|(dev, (total, foreign))| (dev.clone(), foreign as f64 / total as f64))
        .collect();
    let mean = if ratios.is_empty() {
        None
    } else {
        Some(ratios.values().sum::<f64>() / ratios.len() as f64)
    };
    (ratios, mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dev(s: &str) -> DevId {
        s.to_string()
    }

    fn change(hash: &str, t: i64, entity: &str, who: &str, lines: u32) -> OrderedEntityChange {
        OrderedEntityChange {
            commit_time: t,
            hash: hash.into(),
            path: "a.c".into(),
            entity: entity.into(),
            dev: dev(who),
            lines,
        }
    }

    #[test]
    fn single_developer_yields_no_edges() {
        let changes = vec![change("c1", 1, "foo", "A", 3), change("c2", 2, "foo", "A", 2)];
        let net = build_temporal_entity_network(&changes, 0, WeightScheme::CountPerPriorDev);
        assert!(net.edges.is_empty());
        assert_eq!(net.nodes.len(), 1);
    }

    #[test]
    fn edit_after_other_developer_creates_directed_edge() {
        let changes = vec![change("c1", 1, "foo", "A", 3), change("c2", 2, "foo", "B", 7)];
        let net = build_temporal_entity_network(&changes, 0, WeightScheme::CountPerPriorDev);
        assert_eq!(net.edges.len(), 1);
        let e = &net.edges[0];
        assert_eq!((e.src.as_str(), e.dst.as_str()), ("B", "A"));
        assert_eq!(e.weight, 7.0);
    }

    #[test]
    fn weight_schemes_diverge_with_multiple_prior_devs() {
        let changes = vec![
            change("c1", 1, "e", "A", 2),
            change("c2", 2, "e", "B", 4),
            change("c3", 3, "e", "C", 5),
        ];
        let per_prior =
            build_temporal_entity_network(&changes, 0, WeightScheme::CountPerPriorDev);
        let mut got: Vec<(String, String, f64)> = per_prior
            .edges
            .iter()
            .filter(|e| e.src == "C")
            .map(|e| (e.src.clone(), e.dst.clone(), e.weight))
            .collect();
        got.sort_by(|a, b| a.1.cmp(&b.1));
        assert_eq!(
            got,
            vec![
                ("C".to_string(), "A".to_string(), 5.0),
                ("C".to_string(), "B".to_string(), 5.0),
            ]
        );
        let once = build_temporal_entity_network(&changes, 0, WeightScheme::CountOnce);
        let c_edges: Vec<&Edge> = once.edges.iter().filter(|e| e.src == "C").collect();
        assert_eq!(c_edges.len(), 1);
        assert_eq!(c_edges[0].dst, "B"); // most recent prior contributor
        assert_eq!(c_edges[0].weight, 5.0);
    }

    #[test]
    fn temporal_edges_respect_window_order() {
        // A edits after B's commit but the entity differs: no edge
        let changes = vec![change("c1", 1, "foo", "A", 1), change("c2", 2, "bar", "B", 1)];
        let net = build_temporal_entity_network(&changes, 0, WeightScheme::CountPerPriorDev);
        assert!(net.edges.is_empty());
    }

    fn line_mod(t: i64, hash: &str, who: &str, owner: Option<&str>) -> LineModification {
        LineModification {
            commit_time: t,
            hash: hash.into(),
            path: "a.c".into(),
            modifier: dev(who),
            owner: owner.map(dev),
        }
    }

    #[test]
    fn ownership_network_keeps_parallel_edges() {
        let mods = vec![
            line_mod(1, "c1", "A", Some("B")),
            line_mod(1, "c1", "A", Some("B")),
            line_mod(1, "c1", "A", Some("B")),
        ];
        let net = build_line_ownership_network(&mods, 0);
        assert_eq!(net.edges.len(), 3);
        assert!(net.edges.iter().all(|e| e.src == "A" && e.dst == "B"));
    }

    #[test]
    fn self_owned_and_unowned_lines_create_no_edges() {
        let mods = vec![
            line_mod(1, "c1", "A", Some("A")),
            line_mod(1, "c1", "A", None),
        ];
        let net = build_line_ownership_network(&mods, 0);
        assert!(net.edges.is_empty());
        assert_eq!(net.nodes.len(), 1);
    }

    #[test]
    fn ownership_mixed_owners() {
        let mods = vec![
            line_mod(1, "c1", "A", Some("B")),
            line_mod(1, "c1", "A", Some("B")),
            line_mod(1, "c1", "A", Some("C")),
        ];
        let net = build_line_ownership_network(&mods, 0);
        let to_b = net.edges.iter().filter(|e| e.dst == "B").count();
        let to_c = net.edges.iter().filter(|e| e.dst == "C").count();
        assert_eq!((to_b, to_c), (2, 1));
    }

    #[test]
    fn bipartite_projection_weights_by_min_changes() {
        let changes: Vec<(DevId, String)> = [
            ("A", "f"), ("A", "f"), ("A", "f"),
            ("B", "f"), ("B", "f"),
            ("A", "g"), ("C", "h"),
        ]
        .iter()
        .map(|(d, p)| (dev(d), p.to_string()))
        .collect();
        let net = build_bipartite_projection(&changes, 0);
        assert!(!net.directed);
        assert_eq!(net.edges.len(), 1);
        assert_eq!(net.edges[0].weight, 2.0); // min(3, 2)
        // C shares no file with anyone
        assert!(net.edges.iter().all(|e| e.src != "C" && e.dst != "C"));
    }

    fn triangle() -> DevNetwork {
        DevNetwork {
            window: 0,
            nodes: ["A", "B", "C"].iter().map(|s| dev(s)).collect(),
            edges: vec![
                Edge { src: dev("A"), dst: dev("B"), weight: 1.0, multiplicity: 1 },
                Edge { src: dev("B"), dst: dev("C"), weight: 1.0, multiplicity: 1 },
                Edge { src: dev("C"), dst: dev("A"), weight: 1.0, multiplicity: 1 },
            ],
            directed: false,
            variant: NetworkVariant::BipartiteProjection,
        }
    }

    #[test]
    fn k3_centrality_is_symmetric() {
        let metrics = node_metrics(&triangle()).unwrap();
        let expected = 1.0 / 3.0f64.sqrt();
        for m in &metrics {
            assert!((m.evcent - expected).abs() < 1e-9, "evcent {}", m.evcent);
            assert_eq!(m.clustering, Some(1.0));
            assert!((m.hierarchy - 0.0).abs() < 1e-12);
        }
    }

    #[test]
    fn star_center_clusters_at_zero_leaves_absent() {
        let mut edges = Vec::new();
        for leaf in ["B", "C", "D"] {
            edges.push(Edge { src: dev("A"), dst: dev(leaf), weight: 1.0, multiplicity: 1 });
        }
        let net = DevNetwork {
            window: 0,
            nodes: ["A", "B", "C", "D"].iter().map(|s| dev(s)).collect(),
            edges,
            directed: false,
            variant: NetworkVariant::BipartiteProjection,
        };
        let metrics = node_metrics(&net).unwrap();
        let center = metrics.iter().find(|m| m.dev == "A").unwrap();
        assert_eq!(center.clustering, Some(0.0));
        assert_eq!(center.degree, 3);
        assert!((center.hierarchy - 3.0).abs() < 1e-12);
        for leaf in metrics.iter().filter(|m| m.dev != "A") {
            assert_eq!(leaf.clustering, None);
            assert!((leaf.hierarchy - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn graph_metrics_on_small_graphs() {
        let gm = graph_metrics(&triangle()).unwrap();
        assert_eq!(gm.n_nodes, 3);
        assert_eq!(gm.n_edges, 3);
        assert!((gm.density - 1.0).abs() < 1e-12);
        assert_eq!(gm.diameter, 1);
        assert!((gm.global_clustering - 1.0).abs() < 1e-12);
        assert_eq!(gm.mean_in_degree, None);

        let path = DevNetwork {
            window: 0,
            nodes: ["A", "B", "C"].iter().map(|s| dev(s)).collect(),
            edges: vec![
                Edge { src: dev("A"), dst: dev("B"), weight: 1.0, multiplicity: 1 },
                Edge { src: dev("B"), dst: dev("C"), weight: 1.0, multiplicity: 1 },
            ],
            directed: false,
            variant: NetworkVariant::BipartiteProjection,
        };
        let gm = graph_metrics(&path).unwrap();
        assert!((gm.density - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(gm.diameter, 2);
    }

    #[test]
    fn parallel_edges_preserved_in_edge_count_not_density() {
        let edges = vec![
            Edge { src: dev("A"), dst: dev("B"), weight: 1.0, multiplicity: 1 };
            5
        ];
        let net = DevNetwork {
            window: 0,
            nodes: ["A", "B"].iter().map(|s| dev(s)).collect(),
            edges,
            directed: true,
            variant: NetworkVariant::LineOwnership,
        };
        let gm = graph_metrics(&net).unwrap();
        assert_eq!(gm.n_edges, 5);
        assert!((gm.density - 1.0).abs() < 1e-12);
        assert_eq!(gm.mean_in_degree, Some(2.5)); // 5 incoming / 2 nodes
    }

    #[test]
    fn fmodr_examples() {
        // 10 known-owner modifications, 4 foreign
        let mut mods = Vec::new();
        for _ in 0..6 {
            mods.push(line_mod(1, "c", "D", Some("D")));
        }
        for _ in 0..4 {
            mods.push(line_mod(1, "c", "D", Some("E")));
        }
        let (ratios, mean) = foreign_modification_ratio(&mods);
        assert!((ratios["D"] - 0.4).abs() < 1e-12);
        assert_eq!(mean, Some(0.4));

        // sole developer
        let solo = vec![line_mod(1, "c", "A", Some("A"))];
        let (ratios, _) = foreign_modification_ratio(&solo);
        assert_eq!(ratios["A"], 0.0);

        // only fresh additions: excluded entirely
        let fresh = vec![line_mod(1, "c", "A", None)];
        let (ratios, mean) = foreign_modification_ratio(&fresh);
        assert!(ratios.is_empty());
        assert_eq!(mean, None);
    }

    /// Dense 512-iteration baseline on the shifted matrix, written as an
    /// independent oracle over a plain adjacency matrix.
    fn dense_evcent_oracle(adj: &[Vec<f64>]) -> Vec<f64> {
        let n = adj.len();
        let mut x = vec![1.0 / (n as f64).sqrt(); n];
        for _ in 0..512 {
            let mut next = vec![0.0; n];
            for i in 0..n {
                next[i] = x[i];
                for j in 0..n {
                    next[i] += adj[i][j] * x[j];
                }
            }
            let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return x;
            }
            for v in next.iter_mut() {
                *v /= norm;
            }
            x = next;
        }
        x
    }

    fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        1.0 - dot / (na * nb)
    }

    fn random_net(seed: u64) -> (DevNetwork, Vec<Vec<f64>>) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=7usize);
        let names: Vec<DevId> = (0..n).map(|i| format!("d{i}")).collect();
        let mut adj = vec![vec![0.0; n]; n];
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random_range(0.0..1.0) < 0.55 {
                    let w = rng.random_range(1..9) as f64;
                    adj[i][j] = w;
                    adj[j][i] = w;
                    edges.push(Edge {
                        src: names[i].clone(),
                        dst: names[j].clone(),
                        weight: w,
                        multiplicity: 1,
                    });
                }
            }
        }
        let net = DevNetwork {
            window: 0,
            nodes: names.into_iter().collect(),
            edges,
            directed: false,
            variant: NetworkVariant::BipartiteProjection,
        };
        (net, adj)
    }

    #[test]
    fn evcent_matches_dense_oracle_on_seeded_graphs() {
        for seed in 0..200u64 {
            let (net, mut adj) = random_net(seed);
            let metrics = node_metrics(&net).unwrap();
            // oracle runs on the same normalization the implementation uses
            let max_strength = adj
                .iter()
                .map(|row| row.iter().sum::<f64>())
                .fold(0.0f64, f64::max);
            if max_strength > 0.0 {
                for row in adj.iter_mut() {
                    for v in row.iter_mut() {
                        *v /= max_strength;
                    }
                }
            }
            let oracle = dense_evcent_oracle(&adj);
            let ours: Vec<f64> = metrics.iter().map(|m| m.evcent).collect();
            let d = cosine_distance(&ours, &oracle);
            assert!(d < 1e-8, "seed {seed}: cosine distance {d}");
        }
    }

    #[test]
    fn weight_scaling_leaves_metrics_invariant() {
        for seed in [3u64, 17, 99] {
            let (net, _) = random_net(seed);
            let mut scaled = net.clone();
            for e in scaled.edges.iter_mut() {
                e.weight *= 37.5;
            }
            let m1 = node_metrics(&net).unwrap();
            let m2 = node_metrics(&scaled).unwrap();
            for (a, b) in m1.iter().zip(&m2) {
                assert!((a.evcent - b.evcent).abs() < 1e-7);
                assert_eq!(a.clustering, b.clustering);
                assert_eq!(a.degree, b.degree);
            }
        }
    }

    proptest! {
        #[test]
        fn count_per_prior_weight_dominates_count_once(
            seq in proptest::collection::vec((0u8..4, 0u8..3, 1u32..9), 1..30)
        ) {
            let changes: Vec<OrderedEntityChange> = seq.iter().enumerate().map(|(i, (d, e, l))| {
                OrderedEntityChange {
                    commit_time: i as i64,
                    hash: format!("c{i}"),
                    path: "p".into(),
                    entity: format!("e{e}"),
                    dev: format!("d{d}"),
                    lines: *l,
                }
            }).collect();
            let per = build_temporal_entity_network(&changes, 0, WeightScheme::CountPerPriorDev);
            let once = build_temporal_entity_network(&changes, 0, WeightScheme::CountOnce);
            let total = |n: &DevNetwork| n.edges.iter().map(|e| e.weight).sum::<f64>();
            prop_assert!(total(&per) >= total(&once) - 1e-9);
        }

        #[test]
        fn bipartite_weight_symmetry(
            seq in proptest::collection::vec((0u8..5, 0u8..4), 1..40)
        ) {
            let changes: Vec<(DevId, String)> = seq.iter()
                .map(|(d, f)| (format!("d{d}"), format!("f{f}")))
                .collect();
            let net = build_bipartite_projection(&changes, 0);
            // each undirected pair appears exactly once
            let mut seen = std::collections::BTreeSet::new();
            for e in &net.edges {
                prop_assert!(e.weight > 0.0);
                let key = if e.src < e.dst {
                    (e.src.clone(), e.dst.clone())
                } else {
                    (e.dst.clone(), e.src.clone())
                };
                prop_assert!(seen.insert(key));
            }
        }
    }
}
