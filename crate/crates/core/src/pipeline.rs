//! Orchestration: extract -> analyze -> compare, emitting a deterministic
//! artifact tree (facts/, networks/, studies/, compare/, report.md).
//!
//! Extraction is shared between variants with the same traversal mode.
//! Reruns with unchanged inputs are byte-identical: no clocks, no unordered
//! iteration, all randomness derived from the configured seed.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::agreement::{
    self, AgreementVerdict, BaselineMetric, SignificanceLabel, VariantBaseline, VariantSummary,
};
use crate::config::{ConfigError, FilterOrder, ResolvedConfig, ResolvedVariant, StudyKind};
use crate::csvio::{fmt_f64, metadata_lines, write_csv};
use crate::entities::{
    detect_entities_declared, map_changes_to_entities, EntityChange, EntityKind, EntitySpan,
    Language,
};
use crate::gitio::{
    apply_file_filters, BranchMode, CommitRecord, CompiledFilters, FileChange, FileDiff, GitError,
    GitRepo, EMPTY_TREE,
};
use crate::identity::{
    canonicalize, fnv1a64, CanonicalDeveloper, DevId, IdentityPartition, IdentityScope,
    RawIdentity,
};
use crate::network::{
    build_bipartite_projection, build_line_ownership_network, build_temporal_entity_network,
    foreign_modification_ratio, graph_metrics, node_metrics, DevNetwork, LineModification,
    NetworkVariant, NodeMetrics, OrderedEntityChange,
};
use crate::stats::Significance;
use crate::studies::brooks::{
    correlation_matrix, fit_models, transformed_table, BrooksModel, ModelForm, ProductivityTarget,
    WindowProductivity,
};
use crate::studies::halstead::{halstead_effort, lex_tokens};
use crate::studies::roles::{
    agreement_matrix, classify_core, cross_variant_agreement, hierarchy_embedding, AgreementCell,
    HierarchyRow, NamedClassification, RoleClassification, RoleMetric,
};
use crate::studies::turnover::{
    bug_density, group_activity, turnover_quality_correlation, CorrelationOutcome, GroupActivity,
    ModuleMap, PeriodActivity,
};
use crate::svg::{line_chart, scatter_chart};
use crate::windows::{assign, format_iso8601, split_windows, LengthSpec, TimeWindow};

#[derive(Debug, Error)]
pub enum RunError {
    /// Exit code 2.
    #[error("config error: {0}")]
    Config(String),
    /// Exit code 3.
    #[error("repository error: {0}")]
    Repository(String),
    /// Exit code 1, with the failing stage named.
    #[error("analysis failure in stage {stage}: {message}")]
    Analysis { stage: String, message: String },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Repository(_) => 3,
            RunError::Analysis { .. } => 1,
        }
    }

    fn analysis(stage: &str, message: impl std::fmt::Display) -> RunError {
        RunError::Analysis {
            stage: stage.to_string(),
            message: message.to_string(),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e.to_string())
    }
}

fn git_error(stage: &str, e: GitError) -> RunError {
    match e {
        GitError::NotARepository(_) | GitError::UnknownBranch(_) | GitError::GitMissing { .. } => {
            RunError::Repository(e.to_string())
        }
        other => RunError::analysis(stage, other),
    }
}

fn io_error(stage: &str, e: std::io::Error) -> RunError {
    RunError::analysis(stage, e)
}

/// Which pipeline stages a subcommand requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Extract,
    Networks,
    Roles,
    Brooks,
    Turnover,
    Compare,
    Report,
}

pub struct RunOptions {
    pub out_dir: PathBuf,
    pub jobs: usize,
    pub seed_override: Option<u64>,
}

#[derive(Debug)]
pub struct RunSummary {
    pub log: Vec<String>,
    pub verdicts: Vec<AgreementVerdict>,
}

struct Plan {
    networks: bool,
    roles: bool,
    brooks: bool,
    turnover: bool,
    compare: bool,
    report: bool,
}

impl Plan {
    fn for_stage(stage: Stage, studies: &[StudyKind]) -> Plan {
        let has = |k: StudyKind| studies.contains(&k);
        match stage {
            Stage::Extract => Plan {
                networks: false,
                roles: false,
                brooks: false,
                turnover: false,
                compare: false,
                report: false,
            },
            Stage::Networks => Plan {
                networks: true,
                roles: false,
                brooks: false,
                turnover: false,
                compare: false,
                report: false,
            },
            Stage::Roles => Plan {
                networks: true,
                roles: true,
                brooks: false,
                turnover: false,
                compare: false,
                report: false,
            },
            Stage::Brooks => Plan {
                networks: false,
                roles: false,
                brooks: true,
                turnover: false,
                compare: false,
                report: false,
            },
            Stage::Turnover => Plan {
                networks: false,
                roles: false,
                brooks: false,
                turnover: true,
                compare: false,
                report: false,
            },
            Stage::Compare | Stage::Report => Plan {
                networks: true,
                roles: has(StudyKind::Roles),
                brooks: has(StudyKind::Brooks),
                turnover: has(StudyKind::Turnover),
                compare: true,
                report: true,
            },
        }
    }
}

// === shared raw extraction ===

/// Everything variant-independent we pull out of git for one traversal mode.
struct RawExtraction {
    commits: Vec<CommitRecord>,
    changes: Vec<FileChange>,
    details: BTreeMap<String, CommitDetail>,
}

struct CommitDetail {
    files: Vec<FileDetail>,
}

struct FileDetail {
    path: String,
    is_binary: bool,
    language: Language,
    added_lines: Vec<u32>,
    deleted_only_lines: Vec<u32>,
    added_text: String,
    deleted_text: String,
    /// Pre-image owners of every deleted line, in deleted-line order.
    deleted_owners: Vec<Option<RawIdentity>>,
    /// Declared structures on the post image (fallback span for unsupported).
    post_spans: Vec<EntitySpan>,
    /// Declared structures on the pre image (only for deletion-only hunks).
    pre_spans: Vec<EntitySpan>,
}

fn build_extraction(repo: &GitRepo, mode: &BranchMode) -> Result<RawExtraction, RunError> {
    let (commits, changes) = repo
        .extract_commits(mode)
        .map_err(|e| git_error("extract", e))?;

    let detail_results: Vec<Result<(String, CommitDetail), RunError>> = commits
        .par_iter()
        .map(|commit| {
            let parent = commit.parents.first().map(|s| s.as_str()).unwrap_or(EMPTY_TREE);
            let diffs = repo
                .commit_diff(parent, &commit.hash)
                .map_err(|e| git_error("extract", e))?;
            let mut files = Vec::new();
            for diff in diffs {
                files.push(build_file_detail(repo, parent, &commit.hash, diff)?);
            }
            files.sort_by(|a, b| a.path.cmp(&b.path));
            Ok((commit.hash.clone(), CommitDetail { files }))
        })
        .collect();
    let mut details = BTreeMap::new();
    for result in detail_results {
        let (hash, detail) = result?;
        details.insert(hash, detail);
    }
    Ok(RawExtraction {
        commits,
        changes,
        details,
    })
}

fn build_file_detail(
    repo: &GitRepo,
    parent: &str,
    commit: &str,
    diff: FileDiff,
) -> Result<FileDetail, RunError> {
    let path = diff.path().to_string();
    let language = Language::from_path(&path);
    let mut deleted_owners = vec![None; diff.deleted_lines.len()];
    if !diff.is_binary && !diff.deleted_lines.is_empty() && parent != EMPTY_TREE {
        let pre_path = diff.old_path.as_deref().unwrap_or(&path);
        if let Ok(blame) = repo.blame_at(parent, pre_path) {
            let by_line: BTreeMap<u32, &RawIdentity> =
                blame.iter().map(|l| (l.line_no, &l.owner_dev)).collect();
            for (slot, line) in diff.deleted_lines.iter().enumerate() {
                deleted_owners[slot] = by_line.get(line).map(|raw| (*raw).clone());
            }
        }
    }
    let post_spans = if !diff.is_binary && !diff.added_lines.is_empty() {
        match repo.file_at(commit, &path) {
            Some(text) => detect_entities_declared(&text, language),
            None => Vec::new(),
        }
    } else {
        Vec::new()
    };
    let pre_spans = if !diff.is_binary && !diff.deleted_only_lines.is_empty() && parent != EMPTY_TREE
    {
        let pre_path = diff.old_path.as_deref().unwrap_or(&path);
        match repo.file_at(parent, pre_path) {
            Some(text) => detect_entities_declared(&text, language),
            None => Vec::new(),
        }
    } else {
        Vec::new()
    };
    Ok(FileDetail {
        path,
        is_binary: diff.is_binary,
        language,
        added_lines: diff.added_lines,
        deleted_only_lines: diff.deleted_only_lines,
        added_text: diff.added_text,
        deleted_text: diff.deleted_text,
        deleted_owners,
        post_spans,
        pre_spans,
    })
}

// === per-variant analysis ===

struct EntityRecord {
    change: EntityChange,
    author_time: i64,
    commit_time: i64,
}

struct ModRecord {
    modification: LineModification,
    author_time: i64,
}

struct VariantData<'a> {
    variant: &'a ResolvedVariant,
    flat: BTreeMap<String, String>,
    raw: &'a RawExtraction,
    partition: IdentityPartition,
    dev_of_commit: BTreeMap<String, DevId>,
    stored_changes: Vec<FileChange>,
    filters: CompiledFilters,
    windows: Vec<TimeWindow>,
    origin: Option<i64>,
    range_end: Option<i64>,
    entity_records: Vec<EntityRecord>,
    line_mods: Vec<ModRecord>,
    networks: BTreeMap<usize, DevNetwork>,
    metrics: BTreeMap<usize, Vec<NodeMetrics>>,
    baseline: VariantBaseline,
    roles: Option<RolesOutput>,
    brooks: Option<BrooksOutput>,
    turnover: Option<TurnoverOutput>,
}

struct RolesOutput {
    agreement_recent: Vec<AgreementCell>,
    agreement_all: Vec<AgreementCell>,
    named: Vec<NamedClassification>,
    hierarchy_rows: Vec<HierarchyRow>,
    slopes: Vec<(usize, Option<f64>, usize)>,
    notes: Vec<String>,
}

struct BrooksOutput {
    rows: Vec<WindowProductivity>,
    correlation: Option<(Vec<String>, Vec<Vec<f64>>)>,
    models: Vec<BrooksModel>,
    notes: Vec<String>,
}

struct ActivityRow {
    period: usize,
    module: String,
    groups: GroupActivity,
    bugfixes: u64,
    loc: u64,
    density: Option<f64>,
}

struct TurnoverOutput {
    activity_rows: Vec<ActivityRow>,
    ci_rows: Vec<(String, CorrelationOutcome, usize, u64)>,
    loc_source: String,
    notes: Vec<String>,
}

pub(crate) fn derive_seed(base: u64, label: &str) -> u64 {
    base ^ fnv1a64(label.as_bytes())
}

fn collect_identities(commits: &[CommitRecord], scope: IdentityScope) -> BTreeSet<RawIdentity> {
    let mut set = BTreeSet::new();
    for c in commits {
        set.insert(c.author());
        if scope == IdentityScope::AuthorAndCommitter {
            set.insert(c.committer());
        }
    }
    set
}

fn analyze_variant<'a>(
    project: &str,
    variant: &'a ResolvedVariant,
    raw: &'a RawExtraction,
    plan: &Plan,
    repo: &GitRepo,
    log: &mut Vec<String>,
) -> Result<VariantData<'a>, RunError> {
    let filters = variant
        .filters
        .compile()
        .map_err(|e| RunError::Config(e.to_string()))?;

    let identities = collect_identities(&raw.commits, variant.identity_scope);
    let partition = canonicalize(&identities, &variant.identity_mode);
    let dev_of_commit: BTreeMap<String, DevId> = raw
        .commits
        .iter()
        .map(|c| {
            let dev = partition
                .resolve(&c.author())
                .map(|d| d.id.clone())
                .unwrap_or_else(|| partition.resolve_or_external(&c.author()));
            (c.hash.clone(), dev)
        })
        .collect();

    let stored_changes = match variant.filter_order {
        FilterOrder::BeforeStore => apply_file_filters(&raw.changes, &filters),
        FilterOrder::AtAnalysis => raw.changes.clone(),
    };

    // windows over the author-time range
    let origin = variant
        .window_origin
        .or_else(|| raw.commits.iter().map(|c| c.author_time).min());
    let range_end = raw.commits.iter().map(|c| c.author_time).max().map(|t| t + 1);
    let windows = match (origin, range_end) {
        (Some(start), Some(end)) if start < end => {
            split_windows(start, end, variant.window_length, variant.window_overlap)
                .map_err(|e| RunError::analysis("windows", e))?
        }
        _ => Vec::new(),
    };

    // entity records and line modifications per commit over kept files
    let mut entity_records = Vec::new();
    let mut line_mods = Vec::new();
    for commit in &raw.commits {
        let Some(detail) = raw.details.get(&commit.hash) else {
            continue;
        };
        let dev = dev_of_commit[&commit.hash].clone();
        for file in &detail.files {
            if file.is_binary || !filters.keeps(&file.path) {
                continue;
            }
            // entity attribution: post-image lines against post spans,
            // deletion-only hunks against pre spans
            if !(file.language == Language::Unsupported && !variant.file_fallback) {
                let mut records = map_changes_to_entities(
                    &commit.hash,
                    &file.path,
                    &dev,
                    &file.added_lines,
                    &file.post_spans,
                    variant.entity_mode,
                    variant.entity_gap,
                    variant.file_fallback,
                );
                let post_blocks = records
                    .iter()
                    .filter_map(|r| r.block_index)
                    .max()
                    .map(|i| i + 1)
                    .unwrap_or(0);
                let mut pre_records = map_changes_to_entities(
                    &commit.hash,
                    &file.path,
                    &dev,
                    &file.deleted_only_lines,
                    &file.pre_spans,
                    variant.entity_mode,
                    variant.entity_gap,
                    variant.file_fallback,
                );
                for r in pre_records.iter_mut() {
                    if let Some(i) = r.block_index.as_mut() {
                        *i += post_blocks;
                    }
                }
                records.append(&mut pre_records);
                entity_records.extend(records.into_iter().map(|change| EntityRecord {
                    change,
                    author_time: commit.author_time,
                    commit_time: commit.commit_time,
                }));
            }
            for owner in &file.deleted_owners {
                line_mods.push(ModRecord {
                    modification: LineModification {
                        commit_time: commit.commit_time,
                        hash: commit.hash.clone(),
                        path: file.path.clone(),
                        modifier: dev.clone(),
                        owner: owner
                            .as_ref()
                            .map(|raw| partition.resolve_or_external(raw)),
                    },
                    author_time: commit.author_time,
                });
            }
        }
    }

    // per-window networks over the variant windows
    let mut networks = BTreeMap::new();
    let mut metrics = BTreeMap::new();
    if plan.networks || plan.roles {
        for w in &windows {
            let net = build_window_network(
                variant,
                w.index,
                (w.start, w.end),
                &raw.commits,
                &dev_of_commit,
                &entity_records,
                &line_mods,
                &stored_changes,
                &filters,
            );
            if let Ok(m) = node_metrics(&net) {
                metrics.insert(w.index, m);
            }
            networks.insert(w.index, net);
        }
    }

    // baseline series
    let mut counts: BTreeMap<usize, BTreeMap<BaselineMetric, f64>> = BTreeMap::new();
    for w in &windows {
        let in_window = |t: i64| w.contains(t);
        let commits_n = raw
            .commits
            .iter()
            .filter(|c| in_window(c.author_time))
            .count();
        if commits_n == 0 {
            continue;
        }
        let commit_times: BTreeMap<&str, i64> = raw
            .commits
            .iter()
            .map(|c| (c.hash.as_str(), c.author_time))
            .collect();
        let files: BTreeSet<&str> = stored_changes
            .iter()
            .filter(|c| commit_times.get(c.commit.as_str()).is_some_and(|t| in_window(*t)))
            .map(|c| c.path.as_str())
            .collect();
        let devs: BTreeSet<&DevId> = raw
            .commits
            .iter()
            .filter(|c| in_window(c.author_time))
            .map(|c| &dev_of_commit[&c.hash])
            .collect();
        let blocks = entity_records
            .iter()
            .filter(|r| in_window(r.author_time))
            .count();
        counts.insert(
            w.index,
            [
                (BaselineMetric::Commits, commits_n as f64),
                (BaselineMetric::Files, files.len() as f64),
                (BaselineMetric::Developers, devs.len() as f64),
                (BaselineMetric::EntityBlocks, blocks as f64),
            ]
            .into_iter()
            .collect(),
        );
    }
    let baseline = VariantBaseline {
        variant: variant.name.clone(),
        boundaries: windows.iter().map(|w| (w.start, w.end)).collect(),
        counts,
    };

    let mut data = VariantData {
        variant,
        flat: variant.flatten(),
        raw,
        partition,
        dev_of_commit,
        stored_changes,
        filters,
        windows,
        origin,
        range_end,
        entity_records,
        line_mods,
        networks,
        metrics,
        baseline,
        roles: None,
        brooks: None,
        turnover: None,
    };

    if plan.roles {
        data.roles = Some(run_roles_study(&data, log));
    }
    if plan.brooks {
        data.brooks = Some(run_brooks_study(project, &data, repo, log)?);
    }
    if plan.turnover {
        data.turnover = Some(run_turnover_study(project, &data, repo, log)?);
    }
    Ok(data)
}

#[allow(clippy::too_many_arguments)]
fn build_window_network(
    variant: &ResolvedVariant,
    window: usize,
    bounds: (i64, i64),
    commits: &[CommitRecord],
    dev_of_commit: &BTreeMap<String, DevId>,
    entity_records: &[EntityRecord],
    line_mods: &[ModRecord],
    stored_changes: &[FileChange],
    filters: &CompiledFilters,
) -> DevNetwork {
    let in_window = |t: i64| bounds.0 <= t && t < bounds.1;
    let mut net = match variant.network_variant {
        NetworkVariant::TemporalEntity => {
            let changes: Vec<OrderedEntityChange> = entity_records
                .iter()
                .filter(|r| in_window(r.author_time))
                .map(|r| OrderedEntityChange {
                    commit_time: r.commit_time,
                    hash: r.change.commit.clone(),
                    path: r.change.path.clone(),
                    entity: r.change.entity_name.clone(),
                    dev: r.change.dev.clone(),
                    lines: r.change.lines_changed,
                })
                .collect();
            build_temporal_entity_network(&changes, window, variant.weight_scheme)
        }
        NetworkVariant::LineOwnership => {
            let mods: Vec<LineModification> = line_mods
                .iter()
                .filter(|m| in_window(m.author_time))
                .map(|m| m.modification.clone())
                .collect();
            build_line_ownership_network(&mods, window)
        }
        NetworkVariant::BipartiteProjection => {
            let commit_times: BTreeMap<&str, i64> = commits
                .iter()
                .map(|c| (c.hash.as_str(), c.author_time))
                .collect();
            let changes: Vec<(DevId, String)> = stored_changes
                .iter()
                .filter(|c| {
                    filters.keeps(&c.path)
                        && commit_times
                            .get(c.commit.as_str())
                            .is_some_and(|t| in_window(*t))
                })
                .map(|c| (dev_of_commit[&c.commit].clone(), c.path.clone()))
                .collect();
            build_bipartite_projection(&changes, window)
        }
    };
    // active authors participate as nodes even without edges
    for c in commits.iter().filter(|c| in_window(c.author_time)) {
        net.nodes.insert(dev_of_commit[&c.hash].clone());
    }
    net
}

// === study drivers ===

fn run_roles_study(data: &VariantData, log: &mut Vec<String>) -> RolesOutput {
    let mut per_window: Vec<BTreeMap<RoleMetric, RoleClassification>> = Vec::new();
    let mut named = Vec::new();
    let mut hierarchy_rows = Vec::new();
    let mut slopes = Vec::new();
    let mut notes = Vec::new();

    let display_of: BTreeMap<&DevId, &str> = data
        .partition
        .developers
        .iter()
        .map(|d: &CanonicalDeveloper| (&d.id, d.display_name.as_str()))
        .collect();
    let commit_times: BTreeMap<&str, i64> = data
        .raw
        .commits
        .iter()
        .map(|c| (c.hash.as_str(), c.author_time))
        .collect();

    for w in &data.windows {
        // count metrics over kept changes; universe = active authors + nodes
        let mut commit_count: BTreeMap<DevId, f64> = BTreeMap::new();
        for c in data.raw.commits.iter().filter(|c| w.contains(c.author_time)) {
            *commit_count
                .entry(data.dev_of_commit[&c.hash].clone())
                .or_insert(0.0) += 1.0;
        }
        if commit_count.is_empty() {
            per_window.push(BTreeMap::new());
            continue;
        }
        let mut loc: BTreeMap<DevId, f64> = BTreeMap::new();
        for ch in data
            .stored_changes
            .iter()
            .filter(|c| data.filters.keeps(&c.path))
            .filter(|c| commit_times.get(c.commit.as_str()).is_some_and(|t| w.contains(*t)))
        {
            *loc.entry(data.dev_of_commit[&ch.commit].clone()).or_insert(0.0) +=
                ch.churn() as f64;
        }
        let mut universe: BTreeSet<DevId> = commit_count.keys().cloned().collect();
        let window_metrics = data.metrics.get(&w.index);
        if let Some(ms) = window_metrics {
            universe.extend(ms.iter().map(|m| m.dev.clone()));
        }
        let fill = |values: BTreeMap<DevId, f64>| -> BTreeMap<DevId, f64> {
            universe
                .iter()
                .map(|d| (d.clone(), values.get(d).copied().unwrap_or(0.0)))
                .collect()
        };
        let mut value_maps: BTreeMap<RoleMetric, BTreeMap<DevId, f64>> = BTreeMap::new();
        value_maps.insert(RoleMetric::Commits, fill(commit_count));
        value_maps.insert(RoleMetric::Loc, fill(loc));
        let mut degree = BTreeMap::new();
        let mut evcent = BTreeMap::new();
        let mut hierarchy = BTreeMap::new();
        if let Some(ms) = window_metrics {
            for m in ms {
                degree.insert(m.dev.clone(), m.degree as f64);
                evcent.insert(m.dev.clone(), m.evcent);
                hierarchy.insert(m.dev.clone(), m.hierarchy);
            }
        }
        value_maps.insert(RoleMetric::Degree, fill(degree));
        value_maps.insert(RoleMetric::Evcent, fill(evcent));
        value_maps.insert(RoleMetric::Hierarchy, fill(hierarchy));

        let mut class_map = BTreeMap::new();
        for (metric, values) in value_maps {
            match classify_core(&values, data.variant.roles_threshold) {
                Ok(core) => {
                    let classification = RoleClassification {
                        window: w.index,
                        metric,
                        core: core.clone(),
                        universe: universe.clone(),
                    };
                    named.push(NamedClassification {
                        window: w.index,
                        metric,
                        core: core
                            .iter()
                            .map(|d| display_of.get(d).map(|s| s.to_string()).unwrap_or_else(|| d.clone()))
                            .collect(),
                        universe: universe
                            .iter()
                            .map(|d| display_of.get(d).map(|s| s.to_string()).unwrap_or_else(|| d.clone()))
                            .collect(),
                    });
                    class_map.insert(metric, classification);
                }
                Err(e) => {
                    log.push(format!(
                        "[roles:{}] window {} metric {} skipped: {}",
                        data.variant.name,
                        w.index,
                        metric.label(),
                        e
                    ));
                }
            }
        }

        // hierarchical embedding, role column from the commit-count
        // classification (count metrics are the paper's baseline reading)
        if let (Some(ms), Some(classification)) =
            (window_metrics, class_map.get(&RoleMetric::Commits))
        {
            let (rows, slope) = hierarchy_embedding(w.index, ms, classification);
            let n = rows.len();
            hierarchy_rows.extend(rows);
            slopes.push((w.index, slope, n));
        }
        per_window.push(class_map);
    }

    // averaging span: most recent 12 months of windows, plus all windows
    let recent_cutoff = data
        .range_end
        .map(|end| shift_months(end, -(data.variant.roles_averaging_months as i64)));
    let recent: Vec<BTreeMap<RoleMetric, RoleClassification>> = data
        .windows
        .iter()
        .zip(per_window.iter())
        .filter(|(w, _)| recent_cutoff.map(|c| w.start >= c).unwrap_or(true))
        .map(|(_, m)| m.clone())
        .collect();

    let agreement_all = match agreement_matrix(&per_window) {
        Ok(cells) => cells,
        Err(e) => {
            notes.push(format!("agreement undefined over all windows: {e}"));
            Vec::new()
        }
    };
    let agreement_recent = match agreement_matrix(&recent) {
        Ok(cells) => cells,
        Err(e) => {
            notes.push(format!("agreement undefined over recent windows: {e}"));
            Vec::new()
        }
    };
    notes.push(format!(
        "core cutoff rule: cumulative {}% prefix (not stated by the original; configured default)",
        data.variant.roles_threshold * 100.0
    ));
    RolesOutput {
        agreement_recent,
        agreement_all,
        named,
        hierarchy_rows,
        slopes,
        notes,
    }
}

fn shift_months(t: i64, months: i64) -> i64 {
    use chrono::{Months, TimeZone, Utc};
    let dt = match Utc.timestamp_opt(t, 0).single() {
        Some(dt) => dt,
        None => return t,
    };
    let shifted = if months >= 0 {
        dt.checked_add_months(Months::new(months as u32))
    } else {
        dt.checked_sub_months(Months::new((-months) as u32))
    };
    shifted.map(|d| d.timestamp()).unwrap_or(t)
}

fn run_brooks_study(
    project: &str,
    data: &VariantData,
    repo: &GitRepo,
    log: &mut Vec<String>,
) -> Result<BrooksOutput, RunError> {
    let mut notes = Vec::new();
    let (Some(origin), Some(end)) = (data.origin, data.range_end) else {
        return Ok(BrooksOutput {
            rows: Vec::new(),
            correlation: None,
            models: Vec::new(),
            notes: vec!["no commits; study skipped".to_string()],
        });
    };
    let windows = split_windows(origin, end, data.variant.brooks_window, None)
        .map_err(|e| RunError::analysis("brooks", e))?;

    // per-commit Halstead effort over kept, non-binary files
    let mut effort_of: BTreeMap<&str, f64> = BTreeMap::new();
    for commit in &data.raw.commits {
        let mut effort = 0.0;
        if let Some(detail) = data.raw.details.get(&commit.hash) {
            for file in &detail.files {
                if file.is_binary || !data.filters.keeps(&file.path) {
                    continue;
                }
                let mut tokens = lex_tokens(&file.added_text, file.language);
                tokens.extend(lex_tokens(&file.deleted_text, file.language));
                effort += halstead_effort(&tokens);
            }
        }
        effort_of.insert(&commit.hash, effort);
    }

    // snapshot entity counts at window boundaries
    let mut snapshot_cache: BTreeMap<Option<String>, i64> = BTreeMap::new();
    let mut rows = Vec::new();
    for w in &windows {
        let in_window: Vec<&CommitRecord> = data
            .raw
            .commits
            .iter()
            .filter(|c| w.contains(c.author_time))
            .collect();
        if in_window.is_empty() {
            continue;
        }
        let team: BTreeSet<&DevId> = in_window
            .iter()
            .map(|c| &data.dev_of_commit[&c.hash])
            .collect();
        let commits_n = in_window.len() as u32;
        let halstead: f64 = in_window
            .iter()
            .map(|c| effort_of.get(c.hash.as_str()).copied().unwrap_or(0.0))
            .sum();

        let snapshot_at = |boundary: i64,
                           cache: &mut BTreeMap<Option<String>, i64>|
         -> Result<i64, RunError> {
            let commit = data
                .raw
                .commits
                .iter()
                .filter(|c| c.author_time < boundary)
                .max_by(|a, b| (a.author_time, &a.hash).cmp(&(b.author_time, &b.hash)))
                .map(|c| c.hash.clone());
            if let Some(v) = cache.get(&commit) {
                return Ok(*v);
            }
            let count = match &commit {
                None => 0,
                Some(hash) => snapshot_function_count(repo, hash, &data.filters)
                    .map_err(|e| git_error("brooks", e))?,
            };
            cache.insert(commit, count);
            Ok(count)
        };
        let start_count = snapshot_at(w.start, &mut snapshot_cache)?;
        let end_count = snapshot_at(w.end, &mut snapshot_cache)?;

        let net = build_window_network(
            data.variant,
            w.index,
            (w.start, w.end),
            &data.raw.commits,
            &data.dev_of_commit,
            &data.entity_records,
            &data.line_mods,
            &data.stored_changes,
            &data.filters,
        );
        let gm = graph_metrics(&net).ok();
        let window_mods: Vec<LineModification> = data
            .line_mods
            .iter()
            .filter(|m| w.contains(m.author_time))
            .map(|m| m.modification.clone())
            .collect();
        let (_, mean_fmodr) = foreign_modification_ratio(&window_mods);

        rows.push(WindowProductivity {
            project: project.to_string(),
            window: w.index,
            commits: commits_n,
            delta_functions: end_count - start_count,
            halstead_effort: halstead,
            team_size: team.len() as u32,
            mean_in_degree: gm.as_ref().and_then(|g| g.mean_in_degree),
            mean_fmodr,
            n_nodes: gm.as_ref().map(|g| g.n_nodes as u32).unwrap_or(0),
        });
    }

    let table = transformed_table(&rows);
    let correlation = match correlation_matrix(&table) {
        Ok(matrix) => Some((
            table.columns.iter().map(|(n, _)| n.clone()).collect(),
            matrix,
        )),
        Err(e) => {
            notes.push(format!("correlation matrix unavailable: {e}"));
            log.push(format!("[brooks:{}] {e}", data.variant.name));
            None
        }
    };
    let models = fit_models(
        &rows,
        &ProductivityTarget::ALL,
        &[ModelForm::Linear, ModelForm::Quadratic],
        &[vec![], data.variant.brooks_controls.clone()],
    );
    Ok(BrooksOutput {
        rows,
        correlation,
        models,
        notes,
    })
}

fn snapshot_function_count(
    repo: &GitRepo,
    commit: &str,
    filters: &CompiledFilters,
) -> Result<i64, GitError> {
    let mut count = 0i64;
    for path in repo.ls_tree(commit)? {
        if !filters.keeps(&path) {
            continue;
        }
        let language = Language::from_path(&path);
        if language == Language::Unsupported {
            continue;
        }
        if let Some(text) = repo.file_at(commit, &path) {
            count += detect_entities_declared(&text, language)
                .iter()
                .filter(|s| s.kind != EntityKind::FileFallback)
                .count() as i64;
        }
    }
    Ok(count)
}

fn run_turnover_study(
    _project: &str,
    data: &VariantData,
    repo: &GitRepo,
    log: &mut Vec<String>,
) -> Result<TurnoverOutput, RunError> {
    let mut notes = Vec::new();
    let (Some(origin), Some(end)) = (data.origin, data.range_end) else {
        return Ok(TurnoverOutput {
            activity_rows: Vec::new(),
            ci_rows: Vec::new(),
            loc_source: "none".to_string(),
            notes: vec!["no commits; study skipped".to_string()],
        });
    };
    let slots = split_windows(origin, end, LengthSpec::Weeks(2), None)
        .map_err(|e| RunError::analysis("turnover", e))?;
    let periods = split_windows(
        origin,
        end,
        LengthSpec::Months(data.variant.turnover_period_months),
        None,
    )
    .map_err(|e| RunError::analysis("turnover", e))?;

    // module map: configured file or derived from top-level directories
    let module_map = load_module_map(data, &mut notes)?;
    let modules = module_map.modules();

    let commit_times: BTreeMap<&str, i64> = data
        .raw
        .commits
        .iter()
        .map(|c| (c.hash.as_str(), c.author_time))
        .collect();
    let slot_of = |t: i64| -> Option<usize> { assign(t, &slots).into_iter().next() };

    // project activity bits per dev per slot (all commits)
    let mut project_active: BTreeMap<DevId, BTreeSet<usize>> = BTreeMap::new();
    for c in &data.raw.commits {
        if let Some(slot) = slot_of(c.author_time) {
            project_active
                .entry(data.dev_of_commit[&c.hash].clone())
                .or_default()
                .insert(slot);
        }
    }
    // module churn per (dev, module, slot) over kept changes
    let mut module_churn: BTreeMap<(DevId, String), BTreeMap<usize, f64>> = BTreeMap::new();
    let mut project_churn: BTreeMap<(DevId, String), BTreeMap<usize, f64>> = BTreeMap::new();
    let mut commit_modules: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for ch in data
        .stored_changes
        .iter()
        .filter(|c| data.filters.keeps(&c.path))
    {
        let Some(&t) = commit_times.get(ch.commit.as_str()) else {
            continue;
        };
        let Some(slot) = slot_of(t) else { continue };
        let dev = data.dev_of_commit[&ch.commit].clone();
        let module = module_map.module_for(&ch.path).to_string();
        commit_modules
            .entry(ch.commit.clone())
            .or_default()
            .insert(module.clone());
        *module_churn
            .entry((dev.clone(), module))
            .or_default()
            .entry(slot)
            .or_insert(0.0) += ch.churn() as f64;
        *project_churn
            .entry((dev, PROJECT_SCOPE.to_string()))
            .or_default()
            .entry(slot)
            .or_insert(0.0) += ch.churn() as f64;
    }

    // bug-fix commits: input list intersected with the extracted table
    let bugfixes = load_bugfix_list(data, &mut notes)?;
    let known_bugfixes: BTreeSet<String> = bugfixes
        .iter()
        .filter(|h| commit_times.contains_key(h.as_str()))
        .cloned()
        .collect();
    if bugfixes.len() != known_bugfixes.len() {
        notes.push(format!(
            "{} of {} bug-fix commits not reachable under this traversal",
            bugfixes.len() - known_bugfixes.len(),
            bugfixes.len()
        ));
    }

    // lines of code per module: external table or builtin counter
    let (loc_per_module, loc_source) = load_loc_table(data, repo, &module_map, &mut notes)?;

    let densities = bug_density(&known_bugfixes, &commit_modules, &loc_per_module)
        .map_err(|e| RunError::analysis("turnover", e))?;

    // per-period activity rows
    let mut activity_rows = Vec::new();
    let mut aggregated: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for period in &periods {
        let period_slots: Vec<usize> = slots
            .iter()
            .filter(|s| period.contains(s.start))
            .map(|s| s.index)
            .collect();
        if period_slots.is_empty() {
            continue;
        }
        let input = PeriodActivity {
            slots: period_slots.clone(),
            project_active: project_active.clone(),
            module_churn: module_churn.clone(),
        };
        let in_period = |hash: &str| {
            commit_times
                .get(hash)
                .is_some_and(|t| period.contains(*t))
        };
        let bugfix_in_period = |module: &str| {
            known_bugfixes
                .iter()
                .filter(|h| in_period(h))
                .filter(|h| {
                    commit_modules
                        .get(h.as_str())
                        .is_some_and(|ms| ms.contains(module))
                })
                .count() as u64
        };
        for groups in group_activity(&input, &modules) {
            let loc = loc_per_module.get(&groups.module).copied().unwrap_or(0);
            let fixes = bugfix_in_period(&groups.module);
            for (metric, value) in [
                ("ENA", groups.external_newcomer),
                ("ELA", groups.external_leaver),
                ("INA", groups.internal_newcomer),
                ("ILA", groups.internal_leaver),
                ("StA", groups.stayer),
            ] {
                *aggregated
                    .entry(metric.to_string())
                    .or_default()
                    .entry(groups.module.clone())
                    .or_insert(0.0) += value;
            }
            activity_rows.push(ActivityRow {
                period: period.index,
                module: groups.module.clone(),
                density: if loc > 0 {
                    Some(fixes as f64 / loc as f64)
                } else {
                    None
                },
                bugfixes: fixes,
                loc,
                groups,
            });
        }
        // project-scope row: external turnover over total churn
        let project_input = PeriodActivity {
            slots: period_slots,
            project_active: project_active.clone(),
            module_churn: project_churn.clone(),
        };
        for groups in group_activity(&project_input, &[PROJECT_SCOPE.to_string()]) {
            activity_rows.push(ActivityRow {
                period: period.index,
                module: groups.module.clone(),
                density: None,
                bugfixes: known_bugfixes.iter().filter(|h| in_period(h)).count() as u64,
                loc: loc_per_module.values().sum(),
                groups,
            });
        }
    }

    // turnover-quality correlation per metric over modules (all periods)
    let mut ci_rows = Vec::new();
    for metric in ["ENA", "ELA", "INA", "ILA", "StA"] {
        let activity = aggregated.get(metric).cloned().unwrap_or_default();
        let seed = derive_seed(data.variant.seed, &format!("turnover/{metric}"));
        let outcome = turnover_quality_correlation(
            &activity,
            &densities,
            data.variant.bootstrap_resamples,
            seed,
        );
        if let CorrelationOutcome::Absent { reason } = &outcome {
            log.push(format!(
                "[turnover:{}] {metric}: {reason}",
                data.variant.name
            ));
        }
        ci_rows.push((
            metric.to_string(),
            outcome,
            data.variant.bootstrap_resamples,
            seed,
        ));
    }
    Ok(TurnoverOutput {
        activity_rows,
        ci_rows,
        loc_source,
        notes,
    })
}

const PROJECT_SCOPE: &str = "<project>";

fn load_module_map(
    data: &VariantData,
    notes: &mut Vec<String>,
) -> Result<ModuleMap, RunError> {
    if let Some(path) = &data.variant.turnover_module_map_file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("module map {}: {e}", path.display())))?;
        let mut rules = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line == "pattern,module" || line.starts_with('#') {
                continue;
            }
            let Some((pattern, module)) = line.rsplit_once(',') else {
                return Err(RunError::Config(format!(
                    "module map line not pattern,module: {line:?}"
                )));
            };
            rules.push((pattern.trim().to_string(), module.trim().to_string()));
        }
        notes.push(format!("module map: {} ordered rules from file", rules.len()));
        ModuleMap::new(&rules, data.variant.unassigned_module.clone())
            .map_err(|e| RunError::Config(e.to_string()))
    } else {
        // derived: one module per observed top-level directory
        let mut components: BTreeSet<String> = BTreeSet::new();
        for ch in data
            .stored_changes
            .iter()
            .filter(|c| data.filters.keeps(&c.path))
        {
            if let Some((first, _)) = ch.path.split_once('/') {
                components.insert(first.to_string());
            }
        }
        let rules: Vec<(String, String)> = components
            .iter()
            .map(|c| (format!("{}/", regex::escape(c)), c.clone()))
            .collect();
        notes.push("module map: derived from top-level directories".to_string());
        ModuleMap::new(&rules, data.variant.unassigned_module.clone())
            .map_err(|e| RunError::Config(e.to_string()))
    }
}

fn load_bugfix_list(
    data: &VariantData,
    notes: &mut Vec<String>,
) -> Result<BTreeSet<String>, RunError> {
    match &data.variant.turnover_bugfix_file {
        None => {
            notes.push("no bug-fix list configured; densities are zero".to_string());
            Ok(BTreeSet::new())
        }
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| RunError::Config(format!("bugfix list {}: {e}", path.display())))?;
            let mut set = BTreeSet::new();
            for line in text.lines() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                if line.len() != 40 || !line.chars().all(|c| c.is_ascii_hexdigit()) {
                    return Err(RunError::Config(format!(
                        "bugfix list entry is not a 40-hex hash: {line:?}"
                    )));
                }
                set.insert(line.to_string());
            }
            Ok(set)
        }
    }
}

fn load_loc_table(
    data: &VariantData,
    repo: &GitRepo,
    module_map: &ModuleMap,
    notes: &mut Vec<String>,
) -> Result<(BTreeMap<String, u64>, String), RunError> {
    if let Some(path) = &data.variant.turnover_loc_file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("loc table {}: {e}", path.display())))?;
        let mut map = BTreeMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line == "module,loc" || line.starts_with('#') {
                continue;
            }
            let Some((module, loc)) = line.rsplit_once(',') else {
                return Err(RunError::Config(format!(
                    "loc table line not module,loc: {line:?}"
                )));
            };
            let loc: u64 = loc.trim().parse().map_err(|_| {
                RunError::Config(format!("loc value not an integer: {line:?}"))
            })?;
            map.insert(module.trim().to_string(), loc);
        }
        Ok((map, "external".to_string()))
    } else {
        // builtin fallback: non-blank lines of kept files at the last commit
        let Some(last) = data.raw.commits.last() else {
            return Ok((BTreeMap::new(), "builtin".to_string()));
        };
        let mut map: BTreeMap<String, u64> = BTreeMap::new();
        let paths = repo
            .ls_tree(&last.hash)
            .map_err(|e| git_error("turnover", e))?;
        for path in paths {
            if !data.filters.keeps(&path) {
                continue;
            }
            if let Some(text) = repo.file_at(&last.hash, &path) {
                let lines = text.lines().filter(|l| !l.trim().is_empty()).count() as u64;
                *map.entry(module_map.module_for(&path).to_string()).or_insert(0) += lines;
            }
        }
        notes.push(
            "loc source: builtin non-blank line counter (no external table given)".to_string(),
        );
        Ok((map, "builtin".to_string()))
    }
}

// === artifact writing ===

fn write_variant_artifacts(
    project: &str,
    data: &VariantData,
    out: &Path,
    plan: &Plan,
) -> Result<(), RunError> {
    let meta = metadata_lines(project, &data.flat);
    let wc = |rel: String, header: &[&str], rows: &[Vec<String>]| -> Result<(), RunError> {
        write_csv(&out.join(rel), &meta, header, rows).map_err(|e| io_error("write", e))
    };
    let name = &data.variant.name;

    // facts
    let commit_rows: Vec<Vec<String>> = data
        .raw
        .commits
        .iter()
        .map(|c| {
            vec![
                c.hash.clone(),
                c.author_name.clone(),
                c.author_email.clone(),
                c.committer_name.clone(),
                c.committer_email.clone(),
                c.author_time.to_string(),
                c.commit_time.to_string(),
                c.parents.join(" "),
            ]
        })
        .collect();
    wc(
        format!("facts/{name}/commits.csv"),
        &[
            "hash",
            "author_name",
            "author_email",
            "committer_name",
            "committer_email",
            "author_time",
            "commit_time",
            "parents",
        ],
        &commit_rows,
    )?;

    let change_rows: Vec<Vec<String>> = data
        .stored_changes
        .iter()
        .map(|c| {
            vec![
                c.commit.clone(),
                c.path.clone(),
                c.old_path.clone().unwrap_or_default(),
                c.lines_added.map(|v| v.to_string()).unwrap_or_default(),
                c.lines_deleted.map(|v| v.to_string()).unwrap_or_default(),
                c.is_binary.to_string(),
            ]
        })
        .collect();
    wc(
        format!("facts/{name}/file_changes.csv"),
        &["hash", "path", "old_path", "added", "deleted", "binary"],
        &change_rows,
    )?;

    let identity_rows: Vec<Vec<String>> = data
        .partition
        .developers
        .iter()
        .flat_map(|d| {
            d.members.iter().map(move |m| {
                vec![
                    d.id.clone(),
                    d.display_name.clone(),
                    m.name.clone(),
                    m.email.clone(),
                ]
            })
        })
        .collect();
    wc(
        format!("facts/{name}/identities.csv"),
        &["dev_id", "display_name", "raw_name", "raw_email"],
        &identity_rows,
    )?;

    let entity_rows: Vec<Vec<String>> = data
        .entity_records
        .iter()
        .map(|r| {
            vec![
                r.change.commit.clone(),
                r.change.path.clone(),
                r.change.entity_name.clone(),
                r.change.dev.clone(),
                r.change.lines_changed.to_string(),
                r.change
                    .block_index
                    .map(|i| i.to_string())
                    .unwrap_or_default(),
                r.change.counting_mode.label().to_string(),
            ]
        })
        .collect();
    wc(
        format!("facts/{name}/entity_changes.csv"),
        &["hash", "path", "entity", "dev_id", "lines", "block_index", "mode"],
        &entity_rows,
    )?;

    let window_rows: Vec<Vec<String>> = data
        .windows
        .iter()
        .map(|w| {
            vec![
                w.index.to_string(),
                format_iso8601(w.start),
                format_iso8601(w.end),
            ]
        })
        .collect();
    wc(
        format!("facts/{name}/windows.csv"),
        &["index", "start_iso8601", "end_iso8601"],
        &window_rows,
    )?;

    // networks
    if plan.networks {
        for (window, net) in &data.networks {
            let rows: Vec<Vec<String>> = net
                .edges
                .iter()
                .map(|e| {
                    vec![
                        e.src.clone(),
                        e.dst.clone(),
                        fmt_f64(e.weight),
                        e.multiplicity.to_string(),
                    ]
                })
                .collect();
            wc(
                format!("networks/{name}/edges_w{window}.csv"),
                &["src_dev", "dst_dev", "weight", "multiplicity"],
                &rows,
            )?;
        }
    }

    if let Some(roles) = &data.roles {
        write_roles_artifacts(project, data, roles, out)?;
    }
    if let Some(brooks) = &data.brooks {
        write_brooks_artifacts(project, data, brooks, out)?;
    }
    if let Some(turnover) = &data.turnover {
        write_turnover_artifacts(project, data, turnover, out)?;
    }
    Ok(())
}

fn agreement_rows(cells: &[AgreementCell]) -> Vec<Vec<String>> {
    cells
        .iter()
        .map(|c| {
            vec![
                c.metric_a.label().to_string(),
                c.metric_b.label().to_string(),
                fmt_f64(c.mean_kappa),
                c.windows_used.to_string(),
                c.windows_skipped.to_string(),
            ]
        })
        .collect()
}

fn write_roles_artifacts(
    project: &str,
    data: &VariantData,
    roles: &RolesOutput,
    out: &Path,
) -> Result<(), RunError> {
    let meta = metadata_lines(project, &data.flat);
    let name = &data.variant.name;
    let header = [
        "metric_a",
        "metric_b",
        "mean_kappa",
        "windows_used",
        "windows_skipped",
    ];
    write_csv(
        &out.join(format!("studies/{name}/roles_agreement.csv")),
        &meta,
        &header,
        &agreement_rows(&roles.agreement_recent),
    )
    .map_err(|e| io_error("write", e))?;
    write_csv(
        &out.join(format!("studies/{name}/roles_agreement_all.csv")),
        &meta,
        &header,
        &agreement_rows(&roles.agreement_all),
    )
    .map_err(|e| io_error("write", e))?;

    let hierarchy_rows: Vec<Vec<String>> = roles
        .hierarchy_rows
        .iter()
        .map(|r| {
            vec![
                r.window.to_string(),
                r.dev.clone(),
                r.degree.to_string(),
                fmt_f64(r.clustering),
                if r.core { "core" } else { "peripheral" }.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join(format!("studies/{name}/hierarchy.csv")),
        &meta,
        &["window", "dev", "degree", "clustering", "role"],
        &hierarchy_rows,
    )
    .map_err(|e| io_error("write", e))?;

    let slope_rows: Vec<Vec<String>> = roles
        .slopes
        .iter()
        .map(|(w, slope, n)| {
            vec![
                w.to_string(),
                slope.map(fmt_f64).unwrap_or_else(|| "-".to_string()),
                n.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join(format!("studies/{name}/hierarchy_slopes.csv")),
        &meta,
        &["window", "loglog_slope", "n_devs"],
        &slope_rows,
    )
    .map_err(|e| io_error("write", e))?;

    // scatter of the most recent window with hierarchy rows
    if let Some(last_window) = roles.hierarchy_rows.iter().map(|r| r.window).max() {
        let mut core_points = Vec::new();
        let mut peripheral_points = Vec::new();
        for row in roles.hierarchy_rows.iter().filter(|r| r.window == last_window) {
            let point = (row.degree as f64, row.clustering);
            if row.core {
                core_points.push(point);
            } else {
                peripheral_points.push(point);
            }
        }
        let chart = scatter_chart(
            &format!("{name}: clustering vs degree (window {last_window})"),
            "degree",
            "clustering coefficient",
            &[
                ("core".to_string(), core_points),
                ("peripheral".to_string(), peripheral_points),
            ],
            &[],
        );
        write_text(
            &out.join(format!("studies/{name}/hierarchy.svg")),
            &svg_with_metadata(&meta, &chart),
        )?;
    }
    Ok(())
}

fn write_brooks_artifacts(
    project: &str,
    data: &VariantData,
    brooks: &BrooksOutput,
    out: &Path,
) -> Result<(), RunError> {
    let meta = metadata_lines(project, &data.flat);
    let name = &data.variant.name;
    let metric_rows: Vec<Vec<String>> = brooks
        .rows
        .iter()
        .map(|r| {
            vec![
                r.project.clone(),
                r.window.to_string(),
                r.commits.to_string(),
                r.delta_functions.to_string(),
                fmt_f64(r.halstead_effort),
                r.team_size.to_string(),
                r.mean_in_degree.map(fmt_f64).unwrap_or_default(),
                r.mean_fmodr.map(fmt_f64).unwrap_or_default(),
                r.n_nodes.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join(format!("studies/{name}/brooks_metrics.csv")),
        &meta,
        &[
            "project",
            "window",
            "commits",
            "delta_functions",
            "halstead_effort",
            "team_size",
            "mean_in_degree",
            "mean_fmodr",
            "n_nodes",
        ],
        &metric_rows,
    )
    .map_err(|e| io_error("write", e))?;

    let mut model_rows: Vec<Vec<String>> = Vec::new();
    for model in &brooks.models {
        let form = if model.controls.is_empty() {
            model.form.label().to_string()
        } else {
            format!("{}+controls", model.form.label())
        };
        match &model.fit {
            Ok(fit) => {
                for term in &fit.terms {
                    model_rows.push(vec![
                        model.target.label().to_string(),
                        form.clone(),
                        term.name.clone(),
                        fmt_f64(term.coefficient),
                        fmt_f64(term.standard_error),
                        fmt_f64(fit.r2),
                        fmt_f64(fit.adj_r2),
                        fit.n.to_string(),
                    ]);
                }
            }
            Err(e) => {
                model_rows.push(vec![
                    model.target.label().to_string(),
                    form,
                    format!("unavailable: {e}"),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ]);
            }
        }
    }
    write_csv(
        &out.join(format!("studies/{name}/brooks_models.csv")),
        &meta,
        &["target", "form", "term", "coef", "se", "r2", "adj_r2", "n"],
        &model_rows,
    )
    .map_err(|e| io_error("write", e))?;

    if let Some((names, matrix)) = &brooks.correlation {
        let mut rows = Vec::new();
        for (i, row) in matrix.iter().enumerate() {
            let mut cells = vec![names[i].clone()];
            cells.extend(row.iter().map(|v| fmt_f64(*v)));
            rows.push(cells);
        }
        let mut header: Vec<&str> = vec!["metric"];
        header.extend(names.iter().map(|s| s.as_str()));
        write_csv(
            &out.join(format!("studies/{name}/brooks_correlation.csv")),
            &meta,
            &header,
            &rows,
        )
        .map_err(|e| io_error("write", e))?;
    }

    // regression scatter + fitted curves per target
    for target in ProductivityTarget::ALL {
        let points: Vec<(f64, f64)> = brooks
            .rows
            .iter()
            .map(|r| {
                let per_member = match target {
                    ProductivityTarget::Commits => r.commits as f64 / r.team_size.max(1) as f64,
                    ProductivityTarget::DeltaFunctions => {
                        r.delta_functions as f64 / r.team_size.max(1) as f64
                    }
                    ProductivityTarget::HalsteadEffort => {
                        r.halstead_effort / r.team_size.max(1) as f64
                    }
                };
                (
                    (r.team_size as f64).ln_1p(),
                    per_member.signum() * per_member.abs().ln_1p(),
                )
            })
            .collect();
        let mut curves = Vec::new();
        for model in brooks.models.iter().filter(|m| m.target == target && m.controls.is_empty())
        {
            if let Ok(fit) = &model.fit {
                let (lo, hi) = points
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (x, _)| {
                        (lo.min(*x), hi.max(*x))
                    });
                if !lo.is_finite() {
                    continue;
                }
                let curve: Vec<(f64, f64)> = (0..=40)
                    .map(|i| {
                        let x = lo + (hi - lo) * i as f64 / 40.0;
                        let mut y = fit.term("intercept").map(|t| t.coefficient).unwrap_or(0.0)
                            + fit.term("ts").map(|t| t.coefficient).unwrap_or(0.0) * x;
                        if let Some(t2) = fit.term("ts2") {
                            y += t2.coefficient * x * x;
                        }
                        (x, y)
                    })
                    .collect();
                curves.push((model.form.label().to_string(), curve));
            }
        }
        let chart = scatter_chart(
            &format!("{name}: {} per member vs team size", target.label()),
            "log team size",
            "log per-member productivity",
            &[("windows".to_string(), points)],
            &curves,
        );
        write_text(
            &out.join(format!("studies/{name}/brooks_fit_{}.svg", target.label())),
            &svg_with_metadata(&meta, &chart),
        )?;
    }
    Ok(())
}

fn write_turnover_artifacts(
    project: &str,
    data: &VariantData,
    turnover: &TurnoverOutput,
    out: &Path,
) -> Result<(), RunError> {
    let meta = metadata_lines(project, &data.flat);
    let name = &data.variant.name;
    let activity_rows: Vec<Vec<String>> = turnover
        .activity_rows
        .iter()
        .map(|r| {
            vec![
                project.to_string(),
                r.period.to_string(),
                r.module.clone(),
                fmt_f64(r.groups.external_newcomer),
                fmt_f64(r.groups.external_leaver),
                fmt_f64(r.groups.internal_newcomer),
                fmt_f64(r.groups.internal_leaver),
                fmt_f64(r.groups.stayer),
                r.bugfixes.to_string(),
                r.loc.to_string(),
                r.density.map(fmt_f64).unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(
        &out.join(format!("studies/{name}/turnover_activity.csv")),
        &meta,
        &[
            "project", "period", "module", "ENA", "ELA", "INA", "ILA", "StA", "bugfixes", "loc",
            "density",
        ],
        &activity_rows,
    )
    .map_err(|e| io_error("write", e))?;

    let ci_rows: Vec<Vec<String>> = turnover
        .ci_rows
        .iter()
        .map(|(metric, outcome, b, seed)| match outcome {
            CorrelationOutcome::Estimated { ci, significance } => vec![
                project.to_string(),
                metric.clone(),
                fmt_f64(ci.lo),
                fmt_f64(ci.hi),
                significance.label().to_string(),
                b.to_string(),
                seed.to_string(),
            ],
            CorrelationOutcome::Absent { reason } => vec![
                project.to_string(),
                metric.clone(),
                String::new(),
                String::new(),
                format!("absent: {reason}"),
                b.to_string(),
                seed.to_string(),
            ],
        })
        .collect();
    write_csv(
        &out.join(format!("studies/{name}/turnover_ci.csv")),
        &meta,
        &["project", "metric", "lo", "hi", "significance", "B", "seed"],
        &ci_rows,
    )
    .map_err(|e| io_error("write", e))?;

    // external turnover evolution per period (project scope)
    let mut series: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    for row in turnover
        .activity_rows
        .iter()
        .filter(|r| r.module == PROJECT_SCOPE)
    {
        series
            .entry("newcomers")
            .or_default()
            .push((row.period as f64, row.groups.external_newcomer));
        series
            .entry("leavers")
            .or_default()
            .push((row.period as f64, row.groups.external_leaver));
        series
            .entry("stayers")
            .or_default()
            .push((row.period as f64, row.groups.stayer));
    }
    let chart = line_chart(
        &format!("{name}: external turnover activity"),
        "development period",
        "churn",
        &series
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect::<Vec<_>>(),
    );
    write_text(
        &out.join(format!("studies/{name}/turnover_activity.svg")),
        &svg_with_metadata(&meta, &chart),
    )?;
    Ok(())
}

fn svg_with_metadata(meta: &[String], chart: &str) -> String {
    let mut s = String::from("<!--\n");
    for line in meta {
        s.push_str(line.trim_start_matches("# "));
        s.push('\n');
    }
    s.push_str("-->\n");
    s.push_str(chart);
    s
}

fn write_text(path: &Path, content: &str) -> Result<(), RunError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| io_error("write", e))?;
    }
    std::fs::write(path, content).map_err(|e| io_error("write", e))
}

// === comparison and report ===

fn variant_summary(data: &VariantData) -> VariantSummary {
    let mut role_kappas = BTreeMap::new();
    if let Some(roles) = &data.roles {
        for cell in &roles.agreement_recent {
            role_kappas.insert(
                format!("{}/{}", cell.metric_a.label(), cell.metric_b.label()),
                cell.mean_kappa,
            );
        }
    }
    let mut brooks_ts = BTreeMap::new();
    if let Some(brooks) = &data.brooks {
        for model in &brooks.models {
            if let Ok(fit) = &model.fit {
                if let Some(term) = fit.term("ts") {
                    let key = if model.controls.is_empty() {
                        format!("{}/{}", model.target.label(), model.form.label())
                    } else {
                        format!("{}/{}+controls", model.target.label(), model.form.label())
                    };
                    brooks_ts.insert(key, term.coefficient);
                }
            }
        }
    }
    let mut turnover = BTreeMap::new();
    if let Some(t) = &data.turnover {
        for (metric, outcome, _, _) in &t.ci_rows {
            let entry = match outcome {
                CorrelationOutcome::Estimated { ci, significance } => (
                    match significance {
                        Significance::Positive => SignificanceLabel::Positive,
                        Significance::Negative => SignificanceLabel::Negative,
                        Significance::None => SignificanceLabel::None,
                    },
                    Some((ci.lo, ci.hi)),
                ),
                CorrelationOutcome::Absent { .. } => (SignificanceLabel::Absent, None),
            };
            turnover.insert(metric.clone(), entry);
        }
    }
    VariantSummary {
        variant: data.variant.name.clone(),
        config: data.flat.clone(),
        baseline: Some(data.baseline.clone()),
        role_kappas,
        brooks_ts,
        turnover,
    }
}

fn write_compare_artifacts(
    project: &str,
    variants: &[VariantData],
    out: &Path,
    log: &mut Vec<String>,
) -> Result<Vec<AgreementVerdict>, RunError> {
    let mut meta = vec![format!("# tool = gitprism {}", crate::TOOL_VERSION)];
    meta.push(format!("# project = {project}"));
    for data in variants {
        for (k, v) in &data.flat {
            meta.push(format!("# {}.{k} = {v}", data.variant.name));
        }
    }

    // aligned baseline table (skipped when window grids differ)
    let baselines: Vec<VariantBaseline> =
        variants.iter().map(|v| v.baseline.clone()).collect();
    match agreement::baseline_series(&baselines) {
        Ok(cells) => {
            let rows: Vec<Vec<String>> = cells
                .iter()
                .map(|c| {
                    vec![
                        c.variant.clone(),
                        c.window.to_string(),
                        c.metric.label().to_string(),
                        fmt_f64(c.value),
                        c.absent.to_string(),
                    ]
                })
                .collect();
            write_csv(
                &out.join("compare/baseline_series.csv"),
                &meta,
                &["variant", "window", "metric", "value", "absent"],
                &rows,
            )
            .map_err(|e| io_error("write", e))?;
            for metric in BaselineMetric::ALL {
                let series: Vec<(String, Vec<(f64, f64)>)> = variants
                    .iter()
                    .map(|v| {
                        let points: Vec<(f64, f64)> = cells
                            .iter()
                            .filter(|c| c.variant == v.variant.name && c.metric == metric)
                            .map(|c| (c.window as f64, c.value))
                            .collect();
                        (v.variant.name.clone(), points)
                    })
                    .collect();
                let chart = line_chart(
                    &format!("{project}: {} per window", metric.label()),
                    "window",
                    metric.label(),
                    &series,
                );
                write_text(
                    &out.join(format!("compare/baseline_{}.svg", metric.label())),
                    &svg_with_metadata(&meta, &chart),
                )?;
            }
        }
        Err(e) => log.push(format!("[compare] baseline series skipped: {e}")),
    }

    // verdicts for every unordered variant pair
    let summaries: Vec<VariantSummary> = variants.iter().map(variant_summary).collect();
    let mut verdicts = Vec::new();
    for i in 0..summaries.len() {
        for j in (i + 1)..summaries.len() {
            verdicts.extend(agreement::conclusion_verdicts(&summaries[i], &summaries[j]));
        }
    }
    let verdict_rows: Vec<Vec<String>> = verdicts
        .iter()
        .map(|v| {
            let provenance = if v.provenance.is_empty() {
                "identical configs".to_string()
            } else {
                v.provenance.join(";")
            };
            vec![
                v.subject.label().to_string(),
                v.variant_a.clone(),
                v.variant_b.clone(),
                v.verdict.label().to_string(),
                format!("{}: {} [provenance: {provenance}]", v.item, v.detail),
            ]
        })
        .collect();
    write_csv(
        &out.join("compare/verdicts.csv"),
        &meta,
        &["subject", "variant_a", "variant_b", "verdict", "detail"],
        &verdict_rows,
    )
    .map_err(|e| io_error("write", e))?;

    // classification-level cross-variant agreement on shared names
    let mut cross_rows: Vec<Vec<String>> = Vec::new();
    for i in 0..variants.len() {
        for j in (i + 1)..variants.len() {
            let (Some(ra), Some(rb)) = (&variants[i].roles, &variants[j].roles) else {
                continue;
            };
            match cross_variant_agreement(&ra.named, &rb.named) {
                Ok(kappas) => {
                    for (metric, kappa) in kappas {
                        cross_rows.push(vec![
                            metric.label().to_string(),
                            variants[i].variant.name.clone(),
                            variants[j].variant.name.clone(),
                            fmt_f64(kappa),
                        ]);
                    }
                }
                Err(e) => log.push(format!(
                    "[compare] cross-variant agreement {} vs {} unavailable: {e}",
                    variants[i].variant.name, variants[j].variant.name
                )),
            }
        }
    }
    if !cross_rows.is_empty() {
        write_csv(
            &out.join("compare/cross_variant_kappa.csv"),
            &meta,
            &["metric", "variant_a", "variant_b", "kappa"],
            &cross_rows,
        )
        .map_err(|e| io_error("write", e))?;
    }
    Ok(verdicts)
}

fn render_report(
    project: &str,
    variants: &[VariantData],
    verdicts: &[AgreementVerdict],
) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let _ = writeln!(s, "# Variant comparison report: {project}\n");
    let _ = writeln!(s, "Generated by gitprism {}.\n", crate::TOOL_VERSION);

    let _ = writeln!(s, "## Variants\n");
    for data in variants {
        let _ = writeln!(s, "### {}\n", data.variant.name);
        let _ = writeln!(s, "| key | value |");
        let _ = writeln!(s, "| --- | --- |");
        for (k, v) in &data.flat {
            let _ = writeln!(s, "| {k} | {v} |");
        }
        let _ = writeln!(s);
    }

    for data in variants {
        let _ = writeln!(s, "## Studies: {}\n", data.variant.name);
        if let Some(roles) = &data.roles {
            let _ = writeln!(s, "### Core/peripheral agreement (recent span)\n");
            let _ = writeln!(s, "| metrics | mean kappa | band | windows (used/skipped) |");
            let _ = writeln!(s, "| --- | --- | --- | --- |");
            for cell in &roles.agreement_recent {
                let _ = writeln!(
                    s,
                    "| {}/{} | {:.4} | {} | {}/{} |",
                    cell.metric_a.label(),
                    cell.metric_b.label(),
                    cell.mean_kappa,
                    crate::stats::kappa_band(cell.mean_kappa).label(),
                    cell.windows_used,
                    cell.windows_skipped
                );
            }
            for note in &roles.notes {
                let _ = writeln!(s, "\n> {note}");
            }
            let _ = writeln!(s);
        }
        if let Some(brooks) = &data.brooks {
            let _ = writeln!(s, "### Team size vs productivity\n");
            let _ = writeln!(s, "| target | form | ts coefficient | se | r2 | n |");
            let _ = writeln!(s, "| --- | --- | --- | --- | --- | --- |");
            for model in &brooks.models {
                let form = if model.controls.is_empty() {
                    model.form.label().to_string()
                } else {
                    format!("{}+controls", model.form.label())
                };
                match &model.fit {
                    Ok(fit) => {
                        if let Some(term) = fit.term("ts") {
                            let _ = writeln!(
                                s,
                                "| {} | {form} | {:.4} | {:.4} | {:.4} | {} |",
                                model.target.label(),
                                term.coefficient,
                                term.standard_error,
                                fit.r2,
                                fit.n
                            );
                        }
                    }
                    Err(e) => {
                        let _ = writeln!(s, "| {} | {form} | unavailable: {e} | | | |", model.target.label());
                    }
                }
            }
            for note in &brooks.notes {
                let _ = writeln!(s, "\n> {note}");
            }
            let _ = writeln!(s);
        }
        if let Some(turnover) = &data.turnover {
            let _ = writeln!(s, "### Turnover vs bug density\n");
            let _ = writeln!(
                s,
                "Bootstrap: percentile intervals, rng {}, loc source {}.\n",
                crate::stats::BOOTSTRAP_RNG,
                turnover.loc_source
            );
            let _ = writeln!(s, "| metric | interval | significance | B | seed |");
            let _ = writeln!(s, "| --- | --- | --- | --- | --- |");
            for (metric, outcome, b, seed) in &turnover.ci_rows {
                match outcome {
                    CorrelationOutcome::Estimated { ci, significance } => {
                        let _ = writeln!(
                            s,
                            "| {metric} | [{:.4}, {:.4}] | {} | {b} | {seed} |",
                            ci.lo,
                            ci.hi,
                            significance.label()
                        );
                    }
                    CorrelationOutcome::Absent { reason } => {
                        let _ = writeln!(s, "| {metric} | absent | {reason} | {b} | {seed} |");
                    }
                }
            }
            for note in &turnover.notes {
                let _ = writeln!(s, "\n> {note}");
            }
            let _ = writeln!(s);
        }
    }

    if !verdicts.is_empty() {
        let _ = writeln!(s, "## Cross-variant verdicts\n");
        let conflicts = verdicts
            .iter()
            .filter(|v| v.verdict == crate::agreement::Verdict::Conflict)
            .count();
        let differs = verdicts
            .iter()
            .filter(|v| v.verdict == crate::agreement::Verdict::Differ)
            .count();
        let _ = writeln!(
            s,
            "{} comparisons: {} agree, {} differ, {} conflict.\n",
            verdicts.len(),
            verdicts.len() - conflicts - differs,
            differs,
            conflicts
        );
        let _ = writeln!(s, "| subject | pair | item | verdict | detail |");
        let _ = writeln!(s, "| --- | --- | --- | --- | --- |");
        for v in verdicts {
            let _ = writeln!(
                s,
                "| {} | {} vs {} | {} | {} | {} |",
                v.subject.label(),
                v.variant_a,
                v.variant_b,
                v.item,
                v.verdict.label(),
                v.detail
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "### Conclusion stability\n");
        if conflicts == 0 {
            let _ = writeln!(
                s,
                "No verdict reverses a sign, label or agreement band: study \
                 conclusions are stable across the configured variants."
            );
        } else {
            let _ = writeln!(
                s,
                "{} verdict(s) reverse a sign, label or agreement band: the \
                 affected conclusions depend on the pipeline variant. Differing \
                 stage flags are listed per verdict.",
                conflicts
            );
            for v in verdicts
                .iter()
                .filter(|v| v.verdict == crate::agreement::Verdict::Conflict)
            {
                let _ = writeln!(
                    s,
                    "- {} / {}: {} (flags: {})",
                    v.subject.label(),
                    v.item,
                    v.detail,
                    v.provenance.join(", ")
                );
            }
        }
    }
    s
}

// === entry point ===

/// Run the pipeline up to `stage` for every variant in the config.
pub fn run(
    config: &ResolvedConfig,
    stage: Stage,
    opts: &RunOptions,
) -> Result<RunSummary, RunError> {
    let mut log = Vec::new();
    let repo = GitRepo::open(&config.repo)
        .map_err(|e| git_error("open", e))
        .map_err(|e| match e {
            RunError::Analysis { message, .. } => RunError::Repository(message),
            other => other,
        })?;

    if matches!(stage, Stage::Compare) && config.variants.len() < 2 {
        return Err(RunError::Config(
            "compare needs at least two variants".to_string(),
        ));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| RunError::analysis("setup", e))?;

    // shared extraction per traversal mode
    let mut extractions: BTreeMap<String, RawExtraction> = BTreeMap::new();
    for variant in &config.variants {
        let key = variant.branch_mode.to_string();
        if extractions.contains_key(&key) {
            log.push(format!(
                "extraction cache hit for variant {} ({key})",
                variant.name
            ));
            continue;
        }
        let extraction = pool.install(|| build_extraction(&repo, &variant.branch_mode))?;
        extractions.insert(key, extraction);
    }

    let mut datasets: Vec<VariantData> = Vec::new();
    for variant in &config.variants {
        let plan = Plan::for_stage(stage, &variant.studies);
        let raw = &extractions[&variant.branch_mode.to_string()];
        let data = analyze_variant(&config.project_name, variant, raw, &plan, &repo, &mut log)?;
        write_variant_artifacts(&config.project_name, &data, &opts.out_dir, &plan)?;
        datasets.push(data);
    }

    let plan = Plan::for_stage(stage, &[]);
    let mut verdicts = Vec::new();
    if plan.compare && datasets.len() >= 2 {
        verdicts = write_compare_artifacts(
            &config.project_name,
            &datasets,
            &opts.out_dir,
            &mut log,
        )?;
    }
    if plan.report {
        let report = render_report(&config.project_name, &datasets, &verdicts);
        write_text(&opts.out_dir.join("report.md"), &report)?;
    }
    Ok(RunSummary { log, verdicts })
}
