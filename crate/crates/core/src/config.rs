//! Variant configuration: a TOML file naming the repository and one or more
//! pipeline variants. Every divergence point is an explicit flag; resolution
//! fills documented defaults and the resolved value of every flag is
//! embedded in output metadata, so no default stays silent.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Deserialize;
use thiserror::Error;

use crate::entities::CountingMode;
use crate::gitio::{BranchMode, FilterConfig};
use crate::identity::{IdentityMode, IdentityScope};
use crate::network::{NetworkVariant, WeightScheme};
use crate::studies::brooks::ControlVar;
use crate::windows::LengthSpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config key {key}: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub project: ProjectSection,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(rename = "variant", default)]
    pub variants: Vec<VariantSection>,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectSection {
    pub name: String,
    pub repo: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchModeKind {
    AllBranches,
    Single,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterOrder {
    /// Facts tables store only filter-passing changes.
    BeforeStore,
    /// Facts tables store everything; filters apply at analysis time.
    AtAnalysis,
}

impl FilterOrder {
    pub fn label(self) -> &'static str {
        match self {
            FilterOrder::BeforeStore => "before_store",
            FilterOrder::AtAnalysis => "at_analysis",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Roles,
    Brooks,
    Turnover,
}

impl StudyKind {
    pub fn label(self) -> &'static str {
        match self {
            StudyKind::Roles => "roles",
            StudyKind::Brooks => "brooks",
            StudyKind::Turnover => "turnover",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSection {
    pub name: String,
    #[serde(default = "default_branch_mode")]
    pub branch_mode: BranchModeKind,
    #[serde(default = "default_branch")]
    pub branch: String,
    #[serde(default)]
    pub filters: FiltersSection,
    #[serde(default)]
    pub identity: IdentitySection,
    #[serde(default)]
    pub entities: EntitiesSection,
    #[serde(default)]
    pub windows: WindowsSection,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub studies: StudiesSection,
    #[serde(default)]
    pub roles: RolesSection,
    #[serde(default)]
    pub brooks: BrooksSection,
    #[serde(default)]
    pub turnover: TurnoverSection,
}

fn default_branch_mode() -> BranchModeKind {
    BranchModeKind::AllBranches
}

fn default_branch() -> String {
    "main".to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiltersSection {
    #[serde(default)]
    pub allow_patterns: Vec<String>,
    #[serde(default)]
    pub deny_patterns: Vec<String>,
    #[serde(default)]
    pub deny_extensions: Vec<String>,
    #[serde(default = "default_filter_order")]
    pub order: FilterOrder,
}

impl Default for FiltersSection {
    fn default() -> Self {
        FiltersSection {
            allow_patterns: Vec::new(),
            deny_patterns: Vec::new(),
            deny_extensions: Vec::new(),
            order: default_filter_order(),
        }
    }
}

fn default_filter_order() -> FilterOrder {
    FilterOrder::BeforeStore
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityModeKind {
    Exact,
    EditDistance,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentitySection {
    #[serde(default = "default_identity_mode")]
    pub mode: IdentityModeKind,
    #[serde(default = "default_identity_threshold")]
    pub threshold: u32,
    #[serde(default = "default_identity_scope")]
    pub scope: IdentityScope,
}

impl Default for IdentitySection {
    fn default() -> Self {
        IdentitySection {
            mode: default_identity_mode(),
            threshold: default_identity_threshold(),
            scope: default_identity_scope(),
        }
    }
}

fn default_identity_mode() -> IdentityModeKind {
    IdentityModeKind::Exact
}

fn default_identity_threshold() -> u32 {
    1
}

fn default_identity_scope() -> IdentityScope {
    IdentityScope::AuthorOnly
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntitiesSection {
    #[serde(default = "default_entity_mode")]
    pub mode: CountingMode,
    #[serde(default)]
    pub gap: u32,
    #[serde(default = "default_true")]
    pub file_fallback: bool,
}

impl Default for EntitiesSection {
    fn default() -> Self {
        EntitiesSection {
            mode: default_entity_mode(),
            gap: 0,
            file_fallback: true,
        }
    }
}

fn default_entity_mode() -> CountingMode {
    CountingMode::SummarisePerEntity
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowsSection {
    pub months: Option<u32>,
    pub weeks: Option<u32>,
    /// Sliding-window step in the same unit as the length.
    pub overlap_step: Option<f64>,
    /// Pinned window origin (ISO-8601); defaults to the first author time.
    pub origin: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    #[serde(default = "default_network_variant")]
    pub variant: NetworkVariant,
    #[serde(default = "default_weight_scheme")]
    pub weight_scheme: WeightScheme,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            variant: default_network_variant(),
            weight_scheme: default_weight_scheme(),
        }
    }
}

fn default_network_variant() -> NetworkVariant {
    NetworkVariant::TemporalEntity
}

fn default_weight_scheme() -> WeightScheme {
    WeightScheme::CountPerPriorDev
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudiesSection {
    #[serde(default = "default_studies")]
    pub run: Vec<StudyKind>,
}

impl Default for StudiesSection {
    fn default() -> Self {
        StudiesSection {
            run: default_studies(),
        }
    }
}

fn default_studies() -> Vec<StudyKind> {
    vec![StudyKind::Roles, StudyKind::Brooks, StudyKind::Turnover]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolesSection {
    #[serde(default = "default_threshold_fraction")]
    pub threshold_fraction: f64,
    #[serde(default = "default_averaging_months")]
    pub averaging_months: u32,
}

impl Default for RolesSection {
    fn default() -> Self {
        RolesSection {
            threshold_fraction: default_threshold_fraction(),
            averaging_months: default_averaging_months(),
        }
    }
}

fn default_threshold_fraction() -> f64 {
    0.8
}

fn default_averaging_months() -> u32 {
    12
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrooksSection {
    pub window_months: Option<u32>,
    pub window_weeks: Option<u32>,
    pub controls: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurnoverSection {
    #[serde(default = "default_period_months")]
    pub period_months: u32,
    pub bugfix_file: Option<PathBuf>,
    pub module_map_file: Option<PathBuf>,
    pub loc_file: Option<PathBuf>,
    #[serde(default = "default_bootstrap_resamples")]
    pub bootstrap_resamples: usize,
    #[serde(default = "default_unassigned_module")]
    pub unassigned_module: String,
}

impl Default for TurnoverSection {
    fn default() -> Self {
        TurnoverSection {
            period_months: default_period_months(),
            bugfix_file: None,
            module_map_file: None,
            loc_file: None,
            bootstrap_resamples: default_bootstrap_resamples(),
            unassigned_module: default_unassigned_module(),
        }
    }
}

fn default_period_months() -> u32 {
    6
}

fn default_bootstrap_resamples() -> usize {
    2000
}

fn default_unassigned_module() -> String {
    "unassigned".to_string()
}

/// A fully resolved variant: every flag concrete.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedVariant {
    pub name: String,
    pub branch_mode: BranchMode,
    pub filters: FilterConfig,
    pub filter_order: FilterOrder,
    pub identity_mode: IdentityMode,
    pub identity_scope: IdentityScope,
    pub entity_mode: CountingMode,
    pub entity_gap: u32,
    pub file_fallback: bool,
    pub window_length: LengthSpec,
    pub window_overlap: Option<f64>,
    pub window_origin: Option<i64>,
    pub network_variant: NetworkVariant,
    pub weight_scheme: WeightScheme,
    pub studies: Vec<StudyKind>,
    pub roles_threshold: f64,
    pub roles_averaging_months: u32,
    pub brooks_window: LengthSpec,
    pub brooks_controls: Vec<ControlVar>,
    pub turnover_period_months: u32,
    pub turnover_bugfix_file: Option<PathBuf>,
    pub turnover_module_map_file: Option<PathBuf>,
    pub turnover_loc_file: Option<PathBuf>,
    pub bootstrap_resamples: usize,
    pub unassigned_module: String,
    pub seed: u64,
}

impl ResolvedVariant {
    /// Flatten every resolved flag into dotted keys. This map is embedded in
    /// output metadata and drives verdict provenance.
    pub fn flatten(&self) -> BTreeMap<String, String> {
        let join = |v: &[String]| v.join(";");
        let opt_path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "-".to_string())
        };
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            map.insert(k.to_string(), v);
        };
        put("variant", self.name.clone());
        put("branch_mode", self.branch_mode.to_string());
        put("filters.allow_patterns", join(&self.filters.allow_patterns));
        put("filters.deny_patterns", join(&self.filters.deny_patterns));
        put(
            "filters.deny_extensions",
            join(&self.filters.deny_extensions),
        );
        put("filters.order", self.filter_order.label().to_string());
        put(
            "identity.mode",
            match &self.identity_mode {
                IdentityMode::Exact => "exact".to_string(),
                IdentityMode::EditDistance { threshold } => {
                    format!("edit_distance:{threshold}")
                }
            },
        );
        put(
            "identity.scope",
            match self.identity_scope {
                IdentityScope::AuthorOnly => "author_only".to_string(),
                IdentityScope::AuthorAndCommitter => "author_and_committer".to_string(),
            },
        );
        put("entities.mode", self.entity_mode.label().to_string());
        put("entities.gap", self.entity_gap.to_string());
        put("entities.file_fallback", self.file_fallback.to_string());
        put("windows.length", self.window_length.to_string());
        put(
            "windows.overlap_step",
            self.window_overlap
                .map(|v| v.to_string())
                .unwrap_or_else(|| "-".to_string()),
        );
        put(
            "windows.origin",
            self.window_origin
                .map(crate::windows::format_iso8601)
                .unwrap_or_else(|| "first_commit".to_string()),
        );
        put(
            "network.variant",
            self.network_variant.label().to_string(),
        );
        put(
            "network.weight_scheme",
            match self.weight_scheme {
                WeightScheme::CountPerPriorDev => "count_per_prior_dev",
                WeightScheme::CountOnce => "count_once",
            }
            .to_string(),
        );
        put(
            "studies.run",
            self.studies
                .iter()
                .map(|s| s.label().to_string())
                .collect::<Vec<_>>()
                .join(";"),
        );
        put(
            "roles.threshold_fraction",
            self.roles_threshold.to_string(),
        );
        put(
            "roles.averaging_months",
            self.roles_averaging_months.to_string(),
        );
        put("brooks.window", self.brooks_window.to_string());
        put(
            "brooks.controls",
            self.brooks_controls
                .iter()
                .map(|c| c.label().to_string())
                .collect::<Vec<_>>()
                .join(";"),
        );
        put(
            "turnover.period_months",
            self.turnover_period_months.to_string(),
        );
        put(
            "turnover.bugfix_file",
            opt_path(&self.turnover_bugfix_file),
        );
        put(
            "turnover.module_map_file",
            opt_path(&self.turnover_module_map_file),
        );
        put("turnover.loc_file", opt_path(&self.turnover_loc_file));
        put(
            "turnover.bootstrap_resamples",
            self.bootstrap_resamples.to_string(),
        );
        put("turnover.unassigned_module", self.unassigned_module.clone());
        put("seed", self.seed.to_string());
        put("rng", crate::stats::BOOTSTRAP_RNG.to_string());
        map
    }
}

/// The resolved configuration of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub project_name: String,
    pub repo: PathBuf,
    pub seed: u64,
    pub variants: Vec<ResolvedVariant>,
}

fn resolve_length(
    key: &str,
    months: Option<u32>,
    weeks: Option<u32>,
    default: LengthSpec,
) -> Result<LengthSpec, ConfigError> {
    match (months, weeks) {
        (Some(_), Some(_)) => Err(invalid(key, "give months or weeks, not both")),
        (Some(0), _) | (_, Some(0)) => Err(invalid(key, "length must be positive")),
        (Some(m), None) => Ok(LengthSpec::Months(m)),
        (None, Some(w)) => Ok(LengthSpec::Weeks(w)),
        (None, None) => Ok(default),
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn resolve(&self, seed_override: Option<u64>) -> Result<ResolvedConfig, ConfigError> {
        if self.variants.is_empty() {
            return Err(invalid("variant", "at least one [[variant]] is required"));
        }
        let seed = seed_override.unwrap_or(self.seed);
        let mut names = std::collections::BTreeSet::new();
        let variants = self
            .variants
            .iter()
            .map(|v| {
                if !names.insert(v.name.clone()) {
                    return Err(invalid("variant.name", format!("duplicate name {}", v.name)));
                }
                v.resolve(seed)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ResolvedConfig {
            project_name: self.project.name.clone(),
            repo: self.project.repo.clone(),
            seed,
            variants,
        })
    }
}

impl VariantSection {
    fn resolve(&self, seed: u64) -> Result<ResolvedVariant, ConfigError> {
        let branch_mode = match self.branch_mode {
            BranchModeKind::AllBranches => BranchMode::AllBranches,
            BranchModeKind::Single => BranchMode::Single(self.branch.clone()),
        };
        let window_length = resolve_length(
            "variant.windows",
            self.windows.months,
            self.windows.weeks,
            LengthSpec::Months(3),
        )?;
        if let Some(step) = self.windows.overlap_step {
            let len = match window_length {
                LengthSpec::Months(n) => n as f64,
                LengthSpec::Weeks(n) => n as f64,
            };
            if step <= 0.0 || step > len {
                return Err(invalid(
                    "variant.windows.overlap_step",
                    "must be positive and no larger than the window length",
                ));
            }
        }
        let window_origin = self
            .windows
            .origin
            .as_deref()
            .map(|s| {
                crate::windows::parse_iso8601(s)
                    .map_err(|e| invalid("variant.windows.origin", e.to_string()))
            })
            .transpose()?;
        let brooks_window = resolve_length(
            "variant.brooks",
            self.brooks.window_months,
            self.brooks.window_weeks,
            LengthSpec::Months(9),
        )?;
        let brooks_controls = match &self.brooks.controls {
            None => ControlVar::ALL.to_vec(),
            Some(names) => names
                .iter()
                .map(|n| match n.as_str() {
                    "mean_in_degree" => Ok(ControlVar::MeanInDegree),
                    "mean_fmodr" => Ok(ControlVar::MeanFmodr),
                    "n_nodes" => Ok(ControlVar::NNodes),
                    other => Err(invalid(
                        "variant.brooks.controls",
                        format!("unknown control {other}"),
                    )),
                })
                .collect::<Result<Vec<_>, _>>()?,
        };
        if !(0.0..=1.0).contains(&self.roles.threshold_fraction) {
            return Err(invalid(
                "variant.roles.threshold_fraction",
                "must lie in [0, 1]",
            ));
        }
        if self.turnover.period_months == 0 {
            return Err(invalid("variant.turnover.period_months", "must be positive"));
        }
        if self.turnover.bootstrap_resamples == 0 {
            return Err(invalid(
                "variant.turnover.bootstrap_resamples",
                "must be positive",
            ));
        }
        let mut studies = self.studies.run.clone();
        studies.sort();
        studies.dedup();
        Ok(ResolvedVariant {
            name: self.name.clone(),
            branch_mode,
            filters: FilterConfig {
                allow_patterns: self.filters.allow_patterns.clone(),
                deny_patterns: self.filters.deny_patterns.clone(),
                deny_extensions: self.filters.deny_extensions.clone(),
            },
            filter_order: self.filters.order,
            identity_mode: match self.identity.mode {
                IdentityModeKind::Exact => IdentityMode::Exact,
                IdentityModeKind::EditDistance => IdentityMode::EditDistance {
                    threshold: self.identity.threshold,
                },
            },
            identity_scope: self.identity.scope,
            entity_mode: self.entities.mode,
            entity_gap: self.entities.gap,
            file_fallback: self.entities.file_fallback,
            window_length,
            window_overlap: self.windows.overlap_step,
            window_origin,
            network_variant: self.network.variant,
            weight_scheme: self.network.weight_scheme,
            studies,
            roles_threshold: self.roles.threshold_fraction,
            roles_averaging_months: self.roles.averaging_months,
            brooks_window,
            brooks_controls,
            turnover_period_months: self.turnover.period_months,
            turnover_bugfix_file: self.turnover.bugfix_file.clone(),
            turnover_module_map_file: self.turnover.module_map_file.clone(),
            turnover_loc_file: self.turnover.loc_file.clone(),
            bootstrap_resamples: self.turnover.bootstrap_resamples,
            unassigned_module: self.turnover.unassigned_module.clone(),
            seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[project]
name = "demo"
repo = "/tmp/repo"

[[variant]]
name = "base"
"#;

    #[test]
    fn minimal_config_resolves_with_documented_defaults() {
        let cfg = ConfigFile::parse(MINIMAL).unwrap().resolve(None).unwrap();
        assert_eq!(cfg.variants.len(), 1);
        let v = &cfg.variants[0];
        assert_eq!(v.branch_mode, BranchMode::AllBranches);
        assert_eq!(v.window_length, LengthSpec::Months(3));
        assert_eq!(v.brooks_window, LengthSpec::Months(9));
        assert_eq!(v.turnover_period_months, 6);
        assert_eq!(v.bootstrap_resamples, 2000);
        assert_eq!(v.roles_threshold, 0.8);
        assert_eq!(v.studies.len(), 3);
    }

    #[test]
    fn every_flag_lands_in_the_flattened_metadata() {
        let cfg = ConfigFile::parse(MINIMAL).unwrap().resolve(None).unwrap();
        let flat = cfg.variants[0].flatten();
        for key in [
            "branch_mode",
            "filters.allow_patterns",
            "filters.deny_patterns",
            "filters.deny_extensions",
            "filters.order",
            "identity.mode",
            "identity.scope",
            "entities.mode",
            "entities.gap",
            "entities.file_fallback",
            "windows.length",
            "windows.overlap_step",
            "windows.origin",
            "network.variant",
            "network.weight_scheme",
            "studies.run",
            "roles.threshold_fraction",
            "roles.averaging_months",
            "brooks.window",
            "brooks.controls",
            "turnover.period_months",
            "turnover.bugfix_file",
            "turnover.module_map_file",
            "turnover.loc_file",
            "turnover.bootstrap_resamples",
            "turnover.unassigned_module",
            "seed",
            "rng",
        ] {
            assert!(flat.contains_key(key), "missing {key}");
        }
    }

    #[test]
    fn unknown_enum_value_is_rejected_with_the_key() {
        let bad = r#"
[project]
name = "demo"
repo = "/tmp/repo"

[[variant]]
name = "base"

[variant.network]
variant = "hypergraph"
"#;
        let err = ConfigFile::parse(bad).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("hypergraph") || msg.contains("variant"), "{msg}");
    }

    #[test]
    fn conflicting_window_units_are_rejected() {
        let bad = r#"
[project]
name = "demo"
repo = "/tmp/repo"

[[variant]]
name = "base"

[variant.windows]
months = 3
weeks = 12
"#;
        let err = ConfigFile::parse(bad).unwrap().resolve(None).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { .. }));
    }

    #[test]
    fn seed_override_wins_and_is_recorded() {
        let cfg = ConfigFile::parse(MINIMAL)
            .unwrap()
            .resolve(Some(99))
            .unwrap();
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.variants[0].flatten()["seed"], "99");
    }

    #[test]
    fn seed_in_file_is_used_without_override() {
        let with_seed = format!("seed = 7\n{MINIMAL}");
        let cfg = ConfigFile::parse(&with_seed).unwrap().resolve(None).unwrap();
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn single_branch_mode_carries_the_branch() {
        let text = r#"
[project]
name = "demo"
repo = "/tmp/repo"

[[variant]]
name = "base"
branch_mode = "single"
branch = "trunk"
"#;
        let cfg = ConfigFile::parse(text).unwrap().resolve(None).unwrap();
        assert_eq!(
            cfg.variants[0].branch_mode,
            BranchMode::Single("trunk".into())
        );
    }

    #[test]
    fn duplicate_variant_names_are_rejected() {
        let text = r#"
[project]
name = "demo"
repo = "/tmp/repo"

[[variant]]
name = "base"

[[variant]]
name = "base"
"#;
        assert!(ConfigFile::parse(text).unwrap().resolve(None).is_err());
    }
}
