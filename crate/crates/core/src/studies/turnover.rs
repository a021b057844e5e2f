//! Replication suite 3: developer turnover classification, module activity
//! patterns, bug density and the turnover-quality correlation.
//!
//! Roles come from activity bits over consecutive two-week periods. For a
//! six-month development period, a developer's period role reduces the pair
//! roles: newcomer when the first non-absent pair says so, else leaver when
//! the last one does, else stayer. External roles use project activity,
//! internal roles per-module activity; internal metrics refine the external
//! stayers, so the five activity groups partition the module churn.

use std::collections::{BTreeMap, BTreeSet};

use regex::Regex;
use thiserror::Error;

use crate::identity::DevId;
use crate::stats::{self, ConfidenceInterval, Significance};

#[derive(Debug, Error)]
pub enum TurnoverError {
    #[error("invalid module pattern {pattern:?}: {source}")]
    InvalidPattern {
        pattern: String,
        source: regex::Error,
    },
    #[error("module {0} has bug fixes but zero lines of code")]
    ZeroLocModule(String),
}

/// Presence pattern of a developer across a pair of two-week periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Role {
    Newcomer,
    Leaver,
    Stayer,
    Absent,
}

impl Role {
    pub fn label(self) -> &'static str {
        match self {
            Role::Newcomer => "newcomer",
            Role::Leaver => "leaver",
            Role::Stayer => "stayer",
            Role::Absent => "absent",
        }
    }
}

/// The two activity bits fully determine the role.
pub fn classify_role(active_before: bool, active_now: bool) -> Role {
    match (active_before, active_now) {
        (false, true) => Role::Newcomer,
        (true, false) => Role::Leaver,
        (true, true) => Role::Stayer,
        (false, false) => Role::Absent,
    }
}

/// Reduce one developer's pair roles over a development period to a single
/// group: first-activity newcomer wins, then trailing leaver, else stayer.
pub fn period_role(pair_roles: &[Role]) -> Role {
    let active: Vec<Role> = pair_roles
        .iter()
        .copied()
        .filter(|r| *r != Role::Absent)
        .collect();
    match (active.first(), active.last()) {
        (None, _) => Role::Absent,
        (Some(Role::Newcomer), _) => Role::Newcomer,
        (_, Some(Role::Leaver)) => Role::Leaver,
        _ => Role::Stayer,
    }
}

/// Ordered list of (anchored pattern, module); first match wins.
#[derive(Debug, Clone)]
pub struct ModuleMap {
    rules: Vec<(Regex, String)>,
    pub unassigned: String,
}

impl ModuleMap {
    pub fn new(
        rules: &[(String, String)],
        unassigned: impl Into<String>,
    ) -> Result<ModuleMap, TurnoverError> {
        let compiled = rules
            .iter()
            .map(|(pattern, module)| {
                Regex::new(&format!("^(?:{pattern})"))
                    .map(|re| (re, module.clone()))
                    .map_err(|source| TurnoverError::InvalidPattern {
                        pattern: pattern.clone(),
                        source,
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ModuleMap {
            rules: compiled,
            unassigned: unassigned.into(),
        })
    }

    pub fn module_for(&self, path: &str) -> &str {
        for (re, module) in &self.rules {
            if re.is_match(path) {
                return module;
            }
        }
        &self.unassigned
    }

    /// All module names this map can produce, the unassigned bucket last.
    pub fn modules(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for (_, module) in &self.rules {
            if seen.insert(module.clone()) {
                out.push(module.clone());
            }
        }
        if seen.insert(self.unassigned.clone()) {
            out.push(self.unassigned.clone());
        }
        out
    }
}

/// Activity facts of one development period, in two-week slot resolution.
/// Slot indices are global; the slot preceding the period's first slot
/// participates in the boundary pair.
#[derive(Debug, Clone, Default)]
pub struct PeriodActivity {
    /// Two-week slots covered by the period, ascending.
    pub slots: Vec<usize>,
    /// Slots (anywhere) in which a developer authored at least one commit.
    pub project_active: BTreeMap<DevId, BTreeSet<usize>>,
    /// Churn per (developer, module, slot).
    pub module_churn: BTreeMap<(DevId, String), BTreeMap<usize, f64>>,
}

/// Per-module activity of the five turnover groups.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupActivity {
    pub module: String,
    pub external_newcomer: f64,
    pub external_leaver: f64,
    pub internal_newcomer: f64,
    pub internal_leaver: f64,
    pub stayer: f64,
}

impl GroupActivity {
    pub fn total(&self) -> f64 {
        self.external_newcomer
            + self.external_leaver
            + self.internal_newcomer
            + self.internal_leaver
            + self.stayer
    }
}

fn pair_roles(active_slots: &BTreeSet<usize>, slots: &[usize]) -> Vec<Role> {
    slots
        .iter()
        .map(|&s| {
            classify_role(
                s > 0 && active_slots.contains(&(s - 1)),
                active_slots.contains(&s),
            )
        })
        .collect()
}

/// Aggregate group activity per module over one development period.
///
/// External newcomers and leavers carry their whole module churn; external
/// stayers split by their internal (module) role. The five groups therefore
/// partition the period's churn per module.
pub fn group_activity(input: &PeriodActivity, modules: &[String]) -> Vec<GroupActivity> {
    let mut per_module: BTreeMap<&str, GroupActivity> = modules
        .iter()
        .map(|m| {
            (
                m.as_str(),
                GroupActivity {
                    module: m.clone(),
                    external_newcomer: 0.0,
                    external_leaver: 0.0,
                    internal_newcomer: 0.0,
                    internal_leaver: 0.0,
                    stayer: 0.0,
                },
            )
        })
        .collect();

    let empty = BTreeSet::new();
    for ((dev, module), churn_by_slot) in &input.module_churn {
        let Some(entry) = per_module.get_mut(module.as_str()) else {
            continue;
        };
        let churn: f64 = churn_by_slot
            .iter()
            .filter(|(slot, _)| input.slots.contains(slot))
            .map(|(_, c)| c)
            .sum();
        if churn == 0.0 {
            continue;
        }
        let project_slots = input.project_active.get(dev).unwrap_or(&empty);
        let external = period_role(&pair_roles(project_slots, &input.slots));
        match external {
            Role::Newcomer => entry.external_newcomer += churn,
            Role::Leaver => entry.external_leaver += churn,
            Role::Absent => {} // churn implies activity; defensive no-op
            Role::Stayer => {
                let module_slots: BTreeSet<usize> = churn_by_slot
                    .iter()
                    .filter(|(_, c)| **c > 0.0)
                    .map(|(s, _)| *s)
                    .collect();
                match period_role(&pair_roles(&module_slots, &input.slots)) {
                    Role::Newcomer => entry.internal_newcomer += churn,
                    Role::Leaver => entry.internal_leaver += churn,
                    _ => entry.stayer += churn,
                }
            }
        }
    }
    per_module.into_values().collect()
}

/// Bug density per module: bug-fixing commits touching the module, divided
/// by its lines of code. A commit touching several modules counts once in
/// each; modules with fixes but no recorded LOC are an error.
pub fn bug_density(
    bugfix_commits: &BTreeSet<String>,
    commit_modules: &BTreeMap<String, BTreeSet<String>>,
    loc_per_module: &BTreeMap<String, u64>,
) -> Result<BTreeMap<String, f64>, TurnoverError> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for hash in bugfix_commits {
        if let Some(modules) = commit_modules.get(hash) {
            for module in modules {
                *counts.entry(module).or_insert(0) += 1;
            }
        }
    }
    let mut densities = BTreeMap::new();
    let mut modules: BTreeSet<&str> = loc_per_module.keys().map(|s| s.as_str()).collect();
    modules.extend(counts.keys());
    for module in modules {
        let fixes = counts.get(module).copied().unwrap_or(0);
        let loc = loc_per_module.get(module).copied().unwrap_or(0);
        if loc == 0 {
            if fixes > 0 {
                return Err(TurnoverError::ZeroLocModule(module.to_string()));
            }
            continue;
        }
        densities.insert(module.to_string(), fixes as f64 / loc as f64);
    }
    Ok(densities)
}

/// One turnover-quality correlation: either an interval or a reasoned absence.
#[derive(Debug, Clone, PartialEq)]
pub enum CorrelationOutcome {
    Estimated {
        ci: ConfidenceInterval,
        significance: Significance,
    },
    Absent {
        reason: String,
    },
}

/// Bootstrap Spearman CI between a group-activity metric and bug density over
/// modules. Fewer than three modules, or a degenerate statistic on every
/// resample, yields an absent result rather than an error.
pub fn turnover_quality_correlation(
    activity_per_module: &BTreeMap<String, f64>,
    density_per_module: &BTreeMap<String, f64>,
    b: usize,
    seed: u64,
) -> CorrelationOutcome {
    let pairs: Vec<(f64, f64)> = activity_per_module
        .iter()
        .filter_map(|(module, activity)| {
            density_per_module
                .get(module)
                .map(|density| (*activity, *density))
        })
        .collect();
    if pairs.len() < 3 {
        return CorrelationOutcome::Absent {
            reason: format!("insufficient modules ({} < 3)", pairs.len()),
        };
    }
    match stats::bootstrap_spearman_ci(&pairs, b, seed, 0.95) {
        Ok(ci) => {
            let significance = stats::significance(&ci);
            CorrelationOutcome::Estimated { ci, significance }
        }
        Err(e) => CorrelationOutcome::Absent {
            reason: e.to_string(),
        },
    }
}
