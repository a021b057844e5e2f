//! Replication suite 2: team size versus productivity. Pearson matrix plus
//! linear and quadratic least-squares models with network controls.
//!
//! Transform policy (documented defaults): counts, effort and team size get
//! log(1+x) (signed for the function delta, which may be negative); ratio
//! metrics get a square root. Productivity targets are normalized per team
//! member before the transform.

use thiserror::Error;

use crate::stats::{self, ModelFit, StatsError};

#[derive(Debug, Error, PartialEq)]
pub enum BrooksError {
    #[error("correlation needs at least 3 complete rows (got {0})")]
    TooFewRows(usize),
    #[error("column {0} is constant; correlation undefined")]
    ConstantColumn(String),
}

/// Productivity and collaboration measures of one analysis window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowProductivity {
    pub project: String,
    pub window: usize,
    pub commits: u32,
    /// Declared entities at window end minus at window start.
    pub delta_functions: i64,
    pub halstead_effort: f64,
    pub team_size: u32,
    pub mean_in_degree: Option<f64>,
    pub mean_fmodr: Option<f64>,
    pub n_nodes: u32,
}

fn log1p_signed(x: f64) -> f64 {
    x.signum() * x.abs().ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ProductivityTarget {
    Commits,
    DeltaFunctions,
    HalsteadEffort,
}

impl ProductivityTarget {
    pub const ALL: [ProductivityTarget; 3] = [
        ProductivityTarget::Commits,
        ProductivityTarget::DeltaFunctions,
        ProductivityTarget::HalsteadEffort,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ProductivityTarget::Commits => "commits",
            ProductivityTarget::DeltaFunctions => "delta_functions",
            ProductivityTarget::HalsteadEffort => "halstead_effort",
        }
    }

    /// Per-member, transformed target value.
    fn transformed(self, row: &WindowProductivity) -> f64 {
        let per_member = |v: f64| v / row.team_size.max(1) as f64;
        match self {
            ProductivityTarget::Commits => log1p_signed(per_member(row.commits as f64)),
            ProductivityTarget::DeltaFunctions => {
                log1p_signed(per_member(row.delta_functions as f64))
            }
            ProductivityTarget::HalsteadEffort => log1p_signed(per_member(row.halstead_effort)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ControlVar {
    MeanInDegree,
    MeanFmodr,
    NNodes,
}

impl ControlVar {
    pub const ALL: [ControlVar; 3] = [
        ControlVar::MeanInDegree,
        ControlVar::MeanFmodr,
        ControlVar::NNodes,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ControlVar::MeanInDegree => "mean_in_degree",
            ControlVar::MeanFmodr => "mean_fmodr",
            ControlVar::NNodes => "n_nodes",
        }
    }

    fn transformed(self, row: &WindowProductivity) -> Option<f64> {
        match self {
            ControlVar::MeanInDegree => row.mean_in_degree.map(log1p_signed),
            ControlVar::MeanFmodr => row.mean_fmodr.map(|v| v.max(0.0).sqrt()),
            ControlVar::NNodes => Some(log1p_signed(row.n_nodes as f64)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelForm {
    Linear,
    Quadratic,
}

impl ModelForm {
    pub fn label(self) -> &'static str {
        match self {
            ModelForm::Linear => "linear",
            ModelForm::Quadratic => "quadratic",
        }
    }
}

/// The transformed analysis table in column-major form.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    pub columns: Vec<(String, Vec<f64>)>,
}

/// Build the transformed metric table from complete rows (rows missing a
/// network metric are dropped, so every column has equal length).
pub fn transformed_table(rows: &[WindowProductivity]) -> MetricTable {
    let complete: Vec<&WindowProductivity> = rows
        .iter()
        .filter(|r| r.mean_in_degree.is_some() && r.mean_fmodr.is_some())
        .collect();
    let col = |name: &str, f: &dyn Fn(&WindowProductivity) -> f64| {
        (
            name.to_string(),
            complete.iter().map(|r| f(r)).collect::<Vec<f64>>(),
        )
    };
    MetricTable {
        columns: vec![
            col("commits", &|r| ProductivityTarget::Commits.transformed(r)),
            col("delta_functions", &|r| {
                ProductivityTarget::DeltaFunctions.transformed(r)
            }),
            col("halstead_effort", &|r| {
                ProductivityTarget::HalsteadEffort.transformed(r)
            }),
            col("team_size", &|r| log1p_signed(r.team_size as f64)),
            col("mean_in_degree", &|r| {
                ControlVar::MeanInDegree.transformed(r).unwrap_or(0.0)
            }),
            col("mean_fmodr", &|r| {
                ControlVar::MeanFmodr.transformed(r).unwrap_or(0.0)
            }),
            col("n_nodes", &|r| log1p_signed(r.n_nodes as f64)),
        ],
    }
}

/// Symmetric Pearson matrix with unit diagonal over the table's columns.
pub fn correlation_matrix(table: &MetricTable) -> Result<Vec<Vec<f64>>, BrooksError> {
    let n_rows = table.columns.first().map(|(_, v)| v.len()).unwrap_or(0);
    if n_rows < 3 {
        return Err(BrooksError::TooFewRows(n_rows));
    }
    let k = table.columns.len();
    let mut matrix = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let r = stats::pearson(&table.columns[i].1, &table.columns[j].1).map_err(|e| {
                match e {
                    StatsError::UndefinedCorrelation(msg) if msg.starts_with('x') => {
                        BrooksError::ConstantColumn(table.columns[i].0.clone())
                    }
                    _ => BrooksError::ConstantColumn(table.columns[j].0.clone()),
                }
            })?;
            matrix[i][j] = r;
            matrix[j][i] = r;
        }
    }
    Ok(matrix)
}

/// One requested model and its outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct BrooksModel {
    pub target: ProductivityTarget,
    pub form: ModelForm,
    pub controls: Vec<ControlVar>,
    pub fit: Result<ModelFit, StatsError>,
}

/// Core regression: y over (intercept, TS[, TS^2][, controls...]).
pub fn fit_target_model(
    y: &[f64],
    ts: &[f64],
    controls: &[(String, Vec<f64>)],
    form: ModelForm,
) -> Result<ModelFit, StatsError> {
    let mut names: Vec<String> = vec!["intercept".into(), "ts".into()];
    if form == ModelForm::Quadratic {
        names.push("ts2".into());
    }
    for (name, _) in controls {
        names.push(name.clone());
    }
    let rows: Vec<Vec<f64>> = (0..y.len())
        .map(|i| {
            let mut row = vec![1.0, ts[i]];
            if form == ModelForm::Quadratic {
                row.push(ts[i] * ts[i]);
            }
            for (_, col) in controls {
                row.push(col[i]);
            }
            row
        })
        .collect();
    let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    stats::ols(&rows, y, &name_refs)
}

/// Fit one model per (target, form, control set). Rows missing a requested
/// control are dropped for that model only.
pub fn fit_models(
    rows: &[WindowProductivity],
    targets: &[ProductivityTarget],
    forms: &[ModelForm],
    control_sets: &[Vec<ControlVar>],
) -> Vec<BrooksModel> {
    let mut out = Vec::new();
    for &target in targets {
        for &form in forms {
            for controls in control_sets {
                let usable: Vec<&WindowProductivity> = rows
                    .iter()
                    .filter(|r| controls.iter().all(|c| c.transformed(r).is_some()))
                    .collect();
                let y: Vec<f64> = usable.iter().map(|r| target.transformed(r)).collect();
                let ts: Vec<f64> = usable
                    .iter()
                    .map(|r| log1p_signed(r.team_size as f64))
                    .collect();
                let control_cols: Vec<(String, Vec<f64>)> = controls
                    .iter()
                    .map(|c| {
                        (
                            c.label().to_string(),
                            usable
                                .iter()
                                .map(|r| c.transformed(r).expect("filtered above"))
                                .collect(),
                        )
                    })
                    .collect();
                out.push(BrooksModel {
                    target,
                    form,
                    controls: controls.clone(),
                    fit: fit_target_model(&y, &ts, &control_cols, form),
                });
            }
        }
    }
    out
}
