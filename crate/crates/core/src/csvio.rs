//! Deterministic CSV output with embedded metadata.
//!
//! Every table starts with `#`-prefixed comment lines carrying the fully
//! resolved variant configuration and tool version, followed by the declared
//! header and rows. Readers of these files should skip leading `#` lines.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

/// Render metadata lines for a flattened configuration.
pub fn metadata_lines(project: &str, config: &BTreeMap<String, String>) -> Vec<String> {
    let mut lines = vec![
        format!("# tool = gitprism {}", crate::TOOL_VERSION),
        format!("# project = {project}"),
    ];
    for (key, value) in config {
        lines.push(format!("# {key} = {value}"));
    }
    lines
}

/// Write a CSV file: metadata comments, exact header, then rows.
pub fn write_csv(
    path: &Path,
    metadata: &[String],
    header: &[&str],
    rows: &[Vec<String>],
) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut buf = Vec::new();
    for line in metadata {
        writeln!(buf, "{line}")?;
    }
    {
        let mut writer = csv::Writer::from_writer(&mut buf);
        writer.write_record(header)?;
        for row in rows {
            writer.write_record(row)?;
        }
        writer.flush()?;
    }
    std::fs::write(path, buf)
}

/// Shortest round-trip decimal rendering; stable across platforms.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v}")
    }
}

/// Render an optional value, `-` when absent.
pub fn fmt_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    match v {
        Some(v) => format!("{v}"),
        None => "-".to_string(),
    }
}
