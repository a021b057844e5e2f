//! Repository mining laboratory: one extraction-and-analysis pipeline with
//! pluggable variants at every stage where published mining tools diverge.
//!
//! The crate is organised along the pipeline:
//!
//! - [`gitio`]: invoke git and parse logs, numstat diffs and blame into fact tables
//! - [`identity`]: resolve raw (name, email) pairs into canonical developers
//! - [`entities`]: attribute changed lines to code entities or proximity blocks
//! - [`windows`]: split histories into analysis windows
//! - [`network`]: per-window developer networks under three construction variants
//! - [`stats`]: correlations, agreement, least squares, bootstrap intervals
//! - [`studies`]: the three replication suites (roles, brooks, turnover)
//! - [`agreement`]: cross-variant divergence and conclusion-stability verdicts
//! - [`config`] / [`pipeline`]: variant configuration and orchestration

pub mod agreement;
pub mod config;
pub mod csvio;
pub mod entities;
pub mod gitio;
pub mod identity;
pub mod network;
pub mod pipeline;
pub mod repogen;
pub mod stats;
pub mod studies;
pub mod svg;
pub mod windows;

/// Tool version embedded in every output artifact.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
