//! The three replication study suites.

pub mod brooks;
pub mod halstead;
pub mod roles;
pub mod turnover;
