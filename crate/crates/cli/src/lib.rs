//! Scenario runner for the gradest core: TOML scenarios in, CSV tables and TOML
//! documents out.
//!
//! Exit codes follow one contract: 0 when every check passes, 2 when checks ran
//! and failed, 1 on configuration or runtime errors.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{Outcome, Status};
pub use config::{Resolved, ScenarioConfig};
