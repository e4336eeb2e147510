//! Batch front-end for the Bernoulli free boundary solver.
//!
//! One invocation reads a JSON [`config::RunConfig`], runs a single mode and
//! writes its artifacts into a run directory:
//!
//! - `config-echo.json`: the parsed configuration with defaults filled in
//! - `states/NNNN.json`: one record per solution state
//! - `diagnostics.csv`: per-step time series (single row outside flow runs)
//! - `summary.json`: status, error record, terminal state; deterministic
//! - `timing.json`: wall time, kept apart so summaries stay reproducible
//! - `oracle.csv`: radial branch table (oracle mode)
//!
//! Exit codes: 0 ok, 2 configuration error, 3 solver error, 4 I/O error.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod plot;
pub mod run;

pub use config::{Mode, RunConfig};
pub use error::{CliError, Result};
pub use plot::emit_plot_data;
pub use run::{execute, RunRequest};
