//! Config-driven sweep runner, artifact emission, the command-line surface,
//! and the acceptance checks behind `frlab check`.

pub mod acceptance;
pub mod cli;
pub mod config;
pub mod output;
pub mod svg;
pub mod sweep;

pub use config::{Design, ExperimentConfig, GridPoint, GridSpec};
pub use output::{emit_bounds_csv, emit_csv};
pub use svg::{emit_svg_plot, PlotOptions};
pub use sweep::{run_sweep, BoundRow, SweepResult, SweepRow};
