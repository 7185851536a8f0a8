//! Scenario loading, experiment drivers and report/plot emission for the
//! `declqr` command-line tool.

pub mod analysis;
pub mod commands;
pub mod experiments;
pub mod output;
pub mod scenario;

pub use analysis::{analyze, AnalysisOptions, AnalysisReport};
pub use experiments::{counterexample_acl, sweep2d, StabilityRegion};
pub use output::{emit_csv, emit_svg_heatmap};
pub use scenario::{load_scenario, Scenario};
