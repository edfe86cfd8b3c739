//! Scenario files, trace IO, batch execution and tabular output for the
//! `terra-sim` command-line tool.

pub mod batch;
pub mod csv_out;
pub mod presets;
pub mod report;
pub mod scenario_file;
pub mod trace_io;

pub use scenario_file::ScenarioFile;
