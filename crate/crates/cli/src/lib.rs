//! Scenario files, experiment orchestration and report emission for `ladderlab`.

pub mod config;
pub mod report;
pub mod run;

pub use config::{parse_scenario, ExperimentKind, Scenario, ScenarioError, Violation, ViolationKind};
pub use report::{emit_report, rows_to_csv, summary_json};
pub use run::{run_experiment, ExperimentReport, ReportBundle, Row, Rule, Status};
