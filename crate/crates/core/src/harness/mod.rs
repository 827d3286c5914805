//! Experiment orchestration: configs, instance generation, the solve
//! pipeline, reference solutions, metrics and reports.

mod config;
mod fit;
mod metrics;
mod oracle;
mod pipeline;
mod reference;
mod report;

pub use config::{
    load_case_file, AnsatzConfig, BoundsConfig, ExperimentConfig, FitConfig, InitConfig, InstanceConfig, Model, SolverConfig,
};
pub use fit::{dual_target, fit_ansatz, fit_one, run_fit, FitOptions, FitReport, FitResult};
pub use metrics::{compute_metrics, dual_series, lagrangian_error, relative_error, violations, FoundSolution, Metrics, Violations, VIOLATION_FLOOR};
pub use oracle::{reference_for, solve_case, solve_from, OracleOptions, OracleSolution, MAX_ORACLE_BUSES};
pub use pipeline::{
    base_case, context_for, generate_instances, load_references, prepare, run_experiment, solve_classical, solve_model, solve_quantum,
    ModelRun, PatternStats, PowerFlowVoltages, PreparedCase, RunFailure, RunReport,
};
pub use reference::{generator_setpoints, market_multipliers, ReferenceInstance, ReferenceSolution};
pub use report::{emit_report, load_report, render, report_json, table1, table1_csv, ReportFormat, Table1Row};
