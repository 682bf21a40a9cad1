//! Scenario configuration, single runs, parameter sweeps and benchmarks.

mod bench;
mod config;
mod demo;
mod run;
mod sweep;

pub use bench::{
    benchmark, dense_implicit_operator, growth_ratio, rows_json, BenchMethod, BenchMode, BenchRow,
    DENSE_LIMIT,
};
pub use config::{CloudSource, Disk, ScenarioConfig, Solver, StartSpec, TargetSpec};
pub use demo::{control_demo, demo_csv, DemoConfig, DemoRecord};
pub use run::{
    parse_trace_csv, prepare, run_scenario, simulate, Prepared, RunSummary, RunTrace, StepRecord,
    TRACE_HEADER,
};
pub use sweep::{
    aggregate, parse_runs_csv, run_sweep, runs_csv, CellSummary, SweepReport, SweepRun, SweepSpec,
    FLAG_THRESHOLD, WORKERS_ENV,
};
