//! Scenario files and the end-to-end runner: the event-driven engine, the
//! fixed-step sweep and the oracle on one circuit, plus their comparison.

mod cache;
mod config;
mod report;
mod run;

pub use cache::{cached_oracle, oracle_key};
pub use config::{
    step_label, BaselineConfig, ChatterConfig, ControlConfig, DcmConfig, LawConfig, MetricsConfig,
    OracleConfig, PairConfig, Prepared, RecordConfig, Scenario, SpectrumConfig, TimingConfig,
};
pub use report::{
    compare, run_scenario, summarize, write_outputs, ChatterSummary, CommutationCheck, Comparison, RunInfo,
    RunOptions, ScenarioResult, SpectrumSummary, Summary,
};
#[cfg(feature = "parallel")]
pub use run::run_sweep_parallel;
pub use run::{
    run_baseline, run_es, run_oracle, run_sweep, run_sweep_sequential, thread_cap, DiodeChange, RunOutput,
};
