//! Experiment orchestration: configs, multi-trial runs, regret ledgers and
//! CSV export.

pub mod config;
pub mod experiment;
pub mod export;
pub mod theta;

pub use config::{
    AlphaSource, ExperimentConfig, GapStyle, GeometrySpec, MatrixSource, PolicyKind, ThetaSource,
};
pub use experiment::{
    aggregate, mean_std, run_experiment, run_experiment_with_threads, run_trial, worker_count,
    AggregateCurves, CycleSummary, ExperimentResult, LedgerRow, MeanStd, OraclePolicy,
    RegretLedger, Summary, TrialResult, THREADS_ENV,
};
pub use export::export_csv;
pub use theta::{make_gap_controlled_theta, uniform_theta};
