//! Benchmark objectives, candidate pools, the trial runner and aggregation.

mod aggregate;
mod objectives;
mod pool;
mod trial;

pub use aggregate::{aggregate, mean_se, MeanSe, SummaryRow, TraceSummary};
pub use objectives::{hdbo_eval, toy1d_eval, HDBO_DIM};
pub use pool::{generate_pool, load_pool_csv, CandidatePool, ObjectiveKind, ObjectiveSpec};
pub use trial::{
    default_pool_size, run_trial, run_trial_on_pool, trial_pool, ExperimentConfig, FilterSchedule, Phase, TraceRecord,
    TrialTrace,
};
