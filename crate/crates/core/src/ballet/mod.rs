//! Region-of-interest filtering and confidence-interval acquisition.
//!
//! Each iteration fits a global GP on every observation, keeps the pool
//! candidates whose UCB reaches the largest LCB, fits a second GP on the
//! observations inside that region, and scores candidates with one of the
//! acquisition families below.

mod acquisition;
mod bounds;
mod state;

pub use acquisition::{expected_improvement, select_next, AcquisitionFamily, AcquisitionSpec, MethodName, Scope};
pub use bounds::{
    beta_schedule, confidence_bounds, filter_roi, intersect_bounds, intersect_bounds_historical, max_interval_width,
    partition_observations, ConfidenceBounds, IntersectMode, IntersectedBounds, ModelTag, Observation,
    RegionOfInterest,
};
pub use state::{BalletConfig, BalletState, FilterBeta, ScoredCandidates, StepDiagnostics, StepOutcome};
