//! Stopping problems on the two-state belief simplex.
//!
//! The belief is summarised by `p = π(2)`, the mass on the second state. In
//! the change-detection problems the first state is the absorbing
//! post-change state, so `p` is the probability that no change has happened
//! yet and announcing costs `f·p` in expectation.
//!
//! Every solver runs value iteration on the uniform grid `p_g = g/(G-1)`.
//! Backups interpolate the previous iterate linearly; executing a policy
//! uses the nearest grid point.

mod grid;
mod privacy;
mod qd;
mod simulate;

use thiserror::Error;

use crate::belief::FilterError;

pub use grid::{count_policy_switches, PolicyGrid, SolverSettings, Switch, ValueInit};
pub use privacy::{
    privacy_rollout, solve_privacy_stopping, PrivacyCosts, PrivacyLevel, PrivacyPolicy,
    PrivacyTrace,
};
pub use qd::{solve_classical_qd, solve_social_qd, Decision, DetectionCosts};
pub use simulate::{
    rollout_detection, simulate_detection, AlwaysStop, DetectionSummary, NeverStop,
    SimulationSettings, StoppingOutcome, StoppingRule, ThresholdRule,
};

#[derive(Debug, Error, PartialEq)]
pub enum DetectionError {
    #[error("stopping problems need a two-state model, got {states} states")]
    UnsupportedDimension { states: usize },
    #[error("first state must be absorbing: transition row 1 must be (1, 0)")]
    NotAbsorbing,
    #[error("observation likelihoods must be strictly positive")]
    DegenerateLikelihood,
    #[error("privacy stopping needs a static state (identity transition matrix)")]
    NonIdentityTransition,
    #[error("grid needs at least 2 points, got {0}")]
    GridTooSmall(usize),
    #[error("costs must be finite and nonnegative with d > 0 or f > 0")]
    InvalidCosts,
    #[error("discount must lie in [0, 1), got {0}")]
    InvalidDiscount(f64),
    #[error("target state {target} outside 0..{states}")]
    InvalidTarget { target: usize, states: usize },
    #[error("cost matrix has shape {rows}x{cols}, expected {expected_rows} rows")]
    CostShape {
        rows: usize,
        cols: usize,
        expected_rows: usize,
    },
    #[error("at least one run is required")]
    NoRuns,
    #[error(transparent)]
    Filter(#[from] FilterError),
}
