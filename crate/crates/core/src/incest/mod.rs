//! Data-incest-free social learning over information-flow graphs.
//!
//! Node `n = s + S(k-1)` is agent `s` acting at epoch `k`. An edge `m → n`
//! means node `n` sees the action of node `m`. Because the same action can
//! reach a node along several paths, fusing the received public beliefs
//! naively counts it more than once. The fair fusion weights
//! `w_n = T_{n-1}⁻¹ t_n` combine log-beliefs so that every action in the
//! node's history is counted exactly once, which is possible only when every
//! nonzero weight sits on a direct neighbour.
//!
//! Node numbers are 1-based throughout this module.

mod fusion;
mod graph;
mod oracle;
mod protocol;

use thiserror::Error;

use crate::belief::{FilterError, ModelError};

pub use fusion::{
    achievability, fuse_fair, fuse_naive, fusion_weights, Achievability, FusionWeights,
    LogBeliefLedger,
};
pub use graph::{node_index, parse_edge_list, ClosureView, InformationFlowGraph};
pub use oracle::{oracle_fair_rating, ORACLE_MAX_SEQUENCES};
pub use protocol::{
    run_reputation_protocol, run_reputation_with_observations, FusionMode, NodeRecord,
    ReputationRun,
};

#[derive(Debug, Error, PartialEq)]
pub enum IncestError {
    #[error("agent {agent} outside 1..={agents}")]
    InvalidAgent { agent: usize, agents: usize },
    #[error("epoch must be at least 1")]
    InvalidEpoch,
    #[error("edge {from} -> {to} violates causality (source must precede target)")]
    CausalityViolation { from: usize, to: usize },
    #[error("node {node} outside 1..={nodes}")]
    NodeOutOfRange { node: usize, nodes: usize },
    #[error("reachability closure and sgn((I - A)^-1) disagree at ({row}, {col})")]
    ClosureMismatch { row: usize, col: usize },
    #[error("fusion weight for node {node} overflowed i64")]
    WeightOverflow { node: usize },
    #[error("fair rating not achievable at node {node}: nonzero weights on non-neighbours {violations:?}")]
    NotAchievable { node: usize, violations: Vec<usize> },
    #[error("node {node} needs the belief of node {missing}, which it did not receive")]
    MissingBelief { node: usize, missing: usize },
    #[error("fused log-belief at node {node} is not a valid distribution")]
    DegenerateFusion { node: usize },
    #[error("naive fusion needs at least one received belief")]
    NothingReceived,
    #[error("reputation protocol needs a static state (identity transition matrix)")]
    NonIdentityTransition,
    #[error("reputation protocol needs strictly positive observation likelihoods")]
    DegenerateLikelihood,
    #[error("enumeration over {sequences} observation sequences exceeds the oracle limit")]
    TooLarge { sequences: u128 },
    #[error("recorded actions have zero probability under the model")]
    ImpossibleActions,
    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("edge list line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
