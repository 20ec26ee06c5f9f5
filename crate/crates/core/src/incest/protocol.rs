use serde::{Deserialize, Serialize};

use super::{
    achievability, fuse_fair, fuse_naive, IncestError, InformationFlowGraph, LogBeliefLedger,
};
use crate::belief::{
    hmm_filter, myopic_action, social_learning_filter, ActionRule, Belief, ModelParams,
};
use crate::rng::SimRng;

/// How a node combines the public beliefs it receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    /// Log-belief combination with the exact incest-removal weights.
    #[default]
    Fair,
    /// Normalised sum of the received beliefs.
    Naive,
}

/// Everything one node did.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub node: usize,
    pub agent: usize,
    pub epoch: usize,
    /// Fused prior `π_{n-}` before the private observation.
    pub fused: Belief,
    pub observation: usize,
    /// `η_n = hmm_filter(π_{n-}, y_n)`.
    pub private_belief: Belief,
    pub action: usize,
    /// `π_n = T(π_{n-}, a_n)`, the belief others receive.
    pub public_belief: Belief,
    pub achievable: bool,
    pub weights: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReputationRun {
    pub true_state: usize,
    pub records: Vec<NodeRecord>,
}

impl ReputationRun {
    pub fn actions(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.action).collect()
    }
}

pub(super) fn check_model(params: &ModelParams) -> Result<(), IncestError> {
    if !params.transition().is_identity() {
        return Err(IncestError::NonIdentityTransition);
    }
    if !params.strictly_positive_likelihood() {
        return Err(IncestError::DegenerateLikelihood);
    }
    Ok(())
}

/// Samples the state once from the prior, then walks the nodes in order.
pub fn run_reputation_protocol(
    graph: &InformationFlowGraph,
    params: &ModelParams,
    seed: u64,
    mode: FusionMode,
) -> Result<ReputationRun, IncestError> {
    check_model(params)?;
    let mut rng = SimRng::new(seed);
    let true_state = rng.categorical(params.prior().probs());
    let observations: Vec<usize> = (0..graph.node_count())
        .map(|_| rng.categorical(params.observation().row(true_state)))
        .collect();
    let records = run_reputation_with_observations(graph, params, &observations, mode)?;
    Ok(ReputationRun {
        true_state,
        records,
    })
}

/// Deterministic protocol for a given observation sequence (`observations[n-1]` is `y_n`).
pub fn run_reputation_with_observations(
    graph: &InformationFlowGraph,
    params: &ModelParams,
    observations: &[usize],
    mode: FusionMode,
) -> Result<Vec<NodeRecord>, IncestError> {
    check_model(params)?;
    if observations.len() != graph.node_count() {
        return Err(IncestError::LengthMismatch {
            expected: graph.node_count(),
            got: observations.len(),
        });
    }
    let view = graph.transitive_closure()?;
    let mut ledger = LogBeliefLedger::new(params.prior().clone());
    let mut records: Vec<NodeRecord> = Vec::with_capacity(graph.node_count());
    for (idx, &obs) in observations.iter().enumerate() {
        let node = idx + 1;
        let check = achievability(&view, node)?;
        let received = view.single_hop(node);
        let fused = match mode {
            FusionMode::Fair => fuse_fair(&ledger.restricted(&received), &check)?,
            FusionMode::Naive if received.is_empty() => params.prior().clone(),
            FusionMode::Naive => {
                let beliefs: Vec<Belief> = received
                    .iter()
                    .map(|&m| records[m - 1].public_belief.clone())
                    .collect();
                fuse_naive(&beliefs)?
            }
        };
        let private_belief = hmm_filter(&fused, obs, params)?;
        let action = match params.action_rule() {
            ActionRule::Myopic => myopic_action(&private_belief, params.costs()),
            ActionRule::RevealObservation => obs,
        };
        let (public_belief, _) = social_learning_filter(&fused, action, params)?;
        ledger.record(node, &public_belief)?;
        let (agent, epoch) = graph.coordinates(node);
        records.push(NodeRecord {
            node,
            agent,
            epoch,
            fused,
            observation: obs,
            private_belief,
            action,
            public_belief,
            achievable: check.achievable,
            weights: check.weights.weights,
        });
    }
    Ok(records)
}
