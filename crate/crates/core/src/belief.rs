//! Finite-state Bayesian machinery shared by every engine.
//!
//! A public belief `π` is updated by the agents' actions rather than by their
//! observations. The likelihood of an action given the state,
//!
//! ```text
//! R_a(i) = Σ_y 1{a(π, y) = a} · B(i, y),    a(π, y) = argmin_a c_aᵀ η(π, y)
//! ```
//!
//! is itself a function of `π`, which is what makes herding possible: when
//! `a(π, ·)` is constant the action carries no information and the public
//! belief only moves by the prediction `Pᵀπ`.

use std::fmt;

use thiserror::Error;

use crate::matrix::Matrix;

/// Tolerance on row sums of stochastic matrices and on belief mass.
pub const SUM_TOL: f64 = 1e-12;

/// Probability mass over the `X` states.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief(Vec<f64>);

impl Belief {
    /// Validates a user supplied pmf and renormalises it exactly.
    pub fn new(probs: Vec<f64>) -> Result<Self, ModelError> {
        let mut issues = Vec::new();
        check_pmf("prior", &probs, &mut issues);
        if !issues.is_empty() {
            return Err(ModelError::Invalid(issues));
        }
        let total: f64 = probs.iter().sum();
        Ok(Belief(probs.into_iter().map(|p| p / total).collect()))
    }

    /// Normalises nonnegative weights; `None` when the mass is zero or not finite.
    pub fn from_weights(weights: Vec<f64>) -> Option<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() || weights.iter().any(|&w| w < 0.0) {
            return None;
        }
        Some(Belief(weights.into_iter().map(|w| w / total).collect()))
    }

    pub fn uniform(states: usize) -> Self {
        Belief(vec![1.0 / states as f64; states])
    }

    pub fn point_mass(states: usize, state: usize) -> Self {
        let mut p = vec![0.0; states];
        p[state] = 1.0;
        Belief(p)
    }

    /// Two-state belief `(1 - p, p)` parametrised by the mass on the second state.
    pub fn two_state(p: f64) -> Self {
        assert!((0.0..=1.0).contains(&p), "probability out of range: {p}");
        Belief(vec![1.0 - p, p])
    }

    #[inline]
    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, state: usize) -> f64 {
        self.0[state]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Most probable state, smallest index on ties.
    pub fn map_state(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    pub fn total_variation(&self, other: &Belief) -> f64 {
        0.5 * self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    pub fn max_abs_diff(&self, other: &Belief) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `KL(self ‖ other)`; infinite when `other` misses mass that `self` has.
    pub fn kl_divergence(&self, other: &Belief) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, q)| {
                if *q > 0.0 {
                    p * (p / q).ln()
                } else {
                    f64::INFINITY
                }
            })
            .sum()
    }
}

impl fmt::Display for Belief {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|p| format!("{p:.6}")).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// How an agent turns its private belief into a broadcast action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ActionRule {
    /// `argmin_a c_aᵀ η`, smallest action index on ties.
    #[default]
    Myopic,
    /// The agent broadcasts its raw observation (`A = Y`, `a = y`); social
    /// learning collapses to ordinary HMM filtering.
    RevealObservation,
}

/// One violated model precondition.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelIssue {
    TooFew {
        what: &'static str,
        count: usize,
    },
    NotSquare {
        rows: usize,
        cols: usize,
    },
    RowMismatch {
        matrix: &'static str,
        expected: usize,
        got: usize,
    },
    NonFinite {
        matrix: &'static str,
        row: usize,
        col: usize,
    },
    Negative {
        matrix: &'static str,
        row: usize,
        col: usize,
    },
    RowSum {
        matrix: &'static str,
        row: usize,
        sum: f64,
    },
    ZeroLikelihoodRow {
        row: usize,
    },
    PriorLength {
        expected: usize,
        got: usize,
    },
    RevealNeedsActionPerObservation {
        actions: usize,
        observations: usize,
    },
}

impl fmt::Display for ModelIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelIssue::TooFew { what, count } => write!(f, "need at least 2 {what}, got {count}"),
            ModelIssue::NotSquare { rows, cols } => {
                write!(f, "transition matrix must be square, got {rows}x{cols}")
            }
            ModelIssue::RowMismatch { matrix, expected, got } => {
                write!(f, "{matrix} has {got} rows, expected one per state ({expected})")
            }
            ModelIssue::NonFinite { matrix, row, col } => {
                write!(f, "{matrix} entry ({}, {}) is not finite", row + 1, col + 1)
            }
            ModelIssue::Negative { matrix, row, col } => {
                write!(f, "{matrix} entry ({}, {}) is negative", row + 1, col + 1)
            }
            ModelIssue::RowSum { matrix, row, sum } => {
                write!(f, "{matrix} row {} sums to {sum}, expected 1", row + 1)
            }
            ModelIssue::ZeroLikelihoodRow { row } => {
                write!(f, "observation likelihood row {} is all zeros", row + 1)
            }
            ModelIssue::PriorLength { expected, got } => {
                write!(f, "prior has {got} entries, expected {expected}")
            }
            ModelIssue::RevealNeedsActionPerObservation { actions, observations } => write!(
                f,
                "observation-revealing agents need one action per observation ({actions} actions, {observations} observations)"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model: {}", join_issues(.0))]
    Invalid(Vec<ModelIssue>),
}

impl ModelError {
    pub fn issues(&self) -> &[ModelIssue] {
        match self {
            ModelError::Invalid(v) => v,
        }
    }
}

fn join_issues(issues: &[ModelIssue]) -> String {
    issues
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error("observation {obs} has zero probability under the predicted belief")]
    ZeroLikelihood { obs: usize },
    #[error("action {action} has zero probability under the public belief")]
    ZeroProbabilityAction { action: usize },
    #[error("observation index {obs} out of range (Y = {count})")]
    ObservationOutOfRange { obs: usize, count: usize },
    #[error("action index {action} out of range (A = {count})")]
    ActionOutOfRange { action: usize, count: usize },
}

fn check_pmf(what: &'static str, probs: &[f64], issues: &mut Vec<ModelIssue>) {
    let mut clean = true;
    for (j, &p) in probs.iter().enumerate() {
        if !p.is_finite() {
            issues.push(ModelIssue::NonFinite {
                matrix: what,
                row: 0,
                col: j,
            });
            clean = false;
        } else if p < 0.0 {
            issues.push(ModelIssue::Negative {
                matrix: what,
                row: 0,
                col: j,
            });
            clean = false;
        }
    }
    let sum: f64 = probs.iter().sum();
    if clean && (sum - 1.0).abs() > SUM_TOL {
        issues.push(ModelIssue::RowSum {
            matrix: what,
            row: 0,
            sum,
        });
    }
}

fn check_stochastic(what: &'static str, m: &Matrix, issues: &mut Vec<ModelIssue>) {
    for i in 0..m.rows() {
        let mut clean = true;
        for (j, &v) in m.row(i).iter().enumerate() {
            if !v.is_finite() {
                issues.push(ModelIssue::NonFinite {
                    matrix: what,
                    row: i,
                    col: j,
                });
                clean = false;
            } else if v < 0.0 {
                issues.push(ModelIssue::Negative {
                    matrix: what,
                    row: i,
                    col: j,
                });
                clean = false;
            }
        }
        if !clean {
            continue;
        }
        let sum: f64 = m.row(i).iter().sum();
        if what == "observation likelihood" && sum == 0.0 {
            issues.push(ModelIssue::ZeroLikelihoodRow { row: i });
        } else if (sum - 1.0).abs() > SUM_TOL {
            issues.push(ModelIssue::RowSum {
                matrix: what,
                row: i,
                sum,
            });
        }
    }
}

/// Transition matrix `P` (X×X), observation likelihood `B` (X×Y), action
/// costs `c` (X×A) and prior `π₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    transition: Matrix,
    observation: Matrix,
    costs: Matrix,
    prior: Belief,
    action_rule: ActionRule,
}

impl ModelParams {
    pub fn new(
        transition: Matrix,
        observation: Matrix,
        costs: Matrix,
        prior: Vec<f64>,
    ) -> Result<Self, ModelError> {
        Self::with_rule(transition, observation, costs, prior, ActionRule::Myopic)
    }

    /// Builds the model and reports every violated precondition at once.
    pub fn with_rule(
        transition: Matrix,
        observation: Matrix,
        costs: Matrix,
        prior: Vec<f64>,
        action_rule: ActionRule,
    ) -> Result<Self, ModelError> {
        let mut issues = Vec::new();
        let states = transition.rows();
        if transition.rows() != transition.cols() {
            issues.push(ModelIssue::NotSquare {
                rows: transition.rows(),
                cols: transition.cols(),
            });
        }
        if states < 2 {
            issues.push(ModelIssue::TooFew {
                what: "states",
                count: states,
            });
        }
        if observation.cols() < 2 {
            issues.push(ModelIssue::TooFew {
                what: "observations",
                count: observation.cols(),
            });
        }
        if costs.cols() < 2 {
            issues.push(ModelIssue::TooFew {
                what: "actions",
                count: costs.cols(),
            });
        }
        for (name, m) in [
            ("observation likelihood", &observation),
            ("cost matrix", &costs),
        ] {
            if m.rows() != states {
                issues.push(ModelIssue::RowMismatch {
                    matrix: name,
                    expected: states,
                    got: m.rows(),
                });
            }
        }
        for i in 0..costs.rows() {
            for (j, v) in costs.row(i).iter().enumerate() {
                if !v.is_finite() {
                    issues.push(ModelIssue::NonFinite {
                        matrix: "cost matrix",
                        row: i,
                        col: j,
                    });
                }
            }
        }
        check_stochastic("transition matrix", &transition, &mut issues);
        check_stochastic("observation likelihood", &observation, &mut issues);
        if prior.len() != states {
            issues.push(ModelIssue::PriorLength {
                expected: states,
                got: prior.len(),
            });
        } else {
            check_pmf("prior", &prior, &mut issues);
        }
        if action_rule == ActionRule::RevealObservation && costs.cols() != observation.cols() {
            issues.push(ModelIssue::RevealNeedsActionPerObservation {
                actions: costs.cols(),
                observations: observation.cols(),
            });
        }
        if !issues.is_empty() {
            return Err(ModelError::Invalid(issues));
        }
        let prior = Belief::new(prior)?;
        Ok(ModelParams {
            transition,
            observation,
            costs,
            prior,
            action_rule,
        })
    }

    /// Same model with a different action rule.
    pub fn with_action_rule(&self, rule: ActionRule) -> Result<Self, ModelError> {
        Self::with_rule(
            self.transition.clone(),
            self.observation.clone(),
            self.costs.clone(),
            self.prior.probs().to_vec(),
            rule,
        )
    }

    pub fn with_transition(&self, transition: Matrix) -> Result<Self, ModelError> {
        Self::with_rule(
            transition,
            self.observation.clone(),
            self.costs.clone(),
            self.prior.probs().to_vec(),
            self.action_rule,
        )
    }

    pub fn with_prior(&self, prior: Vec<f64>) -> Result<Self, ModelError> {
        Self::with_rule(
            self.transition.clone(),
            self.observation.clone(),
            self.costs.clone(),
            prior,
            self.action_rule,
        )
    }

    pub fn transition(&self) -> &Matrix {
        &self.transition
    }

    pub fn observation(&self) -> &Matrix {
        &self.observation
    }

    pub fn costs(&self) -> &Matrix {
        &self.costs
    }

    pub fn prior(&self) -> &Belief {
        &self.prior
    }

    pub fn action_rule(&self) -> ActionRule {
        self.action_rule
    }

    pub fn state_count(&self) -> usize {
        self.transition.rows()
    }

    pub fn obs_count(&self) -> usize {
        self.observation.cols()
    }

    pub fn action_count(&self) -> usize {
        self.costs.cols()
    }

    /// True when every likelihood entry is positive.
    pub fn strictly_positive_likelihood(&self) -> bool {
        self.observation.as_slice().iter().all(|&b| b > 0.0)
    }
}

/// Prediction step `Pᵀπ`.
pub fn predict(belief: &Belief, params: &ModelParams) -> Vec<f64> {
    params.transition.transpose_mul(belief.probs())
}

/// Classical HMM filter: `η ∝ B_y Pᵀπ`.
pub fn hmm_filter(prior: &Belief, obs: usize, params: &ModelParams) -> Result<Belief, FilterError> {
    if obs >= params.obs_count() {
        return Err(FilterError::ObservationOutOfRange {
            obs,
            count: params.obs_count(),
        });
    }
    let predicted = predict(prior, params);
    bayes_update(&predicted, obs, &params.observation)
}

fn bayes_update(predicted: &[f64], obs: usize, likelihood: &Matrix) -> Result<Belief, FilterError> {
    let numerator: Vec<f64> = predicted
        .iter()
        .enumerate()
        .map(|(i, &p)| likelihood.get(i, obs) * p)
        .collect();
    Belief::from_weights(numerator).ok_or(FilterError::ZeroLikelihood { obs })
}

/// `argmin_a c_aᵀ η`; exact `<` comparison so the smallest index wins ties.
pub fn myopic_action(belief: &Belief, costs: &Matrix) -> usize {
    let mut best = 0;
    let mut best_cost = costs.column_dot(0, belief.probs());
    for a in 1..costs.cols() {
        let cost = costs.column_dot(a, belief.probs());
        if cost < best_cost {
            best = a;
            best_cost = cost;
        }
    }
    best
}

/// The action `a(π, y)` an agent holding public belief `π` takes after
/// observing each `y`.
///
/// An observation with zero probability under `Pᵀπ` is mapped to the action
/// for the prediction itself; its contribution to the action likelihood is
/// multiplied by zero predicted mass either way.
pub fn observation_actions(public: &Belief, params: &ModelParams) -> Vec<usize> {
    match params.action_rule {
        ActionRule::RevealObservation => (0..params.obs_count()).collect(),
        ActionRule::Myopic => {
            let predicted = predict(public, params);
            (0..params.obs_count())
                .map(|y| match bayes_update(&predicted, y, &params.observation) {
                    Ok(eta) => myopic_action(&eta, &params.costs),
                    Err(_) => {
                        let fallback = Belief::from_weights(predicted.clone())
                            .expect("prediction of a valid belief is a valid belief");
                        myopic_action(&fallback, &params.costs)
                    }
                })
                .collect()
        }
    }
}

fn likelihood_from_actions(actions: &[usize], action: usize, params: &ModelParams) -> Vec<f64> {
    (0..params.state_count())
        .map(|i| {
            actions
                .iter()
                .enumerate()
                .filter(|(_, &a)| a == action)
                .map(|(y, _)| params.observation.get(i, y))
                .sum()
        })
        .collect()
}

/// Diagonal of `R^π_a`: `P(a | x = i, π)` for every state `i`.
pub fn action_likelihood(public: &Belief, action: usize, params: &ModelParams) -> Vec<f64> {
    let actions = observation_actions(public, params);
    likelihood_from_actions(&actions, action, params)
}

/// Social learning filter `T(π, a)` together with its normaliser `σ(π, a)`.
pub fn social_learning_filter(
    public: &Belief,
    action: usize,
    params: &ModelParams,
) -> Result<(Belief, f64), FilterError> {
    if action >= params.action_count() {
        return Err(FilterError::ActionOutOfRange {
            action,
            count: params.action_count(),
        });
    }
    let predicted = predict(public, params);
    let likelihood = action_likelihood(public, action, params);
    let numerator: Vec<f64> = likelihood
        .iter()
        .zip(&predicted)
        .map(|(r, p)| r * p)
        .collect();
    let sigma: f64 = numerator.iter().sum();
    let posterior =
        Belief::from_weights(numerator).ok_or(FilterError::ZeroProbabilityAction { action })?;
    Ok((posterior, sigma))
}

/// Outcome of one action branch of the social learning filter.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionBranch {
    /// Likelihood vector `P(a | x = i, π)`.
    pub likelihood: Vec<f64>,
    /// `σ(π, a)`, the marginal probability of the action.
    pub normalizer: f64,
    /// `T(π, a)`; `None` when the action has zero probability.
    pub posterior: Option<Belief>,
}

/// Every branch of the social learning filter from a single public belief.
#[derive(Debug, Clone, PartialEq)]
pub struct SocialUpdate {
    pub predicted: Vec<f64>,
    /// `a(π, y)` for each observation.
    pub decisions: Vec<usize>,
    pub branches: Vec<ActionBranch>,
}

impl SocialUpdate {
    /// The action every observation maps to, if they all agree.
    pub fn herd_action(&self) -> Option<usize> {
        let first = *self.decisions.first()?;
        self.decisions.iter().all(|&a| a == first).then_some(first)
    }
}

pub fn social_update(public: &Belief, params: &ModelParams) -> SocialUpdate {
    let predicted = predict(public, params);
    let decisions = observation_actions(public, params);
    let branches = (0..params.action_count())
        .map(|a| {
            let likelihood = likelihood_from_actions(&decisions, a, params);
            let numerator: Vec<f64> = likelihood
                .iter()
                .zip(&predicted)
                .map(|(r, p)| r * p)
                .collect();
            let normalizer = numerator.iter().sum();
            ActionBranch {
                likelihood,
                normalizer,
                posterior: Belief::from_weights(numerator),
            }
        })
        .collect();
    SocialUpdate {
        predicted,
        decisions,
        branches,
    }
}
