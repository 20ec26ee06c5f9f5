use rayon::prelude::*;

use super::{Decision, DetectionCosts, DetectionError, PolicyGrid};
use crate::belief::{observation_actions, social_learning_filter, Belief, ModelParams};
use crate::rng::SimRng;

/// Decides at time `k` from the public belief `π_k` whether to announce.
pub trait StoppingRule: Sync {
    fn announce(&self, public: &Belief) -> bool;
}

impl StoppingRule for PolicyGrid<Decision> {
    fn announce(&self, public: &Belief) -> bool {
        self.decision_at(public.get(1)) == Decision::Announce
    }
}

/// Announce once `π(2) ≤ threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdRule {
    pub threshold: f64,
}

impl StoppingRule for ThresholdRule {
    fn announce(&self, public: &Belief) -> bool {
        public.get(1) <= self.threshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlwaysStop;

impl StoppingRule for AlwaysStop {
    fn announce(&self, _: &Belief) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeverStop;

impl StoppingRule for NeverStop {
    fn announce(&self, _: &Belief) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulationSettings {
    pub runs: usize,
    /// Runs still going at this time are truncated.
    pub horizon: usize,
    pub seed: u64,
}

/// One rollout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingOutcome {
    /// `τ`; `None` if the horizon cap was hit first.
    pub announce_time: Option<usize>,
    /// `τ⁰`, if the change happened before the run ended.
    pub change_time: Option<usize>,
    pub realized_cost: f64,
}

impl StoppingOutcome {
    pub fn false_alarm(&self) -> bool {
        self.announce_time.is_some() && self.change_time.is_none()
    }

    /// `(τ - τ⁰)⁺`, using the horizon for truncated runs.
    pub fn delay(&self, horizon: usize) -> usize {
        let stop = self.announce_time.unwrap_or(horizon);
        self.change_time.map_or(0, |c| stop.saturating_sub(c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionSummary {
    pub runs: usize,
    pub mean_cost: f64,
    /// Standard error of `mean_cost`.
    pub cost_std_error: f64,
    pub mean_delay: f64,
    pub false_alarm_rate: f64,
    pub truncated: usize,
}

/// Simulates the change and the social learners until the rule announces.
///
/// `x_0 ~ π_0` and the public belief starts at `π_0`. At each `k` the rule
/// sees `π_k`; otherwise `x_{k+1} ~ P(x_k, ·)`, agent `k+1` observes
/// `y ~ B(x_{k+1}, ·)` and acts, and `π_{k+1} = T(π_k, a)`. State 0 is the
/// post-change state. A run that reaches `horizon` pays only the delay
/// accumulated so far.
pub fn rollout_detection<R: StoppingRule + ?Sized>(
    rule: &R,
    params: &ModelParams,
    costs: &DetectionCosts,
    horizon: usize,
    rng: &mut SimRng,
) -> Result<StoppingOutcome, DetectionError> {
    let mut state = rng.categorical(params.prior().probs());
    let mut public = params.prior().clone();
    let mut change_time = (state == 0).then_some(0);
    for k in 0..=horizon {
        if rule.announce(&public) {
            let realized_cost = match change_time {
                None => costs.false_alarm,
                Some(c) => costs.delay * (k - c) as f64,
            };
            return Ok(StoppingOutcome {
                announce_time: Some(k),
                change_time,
                realized_cost,
            });
        }
        if k == horizon {
            break;
        }
        state = rng.categorical(params.transition().row(state));
        if state == 0 && change_time.is_none() {
            change_time = Some(k + 1);
        }
        let obs = rng.categorical(params.observation().row(state));
        let action = observation_actions(&public, params)[obs];
        public = social_learning_filter(&public, action, params)?.0;
    }
    Ok(StoppingOutcome {
        announce_time: None,
        change_time,
        realized_cost: change_time.map_or(0.0, |c| costs.delay * (horizon - c) as f64),
    })
}

/// Monte Carlo estimate of the detection cost; replica `r` uses stream `r`
/// of the seed, so results do not depend on thread scheduling.
pub fn simulate_detection<R: StoppingRule + ?Sized>(
    rule: &R,
    params: &ModelParams,
    costs: &DetectionCosts,
    settings: &SimulationSettings,
) -> Result<DetectionSummary, DetectionError> {
    if settings.runs == 0 {
        return Err(DetectionError::NoRuns);
    }
    if params.state_count() != 2 {
        return Err(DetectionError::UnsupportedDimension {
            states: params.state_count(),
        });
    }
    let outcomes = (0..settings.runs as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = SimRng::with_stream(settings.seed, r);
            rollout_detection(rule, params, costs, settings.horizon, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n = outcomes.len() as f64;
    let mean_cost = outcomes.iter().map(|o| o.realized_cost).sum::<f64>() / n;
    let var = outcomes
        .iter()
        .map(|o| (o.realized_cost - mean_cost).powi(2))
        .sum::<f64>()
        / (n - 1.0).max(1.0);
    Ok(DetectionSummary {
        runs: outcomes.len(),
        mean_cost,
        cost_std_error: (var / n).sqrt(),
        mean_delay: outcomes
            .iter()
            .map(|o| o.delay(settings.horizon) as f64)
            .sum::<f64>()
            / n,
        false_alarm_rate: outcomes.iter().filter(|o| o.false_alarm()).count() as f64 / n,
        truncated: outcomes
            .iter()
            .filter(|o| o.announce_time.is_none())
            .count(),
    })
}
