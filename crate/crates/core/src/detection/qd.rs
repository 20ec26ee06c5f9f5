use serde::{Deserialize, Serialize};

use super::grid::{grid_point, value_iteration, PointModel};
use super::{DetectionError, PolicyGrid, SolverSettings};
use crate::belief::{hmm_filter, predict, social_update, Belief, ModelParams};

/// Per-step delay penalty `d` and false-alarm penalty `f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionCosts {
    pub delay: f64,
    pub false_alarm: f64,
}

impl DetectionCosts {
    pub fn new(delay: f64, false_alarm: f64) -> Result<Self, DetectionError> {
        let ok = |c: f64| c.is_finite() && c >= 0.0;
        if !ok(delay) || !ok(false_alarm) || (delay == 0.0 && false_alarm == 0.0) {
            return Err(DetectionError::InvalidCosts);
        }
        Ok(DetectionCosts { delay, false_alarm })
    }
}

/// Quickest-detection decision; the discriminants match the usual 1/2 labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    Announce = 1,
    Continue = 2,
}

impl Decision {
    pub fn label(self) -> u8 {
        self as u8
    }
}

fn check_change_model(params: &ModelParams) -> Result<(), DetectionError> {
    if params.state_count() != 2 {
        return Err(DetectionError::UnsupportedDimension {
            states: params.state_count(),
        });
    }
    if params.transition().row(0) != [1.0, 0.0] {
        return Err(DetectionError::NotAbsorbing);
    }
    if !params.strictly_positive_likelihood() {
        return Err(DetectionError::DegenerateLikelihood);
    }
    Ok(())
}

fn solve(
    costs: &DetectionCosts,
    settings: &SolverSettings,
    transitions: impl Fn(&Belief) -> Result<Vec<(f64, f64)>, DetectionError>,
) -> Result<PolicyGrid<Decision>, DetectionError> {
    settings.validate()?;
    let points = (0..settings.grid_size)
        .map(|g| {
            let p = grid_point(g, settings.grid_size);
            Ok(PointModel {
                stop: costs.false_alarm * p,
                running: costs.delay * (1.0 - p),
                next: transitions(&Belief::two_state(p))?,
            })
        })
        .collect::<Result<Vec<_>, DetectionError>>()?;
    let grid = value_iteration(&points, 1.0, settings);
    Ok(grid.map_decisions(|stop| {
        if stop {
            Decision::Announce
        } else {
            Decision::Continue
        }
    }))
}

/// Shiryaev detection where the decision maker sees every observation:
/// `V(π) = min{f π(2), d(1 - π(2)) + Σ_y V(η_y) P(y | π)}`.
pub fn solve_classical_qd(
    params: &ModelParams,
    costs: &DetectionCosts,
    settings: &SolverSettings,
) -> Result<PolicyGrid<Decision>, DetectionError> {
    check_change_model(params)?;
    solve(costs, settings, |pi| {
        let predicted = predict(pi, params);
        (0..params.obs_count())
            .filter_map(|y| {
                let sigma = params.observation().column_dot(y, &predicted);
                (sigma > 0.0).then(|| {
                    hmm_filter(pi, y, params)
                        .map(|eta| (sigma, eta.get(1)))
                        .map_err(DetectionError::from)
                })
            })
            .collect()
    })
}

/// Detection from the actions of social learners:
/// `V(π) = min{f π(2), d(1 - π(2)) + Σ_a V(T(π, a)) σ(π, a)}`.
pub fn solve_social_qd(
    params: &ModelParams,
    costs: &DetectionCosts,
    settings: &SolverSettings,
) -> Result<PolicyGrid<Decision>, DetectionError> {
    check_change_model(params)?;
    solve(costs, settings, |pi| {
        Ok(social_update(pi, params)
            .branches
            .into_iter()
            .filter(|b| b.normalizer > 0.0)
            .filter_map(|b| b.posterior.map(|post| (b.normalizer, post.get(1))))
            .collect())
    })
}
