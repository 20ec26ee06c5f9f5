use serde::{Deserialize, Serialize};

use super::grid::{grid_point, value_iteration, PointModel};
use super::{DetectionError, PolicyGrid, SolverSettings};
use crate::belief::{hmm_filter, myopic_action, Belief, ModelParams};
use crate::matrix::Matrix;
use crate::rng::SimRng;

/// The two privacy extremes: reveal the raw observation, or herd and ignore it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PrivacyLevel {
    Reveal = 1,
    Herd = 2,
}

impl PrivacyLevel {
    pub fn label(self) -> u8 {
        self as u8
    }
}

/// Per-step costs. `reveal[i]` is paid in state `i` while revealing;
/// `herd` (X×A) is the cost of each action taken at a frozen belief.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyCosts {
    pub reveal: Vec<f64>,
    pub herd: Matrix,
}

/// Solved privacy problem.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyPolicy {
    pub target_state: usize,
    pub discount: f64,
    pub grid: PolicyGrid<PrivacyLevel>,
}

impl PrivacyPolicy {
    /// Grid index of the unit mass on the target state.
    pub fn target_index(&self) -> usize {
        if self.target_state == 0 {
            0
        } else {
            self.grid.grid_size() - 1
        }
    }

    pub fn herd_intervals(&self) -> Vec<(usize, usize)> {
        self.grid.runs_of(PrivacyLevel::Herd)
    }

    /// One herd interval, and it contains the target vertex.
    pub fn herd_region_is_target_interval(&self) -> bool {
        let t = self.target_index();
        matches!(self.herd_intervals().as_slice(), [(lo, hi)] if *lo <= t && t <= *hi)
    }
}

/// `min_a c_herd,aᵀ π / (1 - ρ)`: the herding agent keeps its belief forever.
fn herd_value(pi: &Belief, herd: &Matrix, discount: f64) -> f64 {
    let a = myopic_action(pi, herd);
    herd.column_dot(a, pi.probs()) / (1.0 - discount)
}

/// Value iteration for
/// `V(π) = min{herd(π), Σ_y σ_y [c_revealᵀ η_y + ρ V(η_y)]}` with `P = I`.
/// Ties choose herd.
pub fn solve_privacy_stopping(
    params: &ModelParams,
    costs: &PrivacyCosts,
    discount: f64,
    target_state: usize,
    settings: &SolverSettings,
) -> Result<PrivacyPolicy, DetectionError> {
    if !(0.0..1.0).contains(&discount) {
        return Err(DetectionError::InvalidDiscount(discount));
    }
    let states = params.state_count();
    if states != 2 {
        return Err(DetectionError::UnsupportedDimension { states });
    }
    if !params.transition().is_identity() {
        return Err(DetectionError::NonIdentityTransition);
    }
    if target_state >= states {
        return Err(DetectionError::InvalidTarget {
            target: target_state,
            states,
        });
    }
    if costs.reveal.len() != states || costs.herd.rows() != states {
        let (rows, cols) = if costs.reveal.len() != states {
            (costs.reveal.len(), 1)
        } else {
            (costs.herd.rows(), costs.herd.cols())
        };
        return Err(DetectionError::CostShape {
            rows,
            cols,
            expected_rows: states,
        });
    }
    settings.validate()?;
    let points = (0..settings.grid_size)
        .map(|g| {
            let pi = Belief::two_state(grid_point(g, settings.grid_size));
            let mut running = 0.0;
            let mut next = Vec::with_capacity(params.obs_count());
            for y in 0..params.obs_count() {
                let sigma = params.observation().column_dot(y, pi.probs());
                if sigma > 0.0 {
                    let eta = hmm_filter(&pi, y, params)?;
                    running += sigma
                        * eta
                            .probs()
                            .iter()
                            .zip(&costs.reveal)
                            .map(|(p, c)| p * c)
                            .sum::<f64>();
                    next.push((sigma, eta.get(1)));
                }
            }
            Ok(PointModel {
                stop: herd_value(&pi, &costs.herd, discount),
                running,
                next,
            })
        })
        .collect::<Result<Vec<_>, DetectionError>>()?;
    let grid = value_iteration(&points, discount, settings).map_decisions(|stop| {
        if stop {
            PrivacyLevel::Herd
        } else {
            PrivacyLevel::Reveal
        }
    });
    Ok(PrivacyPolicy {
        target_state,
        discount,
        grid,
    })
}

/// Decisions and beliefs along one run of the privacy policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyTrace {
    pub true_state: usize,
    /// `beliefs[k]` is the belief at which `decisions[k]` was taken.
    pub beliefs: Vec<Belief>,
    pub decisions: Vec<PrivacyLevel>,
}

impl PrivacyTrace {
    pub fn reveals_after_herding(&self) -> bool {
        self.decisions
            .iter()
            .skip_while(|&&d| d == PrivacyLevel::Reveal)
            .any(|&d| d == PrivacyLevel::Reveal)
    }
}

/// Follows the policy for `horizon` steps. Revealing updates the belief with
/// a fresh observation; herding leaves it where it is.
pub fn privacy_rollout(
    policy: &PrivacyPolicy,
    params: &ModelParams,
    horizon: usize,
    rng: &mut SimRng,
) -> Result<PrivacyTrace, DetectionError> {
    let true_state = rng.categorical(params.prior().probs());
    let mut belief = params.prior().clone();
    let mut beliefs = Vec::with_capacity(horizon);
    let mut decisions = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let d = policy.grid.decision_at(belief.get(1));
        beliefs.push(belief.clone());
        decisions.push(d);
        if d == PrivacyLevel::Reveal {
            let y = rng.categorical(params.observation().row(true_state));
            belief = hmm_filter(&belief, y, params)?;
        }
    }
    Ok(PrivacyTrace {
        true_state,
        beliefs,
        decisions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::fixtures::{change_model, static_model};

    pub(crate) fn privacy_model() -> (ModelParams, PrivacyCosts) {
        let params = ModelParams::new(
            Matrix::identity(2),
            Matrix::from_rows(&[[0.8, 0.2], [0.3, 0.7]]).unwrap(),
            Matrix::from_rows(&[[0.0, 1.5], [1.0, 0.5]]).unwrap(),
            vec![0.5, 0.5],
        )
        .unwrap();
        let costs = PrivacyCosts {
            reveal: vec![2.0, 0.2],
            herd: Matrix::from_rows(&[[0.0, 1.5], [1.0, 0.5]]).unwrap(),
        };
        (params, costs)
    }

    fn settings(grid_size: usize) -> SolverSettings {
        SolverSettings {
            grid_size,
            max_iters: 5000,
            tol: 1e-9,
            ..SolverSettings::default()
        }
    }

    #[test]
    fn discount_validated() {
        let (params, costs) = privacy_model();
        assert_eq!(
            solve_privacy_stopping(&params, &costs, 1.0, 0, &settings(11)),
            Err(DetectionError::InvalidDiscount(1.0))
        );
        assert_eq!(
            solve_privacy_stopping(&change_model(), &costs, 0.5, 0, &settings(11)),
            Err(DetectionError::NonIdentityTransition)
        );
    }

    #[test]
    fn myopic_comparison_without_discount() {
        let (params, costs) = privacy_model();
        let policy = solve_privacy_stopping(&params, &costs, 0.0, 0, &settings(101)).unwrap();
        for g in 0..101 {
            let pi = Belief::two_state(policy.grid.point(g));
            let herd = (0..2)
                .map(|a| costs.herd.column_dot(a, pi.probs()))
                .fold(f64::INFINITY, f64::min);
            let reveal = 2.0 * pi.get(0) + 0.2 * pi.get(1);
            let want = if herd <= reveal {
                PrivacyLevel::Herd
            } else {
                PrivacyLevel::Reveal
            };
            assert_eq!(policy.grid.decisions[g], want, "point {g}");
        }
    }

    #[test]
    fn free_herding_everywhere() {
        let costs = PrivacyCosts {
            reveal: vec![0.5, 0.5],
            herd: Matrix::filled(2, 2, 0.0),
        };
        let policy =
            solve_privacy_stopping(&static_model(), &costs, 0.9, 1, &settings(51)).unwrap();
        assert!(policy
            .grid
            .decisions
            .iter()
            .all(|&d| d == PrivacyLevel::Herd));
    }

    #[test]
    fn herd_region_is_connected_around_target() {
        let (params, costs) = privacy_model();
        let policy = solve_privacy_stopping(&params, &costs, 0.9, 0, &settings(201)).unwrap();
        assert!(
            policy.herd_region_is_target_interval(),
            "{:?}",
            policy.herd_intervals()
        );
        assert!(policy.grid.decisions.contains(&PrivacyLevel::Reveal));
        assert!(*policy.grid.residuals.last().unwrap() < 1e-9);
        for r in 0..200 {
            let mut rng = SimRng::with_stream(5, r);
            let trace = privacy_rollout(&policy, &params, 100, &mut rng).unwrap();
            assert!(!trace.reveals_after_herding());
        }
    }

    #[test]
    fn discounted_residuals_shrink() {
        let (params, costs) = privacy_model();
        let policy = solve_privacy_stopping(&params, &costs, 0.9, 0, &settings(201)).unwrap();
        let r = &policy.grid.residuals;
        // contraction factor ρ after a short burn-in
        for w in r[10..].windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }
}
