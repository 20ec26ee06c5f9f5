//! The sequential social learning protocol and its herding detectors.
//!
//! Agent `k` observes `y_k`, forms its private belief from the public belief
//! `π_{k-1}`, broadcasts the myopic action `a_k`, and everybody updates the
//! public belief with the social learning filter. A static state is the
//! special case `P = I`.

use thiserror::Error;

use crate::belief::{
    hmm_filter, myopic_action, social_learning_filter, social_update, ActionRule, Belief,
    FilterError, ModelParams,
};
use crate::rng::SimRng;

/// Tolerance of the belief-freeze test used for cascade detection.
pub const FREEZE_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SocialError {
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error("horizon must be at least 1")]
    EmptyHorizon,
    #[error("herd region scan needs a two-state model, got {states} states")]
    UnsupportedDimension { states: usize },
    #[error("grid needs at least 2 points, got {0}")]
    GridTooSmall(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub true_state: usize,
    pub obs: usize,
    pub private_belief: Belief,
    pub action: usize,
    pub public_belief: Belief,
}

/// One run of the protocol; `steps[k-1]` holds agent `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningTrace {
    pub prior: Belief,
    pub steps: Vec<TraceStep>,
}

impl LearningTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `π_k` for `k = 0..=len`, with `π_0` the prior.
    pub fn public_belief(&self, k: usize) -> &Belief {
        if k == 0 {
            &self.prior
        } else {
            &self.steps[k - 1].public_belief
        }
    }
}

/// Runs `horizon` agents. The state starts from the prior and moves along
/// `P` before each observation, matching the filter's predict-then-update
/// order.
pub fn run_protocol(
    params: &ModelParams,
    horizon: usize,
    seed: u64,
) -> Result<LearningTrace, SocialError> {
    let mut rng = SimRng::new(seed);
    run_protocol_with(params, horizon, &mut rng)
}

pub fn run_protocol_with(
    params: &ModelParams,
    horizon: usize,
    rng: &mut SimRng,
) -> Result<LearningTrace, SocialError> {
    if horizon == 0 {
        return Err(SocialError::EmptyHorizon);
    }
    let mut walker = Walker::new(params, rng);
    let mut steps = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        steps.push(walker.step(params, rng)?);
    }
    Ok(LearningTrace {
        prior: params.prior().clone(),
        steps,
    })
}

/// Runs the protocol until `π_k` is a cascade point and returns that `k`,
/// or `None` if none occurs within `max_steps`. Draws the same random
/// numbers as [`run_protocol`], so the answer agrees with
/// [`analyze_trace`] on the same seed.
pub fn run_until_cascade(
    params: &ModelParams,
    max_steps: usize,
    seed: u64,
) -> Result<Option<usize>, SocialError> {
    if max_steps == 0 {
        return Err(SocialError::EmptyHorizon);
    }
    let mut rng = SimRng::new(seed);
    let mut walker = Walker::new(params, &mut rng);
    for k in 1..=max_steps {
        let step = walker.step(params, &mut rng)?;
        if is_cascade_point(&step.public_belief, params) {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

struct Walker {
    static_state: bool,
    state: usize,
    public: Belief,
}

impl Walker {
    fn new(params: &ModelParams, rng: &mut SimRng) -> Self {
        Walker {
            static_state: params.transition().is_identity(),
            state: rng.categorical(params.prior().probs()),
            public: params.prior().clone(),
        }
    }

    fn step(&mut self, params: &ModelParams, rng: &mut SimRng) -> Result<TraceStep, SocialError> {
        if !self.static_state {
            self.state = rng.categorical(params.transition().row(self.state));
        }
        let obs = rng.categorical(params.observation().row(self.state));
        let private_belief = hmm_filter(&self.public, obs, params)?;
        let action = match params.action_rule() {
            ActionRule::Myopic => myopic_action(&private_belief, params.costs()),
            ActionRule::RevealObservation => obs,
        };
        let (next, _) = social_learning_filter(&self.public, action, params)?;
        self.public = next.clone();
        Ok(TraceStep {
            true_state: self.state,
            obs,
            private_belief,
            action,
            public_belief: next,
        })
    }
}

/// The action an agent takes whatever it observes, if there is one.
pub fn herd_action(public: &Belief, params: &ModelParams) -> Option<usize> {
    social_update(public, params).herd_action()
}

pub fn is_individual_herd(public: &Belief, params: &ModelParams) -> bool {
    herd_action(public, params).is_some()
}

/// True when no action with positive probability moves the public belief.
pub fn is_cascade_point(public: &Belief, params: &ModelParams) -> bool {
    social_update(public, params)
        .branches
        .iter()
        .filter(|b| b.normalizer > 0.0)
        .all(|b| {
            b.posterior
                .as_ref()
                .is_some_and(|post| post.max_abs_diff(public) <= FREEZE_TOL)
        })
}

/// First steps (1-based) at which herding events were observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HerdReport {
    /// First `k` whose agent herds on `π_{k-1}`.
    pub individual_herd_at: Option<usize>,
    /// Start of the final run of identical actions, when that run holds at
    /// least two agents.
    pub herd_at: Option<usize>,
    /// First `k` with `π_k` a cascade point.
    pub cascade_at: Option<usize>,
}

pub fn analyze_trace(trace: &LearningTrace, params: &ModelParams) -> HerdReport {
    let len = trace.len();
    let individual_herd_at =
        (1..=len).find(|&k| is_individual_herd(trace.public_belief(k - 1), params));
    let herd_at = trace.steps.last().and_then(|last| {
        let run = trace
            .steps
            .iter()
            .rev()
            .take_while(|s| s.action == last.action)
            .count();
        (run >= 2).then_some(len - run + 1)
    });
    let cascade_at = (1..=len).find(|&k| is_cascade_point(trace.public_belief(k), params));
    HerdReport {
        individual_herd_at,
        herd_at,
        cascade_at,
    }
}

/// Maximal run of grid points on which agents herd on the same action.
#[derive(Debug, Clone, PartialEq)]
pub struct HerdInterval {
    pub action: usize,
    /// `π(2)` at the first and last grid point of the run.
    pub lower: f64,
    pub upper: f64,
    pub first_index: usize,
    pub last_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HerdRegions {
    pub grid_size: usize,
    /// Herd action (if any) at each grid point.
    pub herd_actions: Vec<Option<usize>>,
    pub intervals: Vec<HerdInterval>,
}

impl HerdRegions {
    /// Upper end of the herd interval that starts at `π(2) = 0`.
    pub fn lower_threshold(&self) -> Option<f64> {
        self.intervals
            .first()
            .filter(|iv| iv.first_index == 0)
            .map(|iv| iv.upper)
    }

    /// Lower end of the herd interval that ends at `π(2) = 1`.
    pub fn upper_threshold(&self) -> Option<f64> {
        self.intervals
            .last()
            .filter(|iv| iv.last_index == self.grid_size - 1)
            .map(|iv| iv.lower)
    }
}

pub(crate) fn grid_point(g: usize, grid_size: usize) -> f64 {
    g as f64 / (grid_size - 1) as f64
}

/// Scans `π(2)` on a uniform grid and groups herding points into intervals.
pub fn herd_region_boundaries(
    params: &ModelParams,
    grid_size: usize,
) -> Result<HerdRegions, SocialError> {
    if params.state_count() != 2 {
        return Err(SocialError::UnsupportedDimension {
            states: params.state_count(),
        });
    }
    if grid_size < 2 {
        return Err(SocialError::GridTooSmall(grid_size));
    }
    let herd_actions: Vec<Option<usize>> = (0..grid_size)
        .map(|g| herd_action(&Belief::two_state(grid_point(g, grid_size)), params))
        .collect();
    let mut intervals: Vec<HerdInterval> = Vec::new();
    for (g, herd) in herd_actions.iter().enumerate() {
        let Some(action) = *herd else { continue };
        match intervals.last_mut() {
            Some(iv) if iv.action == action && iv.last_index + 1 == g => {
                iv.last_index = g;
                iv.upper = grid_point(g, grid_size);
            }
            _ => intervals.push(HerdInterval {
                action,
                lower: grid_point(g, grid_size),
                upper: grid_point(g, grid_size),
                first_index: g,
                last_index: g,
            }),
        }
    }
    Ok(HerdRegions {
        grid_size,
        herd_actions,
        intervals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::fixtures::{change_model, static_model};
    use crate::matrix::Matrix;

    #[test]
    fn single_step_unrolls_filter() {
        let params = change_model();
        let trace = run_protocol(&params, 1, 42).unwrap();
        assert_eq!(trace.len(), 1);
        let step = &trace.steps[0];
        let (expected, _) = social_learning_filter(params.prior(), step.action, &params).unwrap();
        assert_eq!(step.public_belief, expected);
    }

    #[test]
    fn early_exit_agrees_with_full_trace() {
        let params = static_model();
        for seed in 0..50 {
            let trace = run_protocol(&params, 60, seed).unwrap();
            let report = analyze_trace(&trace, &params);
            assert_eq!(
                run_until_cascade(&params, 60, seed).unwrap(),
                report.cascade_at
            );
        }
    }

    #[test]
    fn zero_horizon_rejected() {
        assert_eq!(
            run_protocol(&change_model(), 0, 1),
            Err(SocialError::EmptyHorizon)
        );
    }

    #[test]
    fn same_seed_same_trace() {
        let params = static_model();
        assert_eq!(
            run_protocol(&params, 300, 9).unwrap(),
            run_protocol(&params, 300, 9).unwrap()
        );
    }

    #[test]
    fn trace_respects_protocol_invariants() {
        let params = change_model();
        let trace = run_protocol(&params, 200, 5).unwrap();
        for k in 1..=trace.len() {
            let step = &trace.steps[k - 1];
            assert_eq!(
                step.action,
                myopic_action(&step.private_belief, params.costs())
            );
            let (expected, _) =
                social_learning_filter(trace.public_belief(k - 1), step.action, &params).unwrap();
            assert_eq!(step.public_belief, expected);
        }
    }

    #[test]
    fn revealing_agents_run_hmm_filter() {
        let params = change_model()
            .with_action_rule(ActionRule::RevealObservation)
            .unwrap();
        let trace = run_protocol(&params, 100, 3).unwrap();
        let mut belief = params.prior().clone();
        for step in &trace.steps {
            assert_eq!(step.action, step.obs);
            belief = hmm_filter(&belief, step.obs, &params).unwrap();
            assert_eq!(step.public_belief, belief);
        }
    }

    #[test]
    fn point_mass_herds_for_positive_likelihood() {
        let params = static_model();
        for i in 0..2 {
            let pm = Belief::point_mass(2, i);
            let actions: Vec<usize> = (0..2)
                .map(|y| myopic_action(&hmm_filter(&pm, y, &params).unwrap(), params.costs()))
                .collect();
            assert_eq!(actions[0], actions[1]);
            assert!(is_individual_herd(&pm, &params));
        }
    }

    #[test]
    fn herding_examples_on_change_model() {
        let params = change_model();
        assert!(!is_individual_herd(&Belief::two_state(0.5), &params));
        assert_eq!(herd_action(&Belief::two_state(0.99), &params), Some(1));
    }

    #[test]
    fn cascade_needs_frozen_dynamics() {
        let herding = Belief::two_state(0.99);
        assert!(is_cascade_point(&herding, &static_model()));
        assert!(!is_cascade_point(&herding, &change_model()));
    }

    #[test]
    fn uniform_likelihood_always_cascades() {
        let params = ModelParams::new(
            Matrix::identity(2),
            Matrix::filled(2, 2, 0.5),
            Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap(),
            vec![0.5, 0.5],
        )
        .unwrap();
        for g in 0..=10 {
            assert!(is_cascade_point(
                &Belief::two_state(g as f64 / 10.0),
                &params
            ));
        }
        // every point herds; the herd action follows the MAP state
        let regions = herd_region_boundaries(&params, 101).unwrap();
        assert!(regions.herd_actions.iter().all(Option::is_some));
        assert_eq!(regions.intervals.first().unwrap().first_index, 0);
        assert_eq!(regions.intervals.last().unwrap().last_index, 100);
        for pair in regions.intervals.windows(2) {
            assert_eq!(pair[0].last_index + 1, pair[1].first_index);
        }
    }

    #[test]
    fn short_horizon_reports_no_cascade() {
        let params = static_model();
        let trace = run_protocol(&params, 1, 11).unwrap();
        let report = analyze_trace(&trace, &params);
        if let Some(k) = report.cascade_at {
            assert!(is_cascade_point(trace.public_belief(k), &params));
        }
        assert_eq!(report.herd_at, None);
    }

    #[test]
    fn static_runs_cascade_and_stay_frozen() {
        let params = static_model();
        for seed in 0..50 {
            let trace = run_protocol(&params, 500, seed).unwrap();
            let report = analyze_trace(&trace, &params);
            let c = report.cascade_at.expect("cascade within 500 agents");
            let herd = report.herd_at.expect("cascade implies herd");
            assert!(herd <= c, "seed {seed}: herd {herd} cascade {c}");
            for k in c..=trace.len() {
                assert!(is_cascade_point(trace.public_belief(k), &params));
                assert_eq!(trace.public_belief(k), trace.public_belief(c));
            }
        }
    }

    #[test]
    fn change_model_herd_intervals() {
        let params = change_model();
        let regions = herd_region_boundaries(&params, 1000).unwrap();
        assert_eq!(regions.intervals.len(), 2);
        let (lo, hi) = (&regions.intervals[0], &regions.intervals[1]);
        assert_eq!((lo.action, hi.action), (0, 1));
        let p1 = regions.lower_threshold().unwrap();
        let p2 = regions.upper_threshold().unwrap();
        assert!(0.0 < p1 && p1 < 0.5 && 0.5 < p2 && p2 < 1.0, "{p1} {p2}");
        for (g, herd) in regions.herd_actions.iter().enumerate() {
            let inside = regions
                .intervals
                .iter()
                .find(|iv| iv.first_index <= g && g <= iv.last_index);
            assert_eq!(inside.map(|iv| iv.action), *herd);
        }
    }

    #[test]
    fn sharper_observations_shrink_herd_regions() {
        let base = change_model();
        let sharp = ModelParams::new(
            base.transition().clone(),
            Matrix::from_rows(&[[0.99, 0.01], [0.01, 0.99]]).unwrap(),
            base.costs().clone(),
            vec![0.5, 0.5],
        )
        .unwrap();
        let wide = herd_region_boundaries(&base, 1000).unwrap();
        let narrow = herd_region_boundaries(&sharp, 1000).unwrap();
        assert!(narrow.lower_threshold().unwrap() < wide.lower_threshold().unwrap());
        // the upper region can vanish altogether
        assert!(narrow
            .upper_threshold()
            .is_none_or(|p| p > wide.upper_threshold().unwrap()));
    }

    #[test]
    fn three_states_unsupported() {
        let params = ModelParams::new(
            Matrix::identity(3),
            Matrix::filled(3, 2, 0.5),
            Matrix::filled(3, 2, 0.0),
            vec![1.0 / 3.0; 3],
        )
        .unwrap();
        assert_eq!(
            herd_region_boundaries(&params, 10),
            Err(SocialError::UnsupportedDimension { states: 3 })
        );
    }
}
