use super::protocol::check_model;
use super::{fuse_naive, ClosureView, FusionMode, IncestError, InformationFlowGraph};
use crate::belief::{observation_actions, social_learning_filter, Belief, ModelParams};

/// Largest observation-sequence space the oracle will enumerate.
pub const ORACLE_MAX_SEQUENCES: u128 = 4096;

/// Brute-force fair rating `P(x | a_m, m ∈ F_n)`.
///
/// Enumerates every joint private observation of the multi-hop history and
/// keeps the sequences whose induced actions match `actions`
/// (`actions[m - 1]` is `a_m`). Each ancestor's decision rule is built from
/// the belief it held under `mode`: the fair rating of its own history, or
/// the naive running sum. Needs `P = I`.
pub fn oracle_fair_rating(
    graph: &InformationFlowGraph,
    params: &ModelParams,
    node: usize,
    actions: &[usize],
    mode: FusionMode,
) -> Result<Belief, IncestError> {
    check_model(params)?;
    graph.check_node(node)?;
    if actions.len() < node - 1 {
        return Err(IncestError::LengthMismatch {
            expected: node - 1,
            got: actions.len(),
        });
    }
    let view = graph.transitive_closure()?;
    let mut oracle = Oracle {
        view: &view,
        params,
        actions,
        fair_memo: vec![None; node],
        naive_public: Vec::new(),
    };
    if mode == FusionMode::Naive {
        oracle.fill_naive(node)?;
    }
    oracle.rating(node, mode)
}

struct Oracle<'a> {
    view: &'a ClosureView,
    params: &'a ModelParams,
    actions: &'a [usize],
    fair_memo: Vec<Option<Belief>>,
    /// `(pre-belief, public belief)` of each node under naive fusion.
    naive_public: Vec<(Belief, Belief)>,
}

impl Oracle<'_> {
    fn fill_naive(&mut self, node: usize) -> Result<(), IncestError> {
        for m in 1..node {
            let received: Vec<Belief> = self
                .view
                .single_hop(m)
                .iter()
                .map(|&h| self.naive_public[h - 1].1.clone())
                .collect();
            let pre = if received.is_empty() {
                self.params.prior().clone()
            } else {
                fuse_naive(&received)?
            };
            let (public, _) = social_learning_filter(&pre, self.actions[m - 1], self.params)
                .map_err(|_| IncestError::ImpossibleActions)?;
            self.naive_public.push((pre, public));
        }
        Ok(())
    }

    fn pre_belief(&mut self, m: usize, mode: FusionMode) -> Result<Belief, IncestError> {
        match mode {
            FusionMode::Naive => Ok(self.naive_public[m - 1].0.clone()),
            FusionMode::Fair => self.rating(m, mode),
        }
    }

    fn rating(&mut self, node: usize, mode: FusionMode) -> Result<Belief, IncestError> {
        if mode == FusionMode::Fair {
            if let Some(b) = &self.fair_memo[node - 1] {
                return Ok(b.clone());
            }
        }
        let history = self.view.multi_hop(node);
        let obs = self.params.obs_count();
        let sequences = (obs as u128)
            .checked_pow(history.len() as u32)
            .unwrap_or(u128::MAX);
        if sequences > ORACLE_MAX_SEQUENCES {
            return Err(IncestError::TooLarge { sequences });
        }
        let mut rules = Vec::with_capacity(history.len());
        for &m in &history {
            let pre = self.pre_belief(m, mode)?;
            rules.push(observation_actions(&pre, self.params));
        }
        let states = self.params.state_count();
        let prior = self.params.prior().probs();
        let b = self.params.observation();
        let mut joint = vec![0.0; states];
        let mut ys = vec![0usize; history.len()];
        'sequences: loop {
            let consistent = history
                .iter()
                .zip(&rules)
                .zip(&ys)
                .all(|((&m, rule), &y)| rule[y] == self.actions[m - 1]);
            if consistent {
                for (x, j) in joint.iter_mut().enumerate() {
                    *j += ys.iter().fold(prior[x], |acc, &y| acc * b.get(x, y));
                }
            }
            for digit in ys.iter_mut() {
                *digit += 1;
                if *digit < obs {
                    continue 'sequences;
                }
                *digit = 0;
            }
            break;
        }
        let rating = Belief::from_weights(joint).ok_or(IncestError::ImpossibleActions)?;
        if mode == FusionMode::Fair {
            self.fair_memo[node - 1] = Some(rating.clone());
        }
        Ok(rating)
    }
}
