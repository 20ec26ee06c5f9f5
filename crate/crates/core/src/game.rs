//! Regret matching in repeated games.
//!
//! Every player keeps time-averaged conditional regrets `r(i, j)`: how much
//! better it would have done, on average, by playing `j` every time it
//! played `i`. After playing `i` it switches to `j` with probability
//! `r(i, j)⁺ / C` and otherwise repeats `i`. The empirical joint play then
//! approaches the set of correlated equilibria.
//!
//! Utilities are flat tables over joint profiles in row-major order, the
//! last player's action varying fastest.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SimRng;

#[derive(Debug, Error, PartialEq)]
pub enum GameError {
    #[error("a game needs at least one player")]
    EmptyGame,
    #[error("player {player} has no actions")]
    NoActions { player: usize },
    #[error("expected {expected} entries, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("utility of player {player} at profile {profile} is not finite")]
    NonFinite { player: usize, profile: usize },
    #[error("normalizer {normalizer} must exceed the positive regret mass {required}")]
    InvalidNormalizer { normalizer: f64, required: f64 },
    #[error("weights must be nonnegative and sum to 1")]
    InvalidWeights,
    #[error("group fusion needs at least one member")]
    EmptyGroup,
    #[error("a run needs at least one step")]
    ZeroSteps,
    #[error("action {action} outside 0..{count}")]
    ActionOutOfRange { action: usize, count: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    action_counts: Vec<usize>,
    /// `utilities[l][profile]`.
    utilities: Vec<Vec<f64>>,
}

impl GameSpec {
    pub fn new(action_counts: Vec<usize>, utilities: Vec<Vec<f64>>) -> Result<Self, GameError> {
        if action_counts.is_empty() {
            return Err(GameError::EmptyGame);
        }
        if let Some(player) = action_counts.iter().position(|&a| a == 0) {
            return Err(GameError::NoActions { player });
        }
        if utilities.len() != action_counts.len() {
            return Err(GameError::ShapeMismatch {
                expected: action_counts.len(),
                got: utilities.len(),
            });
        }
        let profiles: usize = action_counts.iter().product();
        for (player, table) in utilities.iter().enumerate() {
            if table.len() != profiles {
                return Err(GameError::ShapeMismatch {
                    expected: profiles,
                    got: table.len(),
                });
            }
            if let Some(profile) = table.iter().position(|u| !u.is_finite()) {
                return Err(GameError::NonFinite { player, profile });
            }
        }
        Ok(GameSpec {
            action_counts,
            utilities,
        })
    }

    /// Two players, two actions, payoff 1 to both when the actions match.
    pub fn coordination() -> Self {
        let u = vec![1.0, 0.0, 0.0, 1.0];
        GameSpec::new(vec![2, 2], vec![u.clone(), u]).expect("valid game")
    }

    /// Two players, two actions, payoff 1 to both when the actions differ.
    pub fn anti_coordination() -> Self {
        let u = vec![0.0, 1.0, 1.0, 0.0];
        GameSpec::new(vec![2, 2], vec![u.clone(), u]).expect("valid game")
    }

    /// `players` players choose one of `resources` resources; each pays the
    /// number of players on its resource.
    pub fn congestion(players: usize, resources: usize) -> Self {
        let counts = vec![resources; players];
        let profiles: usize = counts.iter().product();
        let mut utilities = vec![vec![0.0; profiles]; players];
        let shape = GameSpec {
            action_counts: counts.clone(),
            utilities: vec![],
        };
        for idx in 0..profiles {
            let profile = shape.profile(idx);
            for (l, &a) in profile.iter().enumerate() {
                let load = profile.iter().filter(|&&b| b == a).count();
                utilities[l][idx] = -(load as f64);
            }
        }
        GameSpec::new(counts, utilities).expect("valid game")
    }

    pub fn player_count(&self) -> usize {
        self.action_counts.len()
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    pub fn utilities(&self, player: usize) -> &[f64] {
        &self.utilities[player]
    }

    pub fn profile_count(&self) -> usize {
        self.action_counts.iter().product()
    }

    pub fn profile_index(&self, profile: &[usize]) -> usize {
        profile
            .iter()
            .zip(&self.action_counts)
            .fold(0, |idx, (&a, &n)| idx * n + a)
    }

    pub fn profile(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.player_count()];
        for (slot, &n) in out.iter_mut().zip(&self.action_counts).rev() {
            *slot = idx % n;
            idx /= n;
        }
        out
    }

    pub fn utility(&self, player: usize, profile: &[usize]) -> f64 {
        self.utilities[player][self.profile_index(profile)]
    }

    /// `U^l(a, a^{-l})`: player `l` swaps its action in `profile` for `a`.
    pub fn deviation_utility(&self, player: usize, profile: &[usize], action: usize) -> f64 {
        let mut p = profile.to_vec();
        p[player] = action;
        self.utility(player, &p)
    }

    pub fn utility_spread(&self, player: usize) -> f64 {
        let u = &self.utilities[player];
        let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = u.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    }

    /// `2 · A^l · spread`, or 1 for a player whose utility is constant.
    pub fn default_normalizer(&self, player: usize) -> f64 {
        let c = 2.0 * self.action_counts[player] as f64 * self.utility_spread(player);
        if c > 0.0 {
            c
        } else {
            1.0
        }
    }
}

/// One player's regrets, last action and normaliser `C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretState {
    actions: usize,
    /// Row-major `A × A`.
    regrets: Vec<f64>,
    pub last_action: usize,
    pub normalizer: f64,
}

impl RegretState {
    pub fn new(actions: usize, last_action: usize, normalizer: f64) -> Result<Self, GameError> {
        if actions == 0 {
            return Err(GameError::NoActions { player: 0 });
        }
        if last_action >= actions {
            return Err(GameError::ActionOutOfRange {
                action: last_action,
                count: actions,
            });
        }
        if !(normalizer > 0.0) || !normalizer.is_finite() {
            return Err(GameError::InvalidNormalizer {
                normalizer,
                required: 0.0,
            });
        }
        Ok(RegretState {
            actions,
            regrets: vec![0.0; actions * actions],
            last_action,
            normalizer,
        })
    }

    /// Builds a state from an explicit regret matrix; the diagonal is zeroed.
    pub fn with_regrets(
        regrets: Vec<Vec<f64>>,
        last_action: usize,
        normalizer: f64,
    ) -> Result<Self, GameError> {
        let mut s = RegretState::new(regrets.len(), last_action, normalizer)?;
        for (i, row) in regrets.iter().enumerate() {
            if row.len() != s.actions {
                return Err(GameError::ShapeMismatch {
                    expected: s.actions,
                    got: row.len(),
                });
            }
            for (j, &r) in row.iter().enumerate() {
                if i != j {
                    s.regrets[i * s.actions + j] = r;
                }
            }
        }
        Ok(s)
    }

    pub fn action_count(&self) -> usize {
        self.actions
    }

    pub fn regret(&self, i: usize, j: usize) -> f64 {
        self.regrets[i * self.actions + j]
    }

    pub fn regrets(&self) -> Vec<Vec<f64>> {
        self.regrets
            .chunks(self.actions)
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// `max_{i,j} r(i, j)⁺`.
    pub fn max_positive_regret(&self) -> f64 {
        self.regrets.iter().copied().fold(0.0, f64::max)
    }
}

/// Switch to `j` with probability `r(last, j)⁺ / C`, stay with the rest.
pub fn action_pmf(state: &RegretState) -> Result<Vec<f64>, GameError> {
    let last = state.last_action;
    let mut pmf: Vec<f64> = (0..state.actions)
        .map(|j| {
            if j == last {
                0.0
            } else {
                state.regret(last, j).max(0.0)
            }
        })
        .collect();
    let mass: f64 = pmf.iter().sum();
    if !(state.normalizer > mass) {
        return Err(GameError::InvalidNormalizer {
            normalizer: state.normalizer,
            required: mass,
        });
    }
    for p in pmf.iter_mut() {
        *p /= state.normalizer;
    }
    pmf[last] = 1.0 - mass / state.normalizer;
    Ok(pmf)
}

/// Stochastic-approximation step `k ≥ 1` for `player` after the joint
/// profile `profile` was played:
/// `r_k(i,j) = r_{k-1}(i,j) + (1/k)([U(j, a^{-l}) - U(a^l, a^{-l})]·1{a^l = i} - r_{k-1}(i,j))`.
pub fn regret_update(
    state: &RegretState,
    game: &GameSpec,
    player: usize,
    profile: &[usize],
    k: u64,
) -> RegretState {
    assert!(k >= 1, "steps are counted from 1");
    let step = 1.0 / k as f64;
    let own = profile[player];
    let played = game.utility(player, profile);
    let mut next = state.clone();
    for i in 0..state.actions {
        for j in 0..state.actions {
            if i == j {
                continue;
            }
            let gain = if i == own {
                game.deviation_utility(player, profile, j) - played
            } else {
                0.0
            };
            let r = &mut next.regrets[i * state.actions + j];
            *r += step * (gain - *r);
        }
    }
    next.last_action = own;
    next
}

/// Counts of joint profiles played.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    pub counts: Vec<u64>,
    pub steps: u64,
}

impl EmpiricalDistribution {
    pub fn new(profiles: usize) -> Self {
        EmpiricalDistribution {
            counts: vec![0; profiles],
            steps: 0,
        }
    }

    pub fn record(&mut self, profile_index: usize) {
        self.counts[profile_index] += 1;
        self.steps += 1;
    }

    /// `z_n`.
    pub fn pmf(&self) -> Vec<f64> {
        let n = self.steps.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }
}

/// Largest correlated-equilibrium constraint value and where it occurs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CeViolation {
    pub value: f64,
    pub player: usize,
    /// Recommended action `j`.
    pub recommended: usize,
    /// Deviation `i`.
    pub deviation: usize,
}

/// `max_{l, j ≠ i} Σ_{a^{-l}} μ(j, a^{-l}) [U^l(i, a^{-l}) - U^l(j, a^{-l})]`.
///
/// Nonpositive iff `μ` is a correlated equilibrium. Games where nobody has
/// two actions give 0.
pub fn ce_violation_of(pmf: &[f64], game: &GameSpec) -> Result<CeViolation, GameError> {
    if pmf.len() != game.profile_count() {
        return Err(GameError::ShapeMismatch {
            expected: game.profile_count(),
            got: pmf.len(),
        });
    }
    let mut best = CeViolation {
        value: f64::NEG_INFINITY,
        player: 0,
        recommended: 0,
        deviation: 0,
    };
    for l in 0..game.player_count() {
        let n = game.action_counts[l];
        // gains[j][i] accumulated in one pass over the profiles
        let mut gains = vec![0.0; n * n];
        for (idx, &mu) in pmf.iter().enumerate() {
            if mu == 0.0 {
                continue;
            }
            let profile = game.profile(idx);
            let j = profile[l];
            let u = game.utilities[l][idx];
            for i in 0..n {
                gains[j * n + i] += mu * (game.deviation_utility(l, &profile, i) - u);
            }
        }
        for j in 0..n {
            for i in (0..n).filter(|&i| i != j) {
                if gains[j * n + i] > best.value {
                    best = CeViolation {
                        value: gains[j * n + i],
                        player: l,
                        recommended: j,
                        deviation: i,
                    };
                }
            }
        }
    }
    if best.value == f64::NEG_INFINITY {
        best.value = 0.0;
    }
    Ok(best)
}

pub fn ce_violation(
    dist: &EmpiricalDistribution,
    game: &GameSpec,
) -> Result<CeViolation, GameError> {
    ce_violation_of(&dist.pmf(), game)
}

/// Weighted sum of the members' regrets; last action and `C` come from the
/// first member.
pub fn fuse_group_regrets(
    states: &[RegretState],
    weights: &[f64],
) -> Result<RegretState, GameError> {
    let leader = states.first().ok_or(GameError::EmptyGroup)?;
    if weights.len() != states.len() {
        return Err(GameError::ShapeMismatch {
            expected: states.len(),
            got: weights.len(),
        });
    }
    if weights.iter().any(|&w| !(w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(GameError::InvalidWeights);
    }
    let mut fused = leader.clone();
    fused.regrets.iter_mut().for_each(|r| *r = 0.0);
    for (s, &w) in states.iter().zip(weights) {
        if s.actions != leader.actions {
            return Err(GameError::ShapeMismatch {
                expected: leader.actions,
                got: s.actions,
            });
        }
        for (f, r) in fused.regrets.iter_mut().zip(&s.regrets) {
            *f += w * r;
        }
    }
    Ok(fused)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSettings {
    pub steps: u64,
    pub seed: u64,
    /// `C` per player; defaults to [`GameSpec::default_normalizer`].
    pub normalizers: Option<Vec<f64>>,
    /// Steps at which to record regrets and the CE violation.
    pub checkpoints: Vec<u64>,
    /// Keep every joint profile played.
    pub record_trace: bool,
}

impl GameSettings {
    pub fn new(steps: u64, seed: u64) -> Self {
        GameSettings {
            steps,
            seed,
            normalizers: None,
            checkpoints: vec![steps],
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub step: u64,
    pub max_positive_regret: Vec<f64>,
    pub ce_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatedGameRun {
    pub distribution: EmpiricalDistribution,
    pub states: Vec<RegretState>,
    pub checkpoints: Vec<Checkpoint>,
    /// Joint profiles in order, when requested.
    pub trace: Vec<Vec<usize>>,
}

/// Simultaneous regret matching. Step 1 actions are uniform; from step 2 on
/// each player samples from its [`action_pmf`]. All players then update with
/// the same joint profile.
pub fn run_repeated_game(
    game: &GameSpec,
    settings: &GameSettings,
) -> Result<RepeatedGameRun, GameError> {
    if settings.steps == 0 {
        return Err(GameError::ZeroSteps);
    }
    let normalizers: Vec<f64> = match &settings.normalizers {
        Some(c) if c.len() != game.player_count() => {
            return Err(GameError::ShapeMismatch {
                expected: game.player_count(),
                got: c.len(),
            })
        }
        Some(c) => c.clone(),
        None => (0..game.player_count())
            .map(|l| game.default_normalizer(l))
            .collect(),
    };
    let mut rng = SimRng::new(settings.seed);
    let mut profile: Vec<usize> = game.action_counts.iter().map(|&n| rng.below(n)).collect();
    let mut states = profile
        .iter()
        .zip(&game.action_counts)
        .zip(&normalizers)
        .map(|((&a, &n), &c)| RegretState::new(n, a, c))
        .collect::<Result<Vec<_>, _>>()?;
    let mut distribution = EmpiricalDistribution::new(game.profile_count());
    let mut checkpoints = Vec::new();
    let mut trace = Vec::new();
    for k in 1..=settings.steps {
        if k > 1 {
            for (l, state) in states.iter().enumerate() {
                profile[l] = rng.categorical(&action_pmf(state)?);
            }
        }
        distribution.record(game.profile_index(&profile));
        if settings.record_trace {
            trace.push(profile.clone());
        }
        for (l, state) in states.iter_mut().enumerate() {
            *state = regret_update(state, game, l, &profile, k);
        }
        if settings.checkpoints.contains(&k) {
            checkpoints.push(Checkpoint {
                step: k,
                max_positive_regret: states
                    .iter()
                    .map(RegretState::max_positive_regret)
                    .collect(),
                ce_violation: ce_violation(&distribution, game)?.value,
            });
        }
    }
    Ok(RepeatedGameRun {
        distribution,
        states,
        checkpoints,
        trace,
    })
}

/// Runs one game per seed in parallel and averages each checkpoint.
pub fn average_checkpoints(
    game: &GameSpec,
    settings: &GameSettings,
    seeds: &[u64],
) -> Result<Vec<Checkpoint>, GameError> {
    let runs = seeds
        .par_iter()
        .map(|&seed| {
            run_repeated_game(
                game,
                &GameSettings {
                    seed,
                    record_trace: false,
                    ..settings.clone()
                },
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n = runs.len().max(1) as f64;
    let mut mean: Vec<Checkpoint> = runs
        .first()
        .map(|r| r.checkpoints.clone())
        .unwrap_or_default();
    for (c, point) in mean.iter_mut().enumerate() {
        point.ce_violation = runs
            .iter()
            .map(|r| r.checkpoints[c].ce_violation)
            .sum::<f64>()
            / n;
        for (l, m) in point.max_positive_regret.iter_mut().enumerate() {
            *m = runs
                .iter()
                .map(|r| r.checkpoints[c].max_positive_regret[l])
                .sum::<f64>()
                / n;
        }
    }
    Ok(mean)
}
