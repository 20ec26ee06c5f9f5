//! Multi-agent Bayesian social learning.
//!
//! The crate is organised around five engines that share one finite-state
//! model ([`ModelParams`]):
//!
//! - [`belief`]: HMM filter, myopic actions and the social learning filter,
//!   whose action likelihood depends on the public belief itself.
//! - [`social`]: the sequential protocol, herding and cascade detectors.
//! - [`incest`]: information-flow DAGs, transitive closure and the
//!   incest-free fusion weights used by an online reputation system.
//! - [`detection`]: quickest change detection and herding stopping problems
//!   solved by value iteration on a belief grid.
//! - [`game`]: regret matching in repeated games and correlated equilibria.
//!
//! States, observations and actions are 0-based everywhere in the API.
//! Information-flow nodes keep the conventional 1-based numbering
//! `n = s + S(k-1)`.

pub mod belief;
pub mod detection;
pub mod game;
pub mod incest;
pub mod matrix;
pub mod rng;
pub mod social;

pub use belief::{ActionRule, Belief, FilterError, ModelError, ModelIssue, ModelParams};
pub use matrix::Matrix;
pub use rng::SimRng;
