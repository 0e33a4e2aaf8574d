//! Tabular policy-space response oracles (PSRO) on small imperfect-information
//! games, with a family of joint-experience best-response oracles.
//!
//! The crate is organized around a finite Markov-game abstraction
//! ([`game::MarkovGame`]) with perfect-recall information states. On top of it:
//!
//! - [`induced`] reduces the multi-agent game to a single-agent MDP per player
//!   by absorbing the opponents' behavior strategies into the dynamics,
//! - [`dataset`] collects joint experience under a (possibly perturbed)
//!   strategy profile and estimates per-player models from it,
//! - [`oracles`] computes best responses: exact tree search, value iteration
//!   on the induced MDP, budgeted independent BR, and the offline
//!   joint-experience variants (naive and SPI-constrained),
//! - [`meta`] maintains the restricted empirical game and solves it with
//!   projected replicator dynamics,
//! - [`psro`] orchestrates the full loop and the exact NashConv metric.
//!
//! Everything is deterministic given seeds; all randomness flows through
//! explicitly derived ChaCha streams (see [`rng`]).

pub mod dataset;
pub mod game;
pub mod induced;
pub mod meta;
pub mod oracles;
pub mod policy;
pub mod psro;
pub mod rng;

pub use dataset::{EstimatedModel, ExplorationKind, ExplorationSpec, JointDataset};
pub use game::{build_game, expected_payoff, play_episode, EpisodeTrace, GameId, MarkovGame};
pub use induced::{induce, to_behavior, InducedMdp, MixedStrategy};
pub use meta::{
    projected_replicator_dynamics, restricted_regret, EmpiricalGame, EvalMode, MetaProfile,
};
pub use oracles::{
    exact_best_response, independent_br, naive_jbr, spi_jbr, value_iteration, BrResult, QTable,
    SpiConfig,
};
pub use policy::BehaviorPolicy;
pub use psro::{nashconv, run_psro, IterationRecord, Method, PrdParams, RunConfig, SpiMode};

/// Errors surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown game id: `{0}`")]
    UnknownGame(String),
    #[error("player {player} has no policy entry for infostate `{key}`")]
    MissingInfostate { player: usize, key: String },
    #[error("tree walk exceeded the node budget of {budget} nodes")]
    TreeBudgetExceeded { budget: usize },
    #[error("value iteration did not converge after {sweeps} sweeps (residual {residual:.3e})")]
    NoConvergence { sweeps: usize, residual: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed data: {0}")]
    MalformedData(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
