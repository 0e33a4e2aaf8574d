//! Finite Markov games with perfect-recall information states.
//!
//! States are identified with full histories, so every player-action
//! transition is deterministic and all stochasticity lives in explicit chance
//! states. Rewards attach to transitions; terminal states are absorbing with
//! zero reward. Each decision state lists its *actors*: the players that have
//! a real choice there (one for the turn-based poker games, both for one-shot
//! matrix games). A joint action is a mixed-radix index over the actors'
//! action sets, first actor most significant.

pub mod kuhn;
pub mod leduc;
pub mod matrix;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::policy::BehaviorPolicy;
use crate::rng;
use crate::{Error, Result};

pub type StateId = u32;
pub type PlayerId = usize;

/// Default cap on nodes visited by one exact tree walk. All in-scope games are
/// far below it; the guard exists to catch accidentally huge games.
pub const DEFAULT_NODE_BUDGET: usize = 50_000_000;

/// Selects one of the built-in games.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum GameId {
    Kuhn,
    Leduc,
    Matrix { seed: u64, rows: usize, cols: usize },
}

impl fmt::Display for GameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GameId::Kuhn => write!(f, "kuhn"),
            GameId::Leduc => write!(f, "leduc"),
            GameId::Matrix { seed, rows, cols } => write!(f, "matrix:{seed}:{rows}x{cols}"),
        }
    }
}

impl FromStr for GameId {
    type Err = Error;

    /// Parses `kuhn`, `leduc`, or `matrix:<seed>:<m>x<n>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kuhn" => Ok(GameId::Kuhn),
            "leduc" => Ok(GameId::Leduc),
            _ => {
                let err = || Error::UnknownGame(s.to_string());
                let rest = s.strip_prefix("matrix:").ok_or_else(err)?;
                let (seed, dims) = rest.split_once(':').ok_or_else(err)?;
                let (m, n) = dims.split_once('x').ok_or_else(err)?;
                let seed = seed.parse().map_err(|_| err())?;
                let rows = m.parse().map_err(|_| err())?;
                let cols = n.parse().map_err(|_| err())?;
                if rows == 0 || cols == 0 {
                    return Err(err());
                }
                Ok(GameId::Matrix { seed, rows, cols })
            }
        }
    }
}

/// One chance branch: probability, successor, per-player transition rewards.
#[derive(Debug, Clone)]
pub struct ChanceOutcome {
    pub prob: f64,
    pub next: StateId,
    pub rewards: Vec<f64>,
}

/// A state where at least one player chooses an action.
#[derive(Debug, Clone)]
pub struct DecisionState {
    /// `(player, acting-infostate id)` for every player with >= 2 actions.
    pub actors: Vec<(PlayerId, u32)>,
    /// Successor per joint action (mixed-radix over the actors' action counts).
    pub next: Vec<StateId>,
    /// Per joint action, per player transition rewards.
    pub rewards: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub enum StateKind {
    Terminal,
    Chance(Vec<ChanceOutcome>),
    Decision(DecisionState),
}

#[derive(Debug, Clone)]
pub struct State {
    pub kind: StateKind,
    /// Per player, the observation-key id at this state (decision states
    /// only; `u32::MAX` elsewhere). Indexes into the per-player key table.
    obs: Vec<u32>,
}

/// Interned acting infostates of one player: the information states at which
/// the player actually chooses among >= 2 actions. Policy tables are indexed
/// by these ids.
#[derive(Debug, Clone, Default)]
pub struct PlayerInfostates {
    keys: Vec<String>,
    num_actions: Vec<usize>,
    by_key: HashMap<String, u32>,
}

impl PlayerInfostates {
    pub fn len(&self) -> usize {
        self.keys.len()
    }
    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
    pub fn key(&self, id: u32) -> &str {
        &self.keys[id as usize]
    }
    pub fn num_actions(&self, id: u32) -> usize {
        self.num_actions[id as usize]
    }
    pub fn id_of(&self, key: &str) -> Option<u32> {
        self.by_key.get(key).copied()
    }
}

/// A finite multi-agent game over explicit history states.
#[derive(Debug, Clone)]
pub struct MarkovGame {
    id: GameId,
    num_players: usize,
    discount: f64,
    zero_sum: bool,
    payoff_bounds: (f64, f64),
    states: Vec<State>,
    initial: Vec<(StateId, f64)>,
    infostates: Vec<PlayerInfostates>,
    /// Per player, interned observation keys over all decision states.
    obs_keys: Vec<Vec<String>>,
    node_budget: usize,
}

impl MarkovGame {
    pub fn id(&self) -> GameId {
        self.id
    }
    pub fn num_players(&self) -> usize {
        self.num_players
    }
    pub fn discount(&self) -> f64 {
        self.discount
    }
    pub fn is_zero_sum(&self) -> bool {
        self.zero_sum
    }
    /// `[u_lo, u_hi]` bounds on any player's episodic return.
    pub fn payoff_bounds(&self) -> (f64, f64) {
        self.payoff_bounds
    }
    /// Payoff range `R = u_hi - u_lo`.
    pub fn payoff_range(&self) -> f64 {
        self.payoff_bounds.1 - self.payoff_bounds.0
    }
    pub fn num_states(&self) -> usize {
        self.states.len()
    }
    pub fn state(&self, id: StateId) -> &State {
        &self.states[id as usize]
    }
    pub fn kind(&self, id: StateId) -> &StateKind {
        &self.states[id as usize].kind
    }
    pub fn is_terminal(&self, id: StateId) -> bool {
        matches!(self.states[id as usize].kind, StateKind::Terminal)
    }
    pub fn initial_states(&self) -> &[(StateId, f64)] {
        &self.initial
    }
    pub fn node_budget(&self) -> usize {
        self.node_budget
    }
    pub fn set_node_budget(&mut self, budget: usize) {
        self.node_budget = budget;
    }

    /// The player's acting infostates (where it chooses among >= 2 actions).
    pub fn infostates(&self, player: PlayerId) -> &PlayerInfostates {
        &self.infostates[player]
    }

    /// The player's acting-infostate id at `state`, if the player acts there.
    pub fn acting_infostate_at(&self, player: PlayerId, state: StateId) -> Option<u32> {
        match &self.states[state as usize].kind {
            StateKind::Decision(d) => d
                .actors
                .iter()
                .find(|(p, _)| *p == player)
                .map(|(_, id)| *id),
            _ => None,
        }
    }

    /// The player's perfect-recall observation key at a decision state.
    pub fn infostate_key(&self, player: PlayerId, state: StateId) -> Option<&str> {
        let obs = &self.states[state as usize].obs;
        if obs.is_empty() {
            return None;
        }
        Some(&self.obs_keys[player][obs[player] as usize])
    }

    /// Number of distinct information-state keys the player holds across all
    /// decision states (including states where another player is to act).
    pub fn decision_infostate_count(&self, player: PlayerId) -> usize {
        self.obs_keys[player].len()
    }

    /// Decomposes a joint-action index into per-actor action indices.
    pub fn split_joint(&self, d: &DecisionState, joint: u32) -> Vec<usize> {
        let mut digits = vec![0usize; d.actors.len()];
        let mut rem = joint as usize;
        for (slot, &(p, info)) in d.actors.iter().enumerate().rev() {
            let n = self.infostates[p].num_actions(info);
            digits[slot] = rem % n;
            rem /= n;
        }
        digits
    }

    /// Structural validation run on every built game.
    fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::MalformedData(msg.to_string()))
            }
        };
        let total: f64 = self.initial.iter().map(|(_, p)| p).sum();
        check((total - 1.0).abs() < 1e-9, "initial distribution must sum to 1")?;
        for state in &self.states {
            match &state.kind {
                StateKind::Terminal => {}
                StateKind::Chance(outcomes) => {
                    let sum: f64 = outcomes.iter().map(|o| o.prob).sum();
                    check((sum - 1.0).abs() < 1e-9, "chance outcomes must sum to 1")?;
                    for o in outcomes {
                        check(o.prob >= 0.0, "chance probabilities must be nonnegative")?;
                        check(o.rewards.len() == self.num_players, "reward arity")?;
                        if self.zero_sum {
                            let s: f64 = o.rewards.iter().sum();
                            check(s.abs() < 1e-9, "zero-sum violated at a chance outcome")?;
                        }
                    }
                }
                StateKind::Decision(d) => {
                    check(!d.actors.is_empty(), "decision state without actors")?;
                    check(state.obs.len() == self.num_players, "missing observation keys")?;
                    let joints: usize = d
                        .actors
                        .iter()
                        .map(|&(p, info)| self.infostates[p].num_actions(info))
                        .product();
                    check(d.next.len() == joints, "joint-action table size")?;
                    check(d.rewards.len() == joints, "joint-reward table size")?;
                    for r in &d.rewards {
                        check(r.len() == self.num_players, "reward arity")?;
                        if self.zero_sum {
                            let s: f64 = r.iter().sum();
                            check(s.abs() < 1e-9, "zero-sum violated at a decision state")?;
                        }
                    }
                }
            }
        }
        // Perfect recall, structural part: all states sharing a key for a
        // player present that player identical action sets.
        for player in 0..self.num_players {
            let mut seen: HashMap<u32, Option<usize>> = HashMap::new();
            for (sid, state) in self.states.iter().enumerate() {
                if let StateKind::Decision(d) = &state.kind {
                    let obs = state.obs[player];
                    let acting = d
                        .actors
                        .iter()
                        .find(|(p, _)| *p == player)
                        .map(|&(p, info)| self.infostates[p].num_actions(info));
                    match seen.entry(obs).or_insert(acting) {
                        stored if *stored == acting => {}
                        _ => {
                            return Err(Error::MalformedData(format!(
                                "perfect recall violated at state {sid} for player {player}"
                            )))
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Incremental constructor used by the game builders.
pub(crate) struct GameBuilder {
    id: GameId,
    num_players: usize,
    discount: f64,
    zero_sum: bool,
    payoff_bounds: (f64, f64),
    states: Vec<State>,
    infostates: Vec<PlayerInfostates>,
    obs_keys: Vec<Vec<String>>,
    obs_index: Vec<HashMap<String, u32>>,
}

impl GameBuilder {
    pub fn new(id: GameId, num_players: usize) -> Self {
        GameBuilder {
            id,
            num_players,
            discount: 1.0,
            zero_sum: true,
            payoff_bounds: (0.0, 0.0),
            states: Vec::new(),
            infostates: vec![PlayerInfostates::default(); num_players],
            obs_keys: vec![Vec::new(); num_players],
            obs_index: vec![HashMap::new(); num_players],
        }
    }

    pub fn payoff_bounds(&mut self, lo: f64, hi: f64) {
        self.payoff_bounds = (lo, hi);
    }

    pub fn add_terminal(&mut self) -> StateId {
        self.states.push(State { kind: StateKind::Terminal, obs: Vec::new() });
        (self.states.len() - 1) as StateId
    }

    pub fn add_chance(&mut self, outcomes: Vec<ChanceOutcome>) -> StateId {
        self.states.push(State { kind: StateKind::Chance(outcomes), obs: Vec::new() });
        (self.states.len() - 1) as StateId
    }

    /// Adds a decision state. `obs` holds one perfect-recall key per player;
    /// `actors` lists `(player, num_actions)` for players with a real choice.
    /// `rows` holds `(next, rewards)` per joint action, first actor most
    /// significant.
    pub fn add_decision(
        &mut self,
        obs: Vec<String>,
        actors: Vec<(PlayerId, usize)>,
        rows: Vec<(StateId, Vec<f64>)>,
    ) -> StateId {
        assert_eq!(obs.len(), self.num_players);
        let mut resolved = Vec::with_capacity(actors.len());
        for &(player, num_actions) in &actors {
            let key = obs[player].clone();
            let table = &mut self.infostates[player];
            let id = *table.by_key.entry(key.clone()).or_insert_with(|| {
                table.keys.push(key);
                table.num_actions.push(num_actions);
                (table.keys.len() - 1) as u32
            });
            assert_eq!(
                table.num_actions[id as usize], num_actions,
                "action set changed within an infostate"
            );
            resolved.push((player, id));
        }
        let mut obs_ids = Vec::with_capacity(self.num_players);
        for (player, key) in obs.into_iter().enumerate() {
            let idx = &mut self.obs_index[player];
            let keys = &mut self.obs_keys[player];
            let id = *idx.entry(key.clone()).or_insert_with(|| {
                keys.push(key);
                (keys.len() - 1) as u32
            });
            obs_ids.push(id);
        }
        let (next, rewards) = rows.into_iter().unzip();
        self.states.push(State {
            kind: StateKind::Decision(DecisionState { actors: resolved, next, rewards }),
            obs: obs_ids,
        });
        (self.states.len() - 1) as StateId
    }

    pub fn finish(self, initial: Vec<(StateId, f64)>) -> Result<MarkovGame> {
        let game = MarkovGame {
            id: self.id,
            num_players: self.num_players,
            discount: self.discount,
            zero_sum: self.zero_sum,
            payoff_bounds: self.payoff_bounds,
            states: self.states,
            initial,
            infostates: self.infostates,
            obs_keys: self.obs_keys,
            node_budget: DEFAULT_NODE_BUDGET,
        };
        game.validate()?;
        Ok(game)
    }
}

/// Builds one of the built-in games.
pub fn build_game(id: GameId) -> Result<MarkovGame> {
    match id {
        GameId::Kuhn => kuhn::build(),
        GameId::Leduc => leduc::build(),
        GameId::Matrix { seed, rows, cols } => matrix::build(seed, rows, cols),
    }
}

/// One step of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub state: StateId,
    pub action: StepAction,
    pub rewards: Vec<f64>,
    pub next: StateId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepAction {
    Chance { outcome: u32 },
    Decision { joint: u32 },
}

/// A sampled trajectory through the game, ending at a terminal state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeTrace {
    pub steps: Vec<TraceStep>,
}

impl EpisodeTrace {
    /// Undiscounted per-player return of the episode.
    pub fn returns(&self, num_players: usize) -> Vec<f64> {
        let mut total = vec![0.0; num_players];
        for step in &self.steps {
            for (t, r) in total.iter_mut().zip(&step.rewards) {
                *t += r;
            }
        }
        total
    }

    /// Checks the trace against the game's transition support.
    pub fn validate(&self, game: &MarkovGame) -> Result<()> {
        let mut expected: Option<StateId> = None;
        for step in &self.steps {
            if let Some(prev) = expected {
                if prev != step.state {
                    return Err(Error::MalformedData("trace steps are not contiguous".into()));
                }
            }
            let ok = match (&game.kind(step.state), step.action) {
                (StateKind::Chance(outcomes), StepAction::Chance { outcome }) => outcomes
                    .get(outcome as usize)
                    .is_some_and(|o| o.next == step.next && o.prob > 0.0),
                (StateKind::Decision(d), StepAction::Decision { joint }) => {
                    d.next.get(joint as usize) == Some(&step.next)
                }
                _ => false,
            };
            if !ok {
                return Err(Error::MalformedData("trace step outside transition support".into()));
            }
            expected = Some(step.next);
        }
        match expected {
            Some(last) if game.is_terminal(last) => Ok(()),
            _ => Err(Error::MalformedData("trace does not end at a terminal state".into())),
        }
    }
}

fn sample_index(rng: &mut ChaCha8Rng, probs: impl Iterator<Item = f64>, len: usize) -> usize {
    let draw: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.enumerate() {
        acc += p;
        if draw < acc {
            return i;
        }
    }
    len - 1
}

/// Samples one episode under the given behavior profile. Deterministic in the
/// seed. Fails if a policy lacks an encountered infostate.
pub fn play_episode(
    game: &MarkovGame,
    profile: &[BehaviorPolicy],
    seed: u64,
) -> Result<EpisodeTrace> {
    let mut rng = rng::stream(seed, 0);
    play_episode_with(game, profile, &mut rng)
}

/// As [`play_episode`], drawing from a caller-supplied stream.
pub fn play_episode_with(
    game: &MarkovGame,
    profile: &[BehaviorPolicy],
    rng: &mut ChaCha8Rng,
) -> Result<EpisodeTrace> {
    assert_eq!(profile.len(), game.num_players(), "one policy per player");
    let initial = game.initial_states();
    let mut state = if initial.len() == 1 {
        initial[0].0
    } else {
        let idx = sample_index(rng, initial.iter().map(|(_, p)| *p), initial.len());
        initial[idx].0
    };
    let mut steps = Vec::new();
    loop {
        match game.kind(state) {
            StateKind::Terminal => return Ok(EpisodeTrace { steps }),
            StateKind::Chance(outcomes) => {
                let idx = sample_index(rng, outcomes.iter().map(|o| o.prob), outcomes.len());
                let o = &outcomes[idx];
                steps.push(TraceStep {
                    state,
                    action: StepAction::Chance { outcome: idx as u32 },
                    rewards: o.rewards.clone(),
                    next: o.next,
                });
                state = o.next;
            }
            StateKind::Decision(d) => {
                let mut joint = 0usize;
                for &(player, info) in &d.actors {
                    let row = profile[player].row(info).ok_or_else(|| Error::MissingInfostate {
                        player,
                        key: game.infostates(player).key(info).to_string(),
                    })?;
                    let a = sample_index(rng, row.iter().copied(), row.len());
                    joint = joint * row.len() + a;
                }
                let next = d.next[joint];
                steps.push(TraceStep {
                    state,
                    action: StepAction::Decision { joint: joint as u32 },
                    rewards: d.rewards[joint].clone(),
                    next,
                });
                state = next;
            }
        }
    }
}

/// Exact expected per-player return of the profile, by recursive expectation
/// over the game tree. Errors if the walk exceeds the game's node budget.
pub fn expected_payoff(game: &MarkovGame, profile: &[BehaviorPolicy]) -> Result<Vec<f64>> {
    assert_eq!(profile.len(), game.num_players(), "one policy per player");
    let mut totals = vec![0.0; game.num_players()];
    let mut visited = 0usize;
    for &(state, prob) in game.initial_states() {
        walk_expectation(game, profile, state, prob, &mut totals, &mut visited)?;
    }
    Ok(totals)
}

fn walk_expectation(
    game: &MarkovGame,
    profile: &[BehaviorPolicy],
    state: StateId,
    weight: f64,
    totals: &mut [f64],
    visited: &mut usize,
) -> Result<()> {
    *visited += 1;
    if *visited > game.node_budget() {
        return Err(Error::TreeBudgetExceeded { budget: game.node_budget() });
    }
    if weight == 0.0 {
        return Ok(());
    }
    match game.kind(state) {
        StateKind::Terminal => {}
        StateKind::Chance(outcomes) => {
            for o in outcomes {
                let w = weight * o.prob;
                if w == 0.0 {
                    continue;
                }
                for (t, r) in totals.iter_mut().zip(&o.rewards) {
                    *t += w * r;
                }
                walk_expectation(game, profile, o.next, w, totals, visited)?;
            }
        }
        StateKind::Decision(d) => {
            let rows: Vec<&[f64]> = d
                .actors
                .iter()
                .map(|&(player, info)| {
                    profile[player].row(info).ok_or_else(|| Error::MissingInfostate {
                        player,
                        key: game.infostates(player).key(info).to_string(),
                    })
                })
                .collect::<Result<_>>()?;
            for (joint, next) in d.next.iter().enumerate() {
                let mut rem = joint;
                let mut p = 1.0;
                for row in rows.iter().rev() {
                    p *= row[rem % row.len()];
                    rem /= row.len();
                }
                let w = weight * p;
                if w == 0.0 {
                    continue;
                }
                for (t, r) in totals.iter_mut().zip(&d.rewards[joint]) {
                    *t += w * r;
                }
                walk_expectation(game, profile, *next, w, totals, visited)?;
            }
        }
    }
    Ok(())
}
