//! Reduction of the multi-agent game to a single-agent MDP.
//!
//! Fixing the opponents' behavior makes the process over one player's
//! information states Markov: under perfect recall the key encodes the
//! player's full observed history, so the conditional distribution over
//! hidden histories given the key depends only on chance and the opponents
//! (the player's own reach factor is constant within an information state and
//! cancels). [`induce`] builds exactly that decision-point MDP: opponent and
//! chance moves between two consecutive decisions of the player are folded
//! into the transition kernel and the expected rewards.

use std::collections::BTreeMap;

use crate::game::{MarkovGame, PlayerId, StateId, StateKind};
use crate::policy::BehaviorPolicy;
use crate::{Error, Result};

/// A mixture over behavior policies of one player.
#[derive(Debug, Clone)]
pub struct MixedStrategy {
    pub player: PlayerId,
    pub atoms: Vec<(BehaviorPolicy, f64)>,
}

impl MixedStrategy {
    pub fn new(player: PlayerId, atoms: Vec<(BehaviorPolicy, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidConfig("mixture needs at least one atom".into()));
        }
        if atoms.iter().any(|(_, w)| *w < 0.0) {
            return Err(Error::InvalidConfig("mixture weights must be nonnegative".into()));
        }
        let sum: f64 = atoms.iter().map(|(_, w)| w).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "mixture weights sum to {sum}, expected 1"
            )));
        }
        Ok(MixedStrategy { player, atoms })
    }
}

/// Converts a mixture over policies into the realization-equivalent behavior
/// strategy: at each infostate the atoms' rows are blended with weights
/// proportional to `atom weight x own-reach probability of the infostate`.
/// Infostates unreachable under every atom get the uniform distribution.
pub fn to_behavior(mix: &MixedStrategy, game: &MarkovGame) -> Result<BehaviorPolicy> {
    let player = mix.player;
    let infos = game.infostates(player);
    let n = infos.len();
    if let [(only, _)] = mix.atoms.as_slice() {
        if only.is_complete() {
            return Ok(only.clone());
        }
    }
    // Own-reach of every acting infostate, per atom.
    let mut reach = vec![vec![0.0f64; n]; mix.atoms.len()];
    let mut seen = vec![vec![false; n]; mix.atoms.len()];
    for (k, (policy, _)) in mix.atoms.iter().enumerate() {
        for &(root, _) in game.initial_states() {
            own_reach_walk(
                game,
                player,
                policy,
                root,
                1.0,
                &mut reach[k],
                &mut seen[k],
            )?;
        }
    }
    let mut result = BehaviorPolicy::empty(game, player);
    for id in 0..n as u32 {
        let actions = infos.num_actions(id);
        let mut row = vec![0.0; actions];
        let mut den = 0.0;
        for (k, (policy, weight)) in mix.atoms.iter().enumerate() {
            let w = weight * reach[k][id as usize];
            if w == 0.0 {
                continue;
            }
            den += w;
            let atom_row = policy.row(id).expect("positive reach implies a defined row");
            for (acc, p) in row.iter_mut().zip(atom_row) {
                *acc += w * p;
            }
        }
        if den > 0.0 {
            row.iter_mut().for_each(|p| *p /= den);
        } else {
            row = vec![1.0 / actions as f64; actions];
        }
        result.set_row(id, row);
    }
    Ok(result)
}

fn own_reach_walk(
    game: &MarkovGame,
    player: PlayerId,
    policy: &BehaviorPolicy,
    state: StateId,
    prob: f64,
    reach: &mut [f64],
    seen: &mut [bool],
) -> Result<()> {
    match game.kind(state) {
        StateKind::Terminal => Ok(()),
        StateKind::Chance(outcomes) => {
            for o in outcomes {
                own_reach_walk(game, player, policy, o.next, prob, reach, seen)?;
            }
            Ok(())
        }
        StateKind::Decision(d) => {
            let own = d.actors.iter().position(|(p, _)| *p == player);
            let row = match own {
                Some(slot) => {
                    let info = d.actors[slot].1;
                    let idx = info as usize;
                    if seen[idx] {
                        debug_assert!(
                            (reach[idx] - prob).abs() < 1e-9,
                            "perfect recall: own-reach must agree across an infostate"
                        );
                    } else {
                        seen[idx] = true;
                        reach[idx] = prob;
                    }
                    match policy.row(info) {
                        Some(row) => Some((slot, row)),
                        None if prob == 0.0 => return Ok(()),
                        None => {
                            return Err(Error::MissingInfostate {
                                player,
                                key: game.infostates(player).key(info).to_string(),
                            })
                        }
                    }
                }
                None => None,
            };
            for (joint, &next) in d.next.iter().enumerate() {
                let p = match &row {
                    Some((slot, row)) => {
                        let digits = game.split_joint(d, joint as u32);
                        prob * row[digits[*slot]]
                    }
                    None => prob,
                };
                own_reach_walk(game, player, policy, next, p, reach, seen)?;
            }
            Ok(())
        }
    }
}

/// Successor of an induced-MDP transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdpNext {
    State(usize),
    Terminal,
}

/// Single-agent MDP for one player with the opponents absorbed. States are
/// the player's acting infostates reachable under the opponents' behavior.
#[derive(Debug, Clone)]
pub struct InducedMdp {
    pub player: PlayerId,
    /// MDP state -> the game's acting-infostate id.
    pub infostates: Vec<u32>,
    pub num_actions: Vec<usize>,
    /// `transitions[s][a]` lists `(successor, probability)`; rows sum to 1.
    pub transitions: Vec<Vec<Vec<(MdpNext, f64)>>>,
    /// Expected reward accumulated from taking `a` at `s` until the next
    /// decision point (or termination).
    pub rewards: Vec<Vec<f64>>,
    pub discount: f64,
    /// Distribution over first decision points; may sum to less than 1 when
    /// episodes can terminate before the player ever acts.
    pub initial: Vec<(usize, f64)>,
    /// Expected reward collected before the first decision point.
    pub entry_reward: f64,
    /// Bounds on episodic returns, inherited from the game.
    pub value_bounds: (f64, f64),
}

#[derive(Default)]
struct FoldAcc {
    reward: f64,
    /// Arrival mass per (acting infostate, game state).
    arrivals: BTreeMap<u32, BTreeMap<StateId, f64>>,
    terminal: f64,
}

/// Builds the induced MDP of `player` against fixed opponent behaviors
/// (`opponents[player]` is ignored). Requires an undiscounted episodic game.
pub fn induce(
    game: &MarkovGame,
    player: PlayerId,
    opponents: &[BehaviorPolicy],
) -> Result<InducedMdp> {
    if game.discount() != 1.0 {
        return Err(Error::InvalidConfig(
            "induce requires an undiscounted episodic game".into(),
        ));
    }
    let mut entry = FoldAcc::default();
    for &(root, mass) in game.initial_states() {
        fold(game, player, opponents, root, mass, &mut entry)?;
    }

    let mut index: BTreeMap<u32, usize> = BTreeMap::new();
    let mut infostates: Vec<u32> = Vec::new();
    let mut members: Vec<BTreeMap<StateId, f64>> = Vec::new();
    let mut intern = |info: u32,
                      mass: &BTreeMap<StateId, f64>,
                      infostates: &mut Vec<u32>,
                      members: &mut Vec<BTreeMap<StateId, f64>>| {
        let idx = *index.entry(info).or_insert_with(|| {
            infostates.push(info);
            members.push(BTreeMap::new());
            infostates.len() - 1
        });
        for (&s, &m) in mass {
            *members[idx].entry(s).or_insert(0.0) += m;
        }
        idx
    };

    let initial: Vec<(usize, f64)> = entry
        .arrivals
        .iter()
        .map(|(&info, states)| {
            let mass: f64 = states.values().sum();
            (intern(info, states, &mut infostates, &mut members), mass)
        })
        .collect();

    let infos = game.infostates(player);
    let mut transitions: Vec<Vec<Vec<(MdpNext, f64)>>> = Vec::new();
    let mut rewards: Vec<Vec<f64>> = Vec::new();
    let mut cursor = 0;
    while cursor < infostates.len() {
        let info = infostates[cursor];
        let num_actions = infos.num_actions(info);
        let total: f64 = members[cursor].values().sum();
        let posterior: Vec<(StateId, f64)> = members[cursor]
            .iter()
            .map(|(&s, &m)| (s, m / total))
            .collect();
        let mut row_t = Vec::with_capacity(num_actions);
        let mut row_r = Vec::with_capacity(num_actions);
        for action in 0..num_actions {
            let mut acc = FoldAcc::default();
            for &(state, weight) in &posterior {
                expand(game, player, opponents, state, action, weight, &mut acc)?;
            }
            let mut outs: Vec<(MdpNext, f64)> = acc
                .arrivals
                .iter()
                .map(|(&info, states)| {
                    let mass: f64 = states.values().sum();
                    (
                        MdpNext::State(intern(info, states, &mut infostates, &mut members)),
                        mass,
                    )
                })
                .collect();
            if acc.terminal > 0.0 {
                outs.push((MdpNext::Terminal, acc.terminal));
            }
            row_t.push(outs);
            row_r.push(acc.reward);
        }
        transitions.push(row_t);
        rewards.push(row_r);
        cursor += 1;
    }

    Ok(InducedMdp {
        player,
        infostates,
        num_actions: transitions.iter().map(|row| row.len()).collect(),
        transitions,
        rewards,
        discount: game.discount(),
        initial,
        entry_reward: entry.reward,
        value_bounds: game.payoff_bounds(),
    })
}

/// Walks forward from `state` with probability mass `mass`, marginalizing
/// chance and opponents, until hitting a decision point of `player` or a
/// terminal state.
fn fold(
    game: &MarkovGame,
    player: PlayerId,
    opponents: &[BehaviorPolicy],
    state: StateId,
    mass: f64,
    acc: &mut FoldAcc,
) -> Result<()> {
    if mass == 0.0 {
        return Ok(());
    }
    match game.kind(state) {
        StateKind::Terminal => {
            acc.terminal += mass;
            Ok(())
        }
        StateKind::Chance(outcomes) => {
            for o in outcomes {
                let m = mass * o.prob;
                if m > 0.0 {
                    acc.reward += m * o.rewards[player];
                    fold(game, player, opponents, o.next, m, acc)?;
                }
            }
            Ok(())
        }
        StateKind::Decision(d) => {
            if let Some(&(_, info)) = d.actors.iter().find(|(p, _)| *p == player) {
                *acc.arrivals
                    .entry(info)
                    .or_default()
                    .entry(state)
                    .or_insert(0.0) += mass;
                return Ok(());
            }
            let rows: Vec<&[f64]> = d
                .actors
                .iter()
                .map(|&(p, info)| {
                    opponents[p].row(info).ok_or_else(|| Error::MissingInfostate {
                        player: p,
                        key: game.infostates(p).key(info).to_string(),
                    })
                })
                .collect::<Result<_>>()?;
            for (joint, &next) in d.next.iter().enumerate() {
                let mut rem = joint;
                let mut p = 1.0;
                for row in rows.iter().rev() {
                    p *= row[rem % row.len()];
                    rem /= row.len();
                }
                let m = mass * p;
                if m > 0.0 {
                    acc.reward += m * d.rewards[joint][player];
                    fold(game, player, opponents, next, m, acc)?;
                }
            }
            Ok(())
        }
    }
}

/// Applies `action` of `player` at a decision state where the player acts,
/// marginalizing any co-actors, then folds forward.
fn expand(
    game: &MarkovGame,
    player: PlayerId,
    opponents: &[BehaviorPolicy],
    state: StateId,
    action: usize,
    weight: f64,
    acc: &mut FoldAcc,
) -> Result<()> {
    let StateKind::Decision(d) = game.kind(state) else {
        unreachable!("expand is only called on decision states of the player");
    };
    let own_slot = d
        .actors
        .iter()
        .position(|(p, _)| *p == player)
        .expect("player acts here");
    let rows: Vec<Option<&[f64]>> = d
        .actors
        .iter()
        .enumerate()
        .map(|(slot, &(p, info))| {
            if slot == own_slot {
                Ok(None)
            } else {
                opponents[p]
                    .row(info)
                    .map(Some)
                    .ok_or_else(|| Error::MissingInfostate {
                        player: p,
                        key: game.infostates(p).key(info).to_string(),
                    })
            }
        })
        .collect::<Result<_>>()?;
    for (joint, &next) in d.next.iter().enumerate() {
        let digits = game.split_joint(d, joint as u32);
        if digits[own_slot] != action {
            continue;
        }
        let mut p = 1.0;
        for (slot, row) in rows.iter().enumerate() {
            if let Some(row) = row {
                p *= row[digits[slot]];
            }
        }
        let m = weight * p;
        if m > 0.0 {
            acc.reward += m * d.rewards[joint][player];
            fold(game, player, opponents, next, m, acc)?;
        }
    }
    Ok(())
}

impl InducedMdp {
    /// Expected optimal value from the initial distribution given per-state
    /// optimal values.
    pub fn initial_value(&self, state_values: &[f64]) -> f64 {
        self.entry_reward
            + self
                .initial
                .iter()
                .map(|&(s, p)| p * state_values[s])
                .sum::<f64>()
    }
}
