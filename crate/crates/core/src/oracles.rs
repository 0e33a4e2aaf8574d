//! Response oracles.
//!
//! Four routes to a best response, in decreasing order of privilege:
//!
//! - [`exact_best_response`]: backward induction over the reach-weighted
//!   infostate tree, exact and free of sampling (charged zero episodes).
//! - [`value_iteration`] on the exact induced MDP: an independent route to
//!   the same value, used to cross-check the tree search.
//! - [`independent_br`]: the budgeted sample-based oracle of standard PSRO.
//!   The player explores uniformly against fixed opponents, estimates its
//!   decision-point model from that private dataset and solves it.
//! - [`naive_jbr`] / [`spi_jbr`]: offline oracles over a shared dataset that
//!   consume no additional episodes. The SPI variant pins the policy to the
//!   baseline wherever the dataset is too thin.

use crate::dataset::{collect, estimate_model, EstimatedModel, JointDataset, ModelNext};
use crate::game::{MarkovGame, PlayerId, StateId, StateKind};
use crate::induced::{induce, InducedMdp, MdpNext};
use crate::policy::BehaviorPolicy;
use crate::{Error, Result};

/// Action values over the states of an induced MDP.
#[derive(Debug, Clone)]
pub struct QTable {
    pub player: PlayerId,
    /// Aligned with the MDP: `infostates[s]` is the game's acting-infostate
    /// id of MDP state `s`.
    pub infostates: Vec<u32>,
    pub q: Vec<Vec<f64>>,
}

impl QTable {
    /// Optimal state values `V(s) = max_a Q(s, a)`.
    pub fn state_values(&self) -> Vec<f64> {
        self.q
            .iter()
            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }

    /// Greedy behavior policy, lowest action index on ties; infostates not
    /// covered by the MDP get the uniform distribution (they are unreachable
    /// under the opponents the MDP was induced against).
    pub fn greedy_policy(&self, game: &MarkovGame) -> BehaviorPolicy {
        let infos = game.infostates(self.player);
        let mut policy = BehaviorPolicy::uniform(game, self.player);
        for (s, &info) in self.infostates.iter().enumerate() {
            let mut row = vec![0.0; infos.num_actions(info)];
            row[argmax(&self.q[s])] = 1.0;
            policy.set_row(info, row);
        }
        policy
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Output of a response oracle.
#[derive(Debug, Clone)]
pub struct BrResult {
    pub policy: BehaviorPolicy,
    /// Value of the policy against the target profile, as computed by the
    /// oracle (exact for the tree search, model-estimated for the sampled
    /// and offline oracles).
    pub value: f64,
    pub episodes_consumed: u64,
    pub kind: OracleKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    ExactTree,
    IndependentBr,
    NaiveJbr,
    SpiJbr,
}

/// Configuration of the SPI-constrained offline oracle.
#[derive(Debug, Clone)]
pub struct SpiConfig {
    /// Count threshold: pairs with `N_D(s, a) < n_wedge` are uncertain and
    /// keep the baseline's probability mass.
    pub n_wedge: u32,
    pub baseline: BehaviorPolicy,
}

/// Q-iteration on an induced MDP until the sup-norm Bellman residual drops
/// below `tol`. With `discount == 1` this is exact after one sweep per level
/// of the (acyclic) decision DAG; a cyclic undiscounted MDP fails with
/// [`Error::NoConvergence`].
pub fn value_iteration(mdp: &InducedMdp, tol: f64, max_sweeps: usize) -> Result<QTable> {
    if tol <= 0.0 {
        return Err(Error::InvalidConfig("tolerance must be positive".into()));
    }
    let n = mdp.infostates.len();
    let mut q: Vec<Vec<f64>> = mdp.num_actions.iter().map(|&a| vec![0.0; a]).collect();
    let mut values = vec![0.0f64; n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_sweeps {
        residual = 0.0;
        for s in 0..n {
            for a in 0..mdp.num_actions[s] {
                let mut next_value = 0.0;
                for &(succ, p) in &mdp.transitions[s][a] {
                    if let MdpNext::State(s2) = succ {
                        next_value += p * values[s2];
                    }
                }
                let updated = mdp.rewards[s][a] + mdp.discount * next_value;
                residual = residual.max((updated - q[s][a]).abs());
                q[s][a] = updated;
            }
        }
        for (s, row) in q.iter().enumerate() {
            values[s] = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
        if residual <= tol {
            return Ok(QTable { player: mdp.player, infostates: mdp.infostates.clone(), q });
        }
    }
    Err(Error::NoConvergence { sweeps: max_sweeps, residual })
}

/// Exact best response by backward induction on the opponent-reach-weighted
/// infostate tree. Returns a deterministic policy achieving
/// `max_pi u_i(pi, sigma_-i)` exactly; consumes no episodes.
/// `opponents[player]` is ignored.
pub fn exact_best_response(
    game: &MarkovGame,
    player: PlayerId,
    opponents: &[BehaviorPolicy],
) -> Result<BrResult> {
    let infos = game.infostates(player);
    let mut search = BrSearch {
        game,
        player,
        opponents,
        members: vec![Vec::new(); infos.len()],
        value_memo: vec![f64::NAN; game.num_states()],
        action_memo: vec![usize::MAX; infos.len()],
        visited: 0,
    };
    for &(root, _) in game.initial_states() {
        search.reach_walk(root, 1.0)?;
    }
    let mut value = 0.0;
    for &(root, p) in game.initial_states() {
        value += p * search.value(root)?;
    }
    let mut policy = BehaviorPolicy::empty(game, player);
    for info in 0..infos.len() as u32 {
        let best = search.action(info)?;
        let mut row = vec![0.0; infos.num_actions(info)];
        row[best] = 1.0;
        policy.set_row(info, row);
    }
    Ok(BrResult { policy, value, episodes_consumed: 0, kind: OracleKind::ExactTree })
}

struct BrSearch<'a> {
    game: &'a MarkovGame,
    player: PlayerId,
    opponents: &'a [BehaviorPolicy],
    /// Histories per acting infostate with their chance-opponent reach.
    members: Vec<Vec<(StateId, f64)>>,
    value_memo: Vec<f64>,
    action_memo: Vec<usize>,
    visited: usize,
}

impl BrSearch<'_> {
    fn budget(&mut self) -> Result<()> {
        self.visited += 1;
        if self.visited > self.game.node_budget() {
            return Err(Error::TreeBudgetExceeded { budget: self.game.node_budget() });
        }
        Ok(())
    }

    /// Forward pass: visits every state, recording counterfactual reach
    /// (chance and opponent probabilities only) at the player's decision
    /// points.
    fn reach_walk(&mut self, state: StateId, reach: f64) -> Result<()> {
        self.budget()?;
        let game = self.game;
        match game.kind(state) {
            StateKind::Terminal => Ok(()),
            StateKind::Chance(outcomes) => {
                for o in outcomes {
                    self.reach_walk(o.next, reach * o.prob)?;
                }
                Ok(())
            }
            StateKind::Decision(d) => {
                let own = d.actors.iter().position(|(p, _)| *p == self.player);
                if let Some(slot) = own {
                    self.members[d.actors[slot].1 as usize].push((state, reach));
                }
                for (joint, &next) in d.next.iter().enumerate() {
                    let digits = game.split_joint(d, joint as u32);
                    let mut p = 1.0;
                    for (slot, &(actor, info)) in d.actors.iter().enumerate() {
                        if Some(slot) == own {
                            continue;
                        }
                        let row = self.opponents[actor].row(info).ok_or_else(|| {
                            Error::MissingInfostate {
                                player: actor,
                                key: game.infostates(actor).key(info).to_string(),
                            }
                        })?;
                        p *= row[digits[slot]];
                    }
                    self.reach_walk(next, reach * p)?;
                }
                Ok(())
            }
        }
    }

    /// Expected future reward of `state` when the player follows the best
    /// response and the opponents their fixed behavior.
    fn value(&mut self, state: StateId) -> Result<f64> {
        if !self.value_memo[state as usize].is_nan() {
            return Ok(self.value_memo[state as usize]);
        }
        let game = self.game;
        let v = match game.kind(state) {
            StateKind::Terminal => 0.0,
            StateKind::Chance(outcomes) => {
                let mut v = 0.0;
                for o in outcomes {
                    v += o.prob * (o.rewards[self.player] + self.value(o.next)?);
                }
                v
            }
            StateKind::Decision(d) => {
                let own = d.actors.iter().position(|(p, _)| *p == self.player);
                match own {
                    Some(slot) => {
                        let best = self.action(d.actors[slot].1)?;
                        self.q_value(state, slot, best)?
                    }
                    None => {
                        let mut v = 0.0;
                        for (joint, &next) in d.next.iter().enumerate() {
                            let p = self.joint_prob(d, joint, None)?;
                            if p > 0.0 {
                                v += p * (d.rewards[joint][self.player] + self.value(next)?);
                            }
                        }
                        v
                    }
                }
            }
        };
        self.value_memo[state as usize] = v;
        Ok(v)
    }

    /// Best-response action at an infostate: maximizes the reach-weighted sum
    /// of action values over the infostate's histories, ties to the lowest
    /// action index.
    fn action(&mut self, info: u32) -> Result<usize> {
        if self.action_memo[info as usize] != usize::MAX {
            return Ok(self.action_memo[info as usize]);
        }
        let game = self.game;
        let members = self.members[info as usize].clone();
        let num_actions = game.infostates(self.player).num_actions(info);
        let mut best = (0, f64::NEG_INFINITY);
        for a in 0..num_actions {
            let mut total = 0.0;
            for &(state, reach) in &members {
                let StateKind::Decision(d) = game.kind(state) else { unreachable!() };
                let slot = d
                    .actors
                    .iter()
                    .position(|(p, _)| *p == self.player)
                    .expect("member states are decision points of the player");
                total += reach * self.q_value(state, slot, a)?;
            }
            if total > best.1 {
                best = (a, total);
            }
        }
        self.action_memo[info as usize] = best.0;
        Ok(best.0)
    }

    /// Value of playing `action` at `state`, marginalizing co-actors.
    fn q_value(&mut self, state: StateId, own_slot: usize, action: usize) -> Result<f64> {
        let game = self.game;
        let StateKind::Decision(d) = game.kind(state) else { unreachable!() };
        let mut v = 0.0;
        for (joint, &next) in d.next.iter().enumerate() {
            let digits = game.split_joint(d, joint as u32);
            if digits[own_slot] != action {
                continue;
            }
            let p = self.joint_prob(d, joint, Some(own_slot))?;
            if p > 0.0 {
                v += p * (d.rewards[joint][self.player] + self.value(next)?);
            }
        }
        Ok(v)
    }

    fn joint_prob(
        &self,
        d: &crate::game::DecisionState,
        joint: usize,
        skip_slot: Option<usize>,
    ) -> Result<f64> {
        let digits = self.game.split_joint(d, joint as u32);
        let mut p = 1.0;
        for (slot, &(actor, info)) in d.actors.iter().enumerate() {
            if Some(slot) == skip_slot {
                continue;
            }
            let row = self.opponents[actor].row(info).ok_or_else(|| Error::MissingInfostate {
                player: actor,
                key: self.game.infostates(actor).key(info).to_string(),
            })?;
            p *= row[digits[slot]];
        }
        Ok(p)
    }
}

/// The sample-based response oracle of standard PSRO: the player collects a
/// private dataset of `budget` episodes exploring uniformly against the fixed
/// opponents, estimates its decision-point model from it, and solves the
/// model. The full budget is charged to this player.
pub fn independent_br(
    game: &MarkovGame,
    player: PlayerId,
    opponents: &[BehaviorPolicy],
    budget: usize,
    seed: u64,
) -> Result<BrResult> {
    let mut profile = opponents.to_vec();
    profile[player] = BehaviorPolicy::uniform(game, player);
    let data = collect(game, &profile, budget, seed)?;
    let model = estimate_model(&data, game, player);
    let uniform = BehaviorPolicy::uniform(game, player);
    let solved = solve_offline(&model, game, player, &uniform, 0)?;
    Ok(BrResult {
        policy: solved.policy,
        value: solved.value,
        episodes_consumed: budget as u64,
        kind: OracleKind::IndependentBr,
    })
}

/// Offline Q-iteration over the model estimated from the shared dataset.
/// Greedy at supported pairs; at infostates with no supported action the
/// policy falls back to the baseline. Charges zero episodes.
pub fn naive_jbr(
    data: &JointDataset,
    game: &MarkovGame,
    player: PlayerId,
    baseline: &BehaviorPolicy,
) -> Result<BrResult> {
    let model = estimate_model(data, game, player);
    let solved = solve_offline(&model, game, player, baseline, 0)?;
    Ok(BrResult {
        policy: solved.policy,
        value: solved.value,
        episodes_consumed: 0,
        kind: OracleKind::NaiveJbr,
    })
}

/// SPI-constrained offline oracle: at every infostate the probability mass of
/// uncertain actions (count below `n_wedge`) is pinned to the baseline and the
/// remaining mass goes to the best sufficiently-sampled action. With
/// `n_wedge == 0` this is exactly [`naive_jbr`]; with `n_wedge` above every
/// count the baseline is returned unchanged.
pub fn spi_jbr(
    data: &JointDataset,
    game: &MarkovGame,
    player: PlayerId,
    cfg: &SpiConfig,
) -> Result<BrResult> {
    let model = estimate_model(data, game, player);
    let solved = solve_offline(&model, game, player, &cfg.baseline, cfg.n_wedge)?;
    Ok(BrResult {
        policy: solved.policy,
        value: solved.value,
        episodes_consumed: 0,
        kind: OracleKind::SpiJbr,
    })
}

struct OfflineSolution {
    policy: BehaviorPolicy,
    value: f64,
}

/// Shared machinery of the offline oracles: SPIBB-style Q-iteration where the
/// value backup follows the constrained policy induced by the current Q.
/// Unsupported pairs contribute value 0 to backups.
fn solve_offline(
    model: &EstimatedModel,
    game: &MarkovGame,
    player: PlayerId,
    baseline: &BehaviorPolicy,
    n_wedge: u32,
) -> Result<OfflineSolution> {
    let infos = game.infostates(player);
    let n = infos.len();
    let mut q: Vec<Vec<f64>> = (0..n as u32)
        .map(|id| vec![0.0; infos.num_actions(id)])
        .collect();
    let mut values = vec![0.0f64; n];
    let tol = 1e-9;
    let max_sweeps = 10_000;
    let mut converged = false;
    let mut residual = f64::INFINITY;
    for _ in 0..max_sweeps {
        residual = 0.0;
        for info in 0..n as u32 {
            let s = info as usize;
            for a in 0..infos.num_actions(info) {
                if !model.supported(info, a) {
                    continue;
                }
                let mut next_value = 0.0;
                for (succ, p) in model.transition_probs(info, a).expect("supported") {
                    if let ModelNext::State(s2) = succ {
                        next_value += p * values[s2 as usize];
                    }
                }
                let updated = model.reward_mean(info, a).expect("supported")
                    + game.discount() * next_value;
                residual = residual.max((updated - q[s][a]).abs());
                q[s][a] = updated;
            }
        }
        for info in 0..n as u32 {
            let row = constrained_row(model, game, player, baseline, n_wedge, info, &q)?;
            let s = info as usize;
            values[s] = row
                .iter()
                .enumerate()
                .map(|(a, p)| if model.supported(info, a) { p * q[s][a] } else { 0.0 })
                .sum();
        }
        if residual <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { sweeps: max_sweeps, residual });
    }
    let mut policy = BehaviorPolicy::empty(game, player);
    for info in 0..n as u32 {
        policy.set_row(info, constrained_row(model, game, player, baseline, n_wedge, info, &q)?);
    }
    // Model-estimated value of the solved policy: expected value over the
    // observed first-decision distribution plus pre-decision rewards.
    let value = model.entry_reward_mean()
        + model
            .entry_distribution()
            .iter()
            .map(|&(succ, p)| match succ {
                ModelNext::State(s) => p * values[s as usize],
                ModelNext::Terminal => 0.0,
            })
            .sum::<f64>();
    Ok(OfflineSolution { policy, value })
}

/// The constrained action distribution at one infostate given current action
/// values: baseline mass on uncertain actions, the rest on the best
/// well-sampled action.
fn constrained_row(
    model: &EstimatedModel,
    game: &MarkovGame,
    player: PlayerId,
    baseline: &BehaviorPolicy,
    n_wedge: u32,
    info: u32,
    q: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let num_actions = game.infostates(player).num_actions(info);
    let baseline_row = || -> Result<Vec<f64>> {
        baseline
            .row(info)
            .map(<[f64]>::to_vec)
            .ok_or_else(|| Error::MissingInfostate {
                player,
                key: game.infostates(player).key(info).to_string(),
            })
    };
    let required = n_wedge.max(1);
    let candidates: Vec<usize> =
        (0..num_actions).filter(|&a| model.count(info, a) >= required).collect();
    if candidates.is_empty() {
        return baseline_row();
    }
    let mut row = vec![0.0; num_actions];
    let mut pinned = 0.0;
    if n_wedge > 0 {
        let base = baseline_row()?;
        for a in 0..num_actions {
            if model.count(info, a) < n_wedge {
                row[a] = base[a];
                pinned += base[a];
            }
        }
    }
    let best = candidates
        .iter()
        .copied()
        .fold(None, |best: Option<usize>, a| match best {
            Some(b) if q[info as usize][b] >= q[info as usize][a] => Some(b),
            _ => Some(a),
        })
        .expect("candidates nonempty");
    row[best] += 1.0 - pinned;
    Ok(row)
}

/// Optimal value of an induced MDP solved by value iteration: entry reward
/// plus the initial-distribution-weighted optimal state values.
pub fn optimal_value(mdp: &InducedMdp, q: &QTable) -> f64 {
    mdp.initial_value(&q.state_values())
}

/// Convenience route used in cross-checks: induce the MDP and solve it.
pub fn best_response_via_vi(
    game: &MarkovGame,
    player: PlayerId,
    opponents: &[BehaviorPolicy],
) -> Result<(InducedMdp, QTable)> {
    let mdp = induce(game, player, opponents)?;
    let q = value_iteration(&mdp, 1e-12, 10_000)?;
    Ok((mdp, q))
}
