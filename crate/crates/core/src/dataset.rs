//! Joint-experience datasets and the models estimated from them.
//!
//! [`collect`] samples episodes under a (possibly perturbed) behavior profile
//! and records every transition together with per-player visit counts at the
//! players' decision points. [`estimate_model`] turns the shared dataset into
//! one player's decision-point model: maximum-likelihood transition counts
//! between the player's information states and empirical means of the reward
//! accumulated between consecutive decisions, directly comparable to
//! [`crate::induced::induce`].

mod io;

use std::collections::BTreeMap;

use crate::game::{EpisodeTrace, GameId, MarkovGame, PlayerId, StateKind, StepAction};
use crate::policy::BehaviorPolicy;
use crate::rng::{self, tags};
use crate::{Error, Result};

pub use io::read_binary;

/// How data collection perturbs the base profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ExplorationKind {
    None,
    Random,
    Targeted,
}

/// A per-state mixture `(1 - delta) * sigma + delta * nu` applied during data
/// collection. `Random` mixes toward the uniform distribution over legal
/// actions; `Targeted` mixes toward the supplied per-player policies.
#[derive(Debug, Clone)]
pub struct ExplorationSpec {
    pub delta: f64,
    pub kind: ExplorationKind,
    pub targeted_policies: Option<Vec<BehaviorPolicy>>,
}

impl ExplorationSpec {
    pub fn none() -> Self {
        ExplorationSpec { delta: 0.0, kind: ExplorationKind::None, targeted_policies: None }
    }

    pub fn random(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(ExplorationSpec { delta, kind: ExplorationKind::Random, targeted_policies: None })
    }

    pub fn targeted(delta: f64, policies: Vec<BehaviorPolicy>) -> Result<Self> {
        check_delta(delta)?;
        Ok(ExplorationSpec {
            delta,
            kind: ExplorationKind::Targeted,
            targeted_policies: Some(policies),
        })
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidConfig(format!("delta must lie in [0, 1], got {delta}")));
    }
    Ok(())
}

/// Upper bound on the per-state L1 distance between the perturbed and the
/// base profile: `2 * delta`.
pub fn l1_perturbation_bound(spec: &ExplorationSpec) -> f64 {
    2.0 * spec.delta
}

/// Applies the per-state exploration mixture to every player's policy.
pub fn perturb(
    profile: &[BehaviorPolicy],
    spec: &ExplorationSpec,
    game: &MarkovGame,
) -> Result<Vec<BehaviorPolicy>> {
    match spec.kind {
        ExplorationKind::None => Ok(profile.to_vec()),
        ExplorationKind::Random => Ok(profile
            .iter()
            .map(|policy| {
                let player = policy.player();
                let infos = game.infostates(player);
                let mut out = policy.clone();
                for id in 0..infos.len() as u32 {
                    if let Some(row) = policy.row(id) {
                        let n = row.len();
                        let mixed = row
                            .iter()
                            .map(|p| (1.0 - spec.delta) * p + spec.delta / n as f64)
                            .collect();
                        out.set_row(id, mixed);
                    }
                }
                out
            })
            .collect()),
        ExplorationKind::Targeted => {
            let targets = spec.targeted_policies.as_ref().ok_or_else(|| {
                Error::InvalidConfig("targeted exploration requires target policies".into())
            })?;
            if targets.len() != profile.len() {
                return Err(Error::InvalidConfig(
                    "one target policy per player is required".into(),
                ));
            }
            profile
                .iter()
                .map(|policy| {
                    let player = policy.player();
                    let infos = game.infostates(player);
                    let target = &targets[player];
                    let mut out = policy.clone();
                    for id in 0..infos.len() as u32 {
                        if let Some(row) = policy.row(id) {
                            let tgt = target.row(id).ok_or_else(|| Error::MissingInfostate {
                                player,
                                key: infos.key(id).to_string(),
                            })?;
                            let mixed = row
                                .iter()
                                .zip(tgt)
                                .map(|(p, q)| (1.0 - spec.delta) * p + spec.delta * q)
                                .collect();
                            out.set_row(id, mixed);
                        }
                    }
                    Ok(out)
                })
                .collect()
        }
    }
}

/// Describes the profile a dataset was collected under.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CollectionDescriptor {
    pub game: GameId,
    pub profile_hash: u64,
    pub delta: f64,
    pub kind: ExplorationKind,
}

/// Trajectories of joint transitions plus per-player visit counts
/// `N_D(s, a_i)` at the players' decision points.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDataset {
    pub descriptor: CollectionDescriptor,
    pub episodes: Vec<EpisodeTrace>,
    counts: Vec<Vec<Vec<u32>>>,
}

impl JointDataset {
    /// A dataset with no episodes (vacuous support).
    pub fn empty(game: &MarkovGame, profile: &[BehaviorPolicy]) -> Self {
        JointDataset {
            descriptor: CollectionDescriptor {
                game: game.id(),
                profile_hash: profile_hash(profile),
                delta: 0.0,
                kind: ExplorationKind::None,
            },
            episodes: Vec::new(),
            counts: empty_counts(game),
        }
    }

    pub fn num_episodes(&self) -> usize {
        self.episodes.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.episodes.iter().map(|e| e.steps.len()).sum()
    }

    /// Visit count of `(infostate, action)` for a player.
    pub fn count(&self, player: PlayerId, infostate: u32, action: usize) -> u32 {
        self.counts[player][infostate as usize][action]
    }

    pub fn counts(&self, player: PlayerId) -> &[Vec<u32>] {
        &self.counts[player]
    }

    /// Recomputes all counts from the stored transitions.
    pub fn recompute_counts(&self, game: &MarkovGame) -> Vec<Vec<Vec<u32>>> {
        let mut counts = empty_counts(game);
        for episode in &self.episodes {
            tally_episode(game, episode, &mut counts);
        }
        counts
    }

    /// Concatenates collection phases into one dataset under the given
    /// descriptor. Episode order follows the phase order; counts are summed.
    pub fn merge(game: &MarkovGame, descriptor: CollectionDescriptor, parts: Vec<JointDataset>) -> Self {
        let mut episodes = Vec::new();
        let mut counts = empty_counts(game);
        for part in parts {
            for (total, partial) in counts.iter_mut().zip(&part.counts) {
                for (row, prow) in total.iter_mut().zip(partial) {
                    for (c, p) in row.iter_mut().zip(prow) {
                        *c += p;
                    }
                }
            }
            episodes.extend(part.episodes);
        }
        JointDataset { descriptor, episodes, counts }
    }
}

fn empty_counts(game: &MarkovGame) -> Vec<Vec<Vec<u32>>> {
    (0..game.num_players())
        .map(|p| {
            let infos = game.infostates(p);
            (0..infos.len() as u32)
                .map(|id| vec![0u32; infos.num_actions(id)])
                .collect()
        })
        .collect()
}

fn tally_episode(game: &MarkovGame, episode: &EpisodeTrace, counts: &mut [Vec<Vec<u32>>]) {
    for step in &episode.steps {
        if let (StateKind::Decision(d), StepAction::Decision { joint }) =
            (game.kind(step.state), step.action)
        {
            let digits = game.split_joint(d, joint);
            for (slot, &(player, info)) in d.actors.iter().enumerate() {
                counts[player][info as usize][digits[slot]] += 1;
            }
        }
    }
}

fn profile_hash(profile: &[BehaviorPolicy]) -> u64 {
    let mut acc = 0xcbf2_9ce4_8422_2325u64;
    for policy in profile {
        policy.fingerprint(&mut acc);
    }
    acc
}

/// Samples `episodes` trajectories under the profile. Each episode draws from
/// its own derived stream, so the result is independent of sharding and fully
/// determined by the seed.
pub fn collect(
    game: &MarkovGame,
    profile: &[BehaviorPolicy],
    episodes: usize,
    seed: u64,
) -> Result<JointDataset> {
    collect_described(game, profile, episodes, seed, 0.0, ExplorationKind::None)
}

/// As [`collect`], recording how the profile was perturbed.
pub fn collect_described(
    game: &MarkovGame,
    profile: &[BehaviorPolicy],
    episodes: usize,
    seed: u64,
    delta: f64,
    kind: ExplorationKind,
) -> Result<JointDataset> {
    if episodes == 0 {
        return Err(Error::InvalidConfig("episode budget must be at least 1".into()));
    }
    let mut counts = empty_counts(game);
    let mut traces = Vec::with_capacity(episodes);
    for e in 0..episodes {
        let mut rng = rng::stream(seed, tags::episode(e as u64));
        let trace = crate::game::play_episode_with(game, profile, &mut rng)?;
        tally_episode(game, &trace, &mut counts);
        traces.push(trace);
    }
    Ok(JointDataset {
        descriptor: CollectionDescriptor {
            game: game.id(),
            profile_hash: profile_hash(profile),
            delta,
            kind,
        },
        episodes: traces,
        counts,
    })
}

/// Successor of an estimated decision-point transition: another acting
/// infostate of the same player, or episode termination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ModelNext {
    State(u32),
    Terminal,
}

/// Count-based estimate of one player's decision-point model. Tables are
/// dense over the player's acting infostates; pairs with zero counts are
/// unsupported and never silently zero-filled.
#[derive(Debug, Clone)]
pub struct EstimatedModel {
    pub player: PlayerId,
    counts: Vec<Vec<u32>>,
    reward_sum: Vec<Vec<f64>>,
    next: Vec<Vec<BTreeMap<ModelNext, u32>>>,
    entry: BTreeMap<ModelNext, u32>,
    entry_reward_sum: f64,
    episodes: u32,
}

impl EstimatedModel {
    pub fn num_infostates(&self) -> usize {
        self.counts.len()
    }

    pub fn num_actions(&self, infostate: u32) -> usize {
        self.counts[infostate as usize].len()
    }

    pub fn count(&self, infostate: u32, action: usize) -> u32 {
        self.counts[infostate as usize][action]
    }

    pub fn supported(&self, infostate: u32, action: usize) -> bool {
        self.count(infostate, action) > 0
    }

    /// Empirical mean reward to the next decision point, if observed.
    pub fn reward_mean(&self, infostate: u32, action: usize) -> Option<f64> {
        let c = self.count(infostate, action);
        (c > 0).then(|| self.reward_sum[infostate as usize][action] / f64::from(c))
    }

    /// Normalized successor counts, if observed.
    pub fn transition_probs(&self, infostate: u32, action: usize) -> Option<Vec<(ModelNext, f64)>> {
        let c = self.count(infostate, action);
        (c > 0).then(|| {
            self.next[infostate as usize][action]
                .iter()
                .map(|(&n, &k)| (n, f64::from(k) / f64::from(c)))
                .collect()
        })
    }

    /// Frequency distribution over the player's first decision points
    /// (includes a `Terminal` share for episodes where the player never
    /// acted). Empty for an empty dataset.
    pub fn entry_distribution(&self) -> Vec<(ModelNext, f64)> {
        if self.episodes == 0 {
            return Vec::new();
        }
        self.entry
            .iter()
            .map(|(&n, &k)| (n, f64::from(k) / f64::from(self.episodes)))
            .collect()
    }

    /// Mean reward collected before the player's first decision.
    pub fn entry_reward_mean(&self) -> f64 {
        if self.episodes == 0 {
            0.0
        } else {
            self.entry_reward_sum / f64::from(self.episodes)
        }
    }

    pub fn episodes(&self) -> u32 {
        self.episodes
    }
}

/// Maximum-likelihood estimate of `player`'s decision-point model from the
/// shared dataset. An empty dataset yields an all-unsupported model.
pub fn estimate_model(data: &JointDataset, game: &MarkovGame, player: PlayerId) -> EstimatedModel {
    let infos = game.infostates(player);
    let n = infos.len();
    let mut model = EstimatedModel {
        player,
        counts: (0..n as u32).map(|id| vec![0; infos.num_actions(id)]).collect(),
        reward_sum: (0..n as u32).map(|id| vec![0.0; infos.num_actions(id)]).collect(),
        next: (0..n as u32)
            .map(|id| vec![BTreeMap::new(); infos.num_actions(id)])
            .collect(),
        entry: BTreeMap::new(),
        entry_reward_sum: 0.0,
        episodes: data.episodes.len() as u32,
    };
    for episode in &data.episodes {
        let mut pending: Option<(u32, usize, f64)> = None;
        for step in &episode.steps {
            if let (StateKind::Decision(d), StepAction::Decision { joint }) =
                (game.kind(step.state), step.action)
            {
                if let Some(slot) = d.actors.iter().position(|(p, _)| *p == player) {
                    let info = d.actors[slot].1;
                    let action = game.split_joint(d, joint)[slot];
                    match pending.take() {
                        Some((from, a, acc)) => {
                            record(&mut model, from, a, ModelNext::State(info), acc);
                        }
                        None => *model.entry.entry(ModelNext::State(info)).or_insert(0) += 1,
                    }
                    pending = Some((info, action, 0.0));
                }
            }
            match &mut pending {
                Some((_, _, acc)) => *acc += step.rewards[player],
                None => model.entry_reward_sum += step.rewards[player],
            }
        }
        match pending {
            Some((from, a, acc)) => record(&mut model, from, a, ModelNext::Terminal, acc),
            None => *model.entry.entry(ModelNext::Terminal).or_insert(0) += 1,
        }
    }
    model
}

fn record(model: &mut EstimatedModel, from: u32, action: usize, next: ModelNext, reward: f64) {
    model.counts[from as usize][action] += 1;
    model.reward_sum[from as usize][action] += reward;
    *model.next[from as usize][action].entry(next).or_insert(0) += 1;
}
