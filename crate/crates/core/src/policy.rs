//! Behavior policies: per-infostate action distributions.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::game::{MarkovGame, PlayerId};
use crate::{Error, Result};

/// A behavior strategy for one player: a distribution over legal actions at
/// each of the player's acting infostates. Rows are indexed by the game's
/// acting-infostate ids; a row may be absent, in which case sampling through
/// that infostate fails with [`Error::MissingInfostate`].
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorPolicy {
    player: PlayerId,
    rows: Vec<Option<Vec<f64>>>,
}

impl BehaviorPolicy {
    /// Uniform-random play at every infostate of the player.
    pub fn uniform(game: &MarkovGame, player: PlayerId) -> Self {
        let infos = game.infostates(player);
        let rows = (0..infos.len() as u32)
            .map(|id| {
                let n = infos.num_actions(id);
                Some(vec![1.0 / n as f64; n])
            })
            .collect();
        BehaviorPolicy { player, rows }
    }

    /// A random full-support policy: each row is drawn uniformly from the
    /// simplex via normalized exponential draws.
    pub fn random(game: &MarkovGame, player: PlayerId, rng: &mut ChaCha8Rng) -> Self {
        let infos = game.infostates(player);
        let rows = (0..infos.len() as u32)
            .map(|id| {
                let n = infos.num_actions(id);
                let mut row: Vec<f64> =
                    (0..n).map(|_| -f64::ln(1.0 - rng.random::<f64>())).collect();
                let sum: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= sum);
                Some(row)
            })
            .collect();
        BehaviorPolicy { player, rows }
    }

    /// Builds a policy from a key-indexed table. Missing keys leave the row
    /// undefined; unknown keys and invalid distributions are rejected.
    pub fn from_table(
        game: &MarkovGame,
        player: PlayerId,
        table: &BTreeMap<String, Vec<f64>>,
    ) -> Result<Self> {
        let infos = game.infostates(player);
        let mut rows = vec![None; infos.len()];
        for (key, probs) in table {
            let id = infos.id_of(key).ok_or_else(|| {
                Error::InvalidConfig(format!("player {player} has no infostate `{key}`"))
            })?;
            validate_row(probs, infos.num_actions(id), key)?;
            rows[id as usize] = Some(probs.clone());
        }
        Ok(BehaviorPolicy { player, rows })
    }

    /// An empty policy (no rows defined). Useful for players that never act.
    pub fn empty(game: &MarkovGame, player: PlayerId) -> Self {
        BehaviorPolicy { player, rows: vec![None; game.infostates(player).len()] }
    }

    pub fn player(&self) -> PlayerId {
        self.player
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// The action distribution at an acting infostate, if defined.
    pub fn row(&self, infostate: u32) -> Option<&[f64]> {
        self.rows
            .get(infostate as usize)
            .and_then(|r| r.as_deref())
    }

    pub fn set_row(&mut self, infostate: u32, probs: Vec<f64>) {
        self.rows[infostate as usize] = Some(probs);
    }

    /// Whether every infostate has a defined distribution.
    pub fn is_complete(&self) -> bool {
        self.rows.iter().all(|r| r.is_some())
    }

    /// Key-indexed view of the defined rows.
    pub fn to_table(&self, game: &MarkovGame) -> BTreeMap<String, Vec<f64>> {
        let infos = game.infostates(self.player);
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(id, row)| {
                row.as_ref().map(|r| (infos.key(id as u32).to_string(), r.clone()))
            })
            .collect()
    }

    /// Checks that every defined row is a distribution over its action set.
    pub fn validate(&self, game: &MarkovGame) -> Result<()> {
        let infos = game.infostates(self.player);
        for (id, row) in self.rows.iter().enumerate() {
            if let Some(probs) = row {
                validate_row(probs, infos.num_actions(id as u32), infos.key(id as u32))?;
            }
        }
        Ok(())
    }

    /// A stable hash of the policy table, used to fingerprint datasets.
    pub fn fingerprint(&self, acc: &mut u64) {
        const PRIME: u64 = 0x100_0000_01b3;
        let mut mix = |v: u64| {
            *acc ^= v;
            *acc = acc.wrapping_mul(PRIME);
        };
        mix(self.player as u64);
        for row in &self.rows {
            match row {
                None => mix(0xdead),
                Some(probs) => {
                    for p in probs {
                        mix(p.to_bits());
                    }
                }
            }
        }
    }
}

fn validate_row(probs: &[f64], num_actions: usize, key: &str) -> Result<()> {
    if probs.len() != num_actions {
        return Err(Error::InvalidConfig(format!(
            "infostate `{key}` expects {num_actions} action probabilities, got {}",
            probs.len()
        )));
    }
    if probs.iter().any(|&p| !(0.0..=1.0 + 1e-9).contains(&p)) {
        return Err(Error::InvalidConfig(format!(
            "infostate `{key}` has probabilities outside [0, 1]"
        )));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "infostate `{key}` probabilities sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// One uniform policy per player.
pub fn uniform_profile(game: &MarkovGame) -> Vec<BehaviorPolicy> {
    (0..game.num_players())
        .map(|p| BehaviorPolicy::uniform(game, p))
        .collect()
}

/// One random full-support policy per player, drawn from `rng`.
pub fn random_profile(game: &MarkovGame, rng: &mut ChaCha8Rng) -> Vec<BehaviorPolicy> {
    (0..game.num_players())
        .map(|p| BehaviorPolicy::random(game, p, rng))
        .collect()
}
