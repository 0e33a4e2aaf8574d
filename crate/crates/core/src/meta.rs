//! The restricted empirical game and its meta-strategy solver.
//!
//! [`EmpiricalGame`] holds the per-player policy sets and the payoff tensor
//! over all pure profiles, filled either exactly (recursive expectation) or
//! by rollouts. [`projected_replicator_dynamics`] computes the meta-strategy:
//! Euler steps of the replicator flow, each followed by an exact Euclidean
//! projection onto the simplex with a per-coordinate floor, read out as the
//! average of the whole trajectory (the reference-implementation readout).
//! The averaged readout keeps some mass on the transient, which in turn keeps
//! the meta-strategy's behavior full-support enough for shared datasets to
//! cover the game.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rayon::prelude::*;

use crate::game::{expected_payoff, play_episode_with, GameId, MarkovGame};
use crate::policy::BehaviorPolicy;
use crate::rng::{self, tags};
use crate::{Error, Result};

/// How payoff-tensor entries are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum EvalMode {
    /// Exact recursive expectation over the game tree.
    Exact,
    /// Mean return over `episodes` sampled episodes per profile.
    Rollout { episodes: u32, seed: u64 },
}

/// Restricted empirical game over the policies discovered so far. Two-player
/// only, matching the in-scope games.
#[derive(Debug, Clone)]
pub struct EmpiricalGame {
    game_id: GameId,
    mode: EvalMode,
    rows: usize,
    cols: usize,
    policies: [Vec<BehaviorPolicy>; 2],
    /// Row-major `|X_0| x |X_1|` payoff matrices, one per player.
    u: [Vec<f64>; 2],
}

/// Per-player mixture over the empirical game's policy sets.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaProfile {
    pub weights: [Vec<f64>; 2],
}

impl EmpiricalGame {
    pub fn new(game: &MarkovGame, mode: EvalMode) -> Result<Self> {
        if game.num_players() != 2 {
            return Err(Error::InvalidConfig(
                "the empirical game supports exactly two players".into(),
            ));
        }
        Ok(EmpiricalGame {
            game_id: game.id(),
            mode,
            rows: 0,
            cols: 0,
            policies: [Vec::new(), Vec::new()],
            u: [Vec::new(), Vec::new()],
        })
    }

    pub fn mode(&self) -> EvalMode {
        self.mode
    }

    pub fn sizes(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn policies(&self, player: usize) -> &[BehaviorPolicy] {
        &self.policies[player]
    }

    /// Payoff of `player` when player 0 plays its `i`-th policy and player 1
    /// its `j`-th.
    pub fn payoff(&self, player: usize, i: usize, j: usize) -> f64 {
        let (_, cols) = self.sizes();
        self.u[player][i * cols + j]
    }

    /// Appends one new policy per player and fills exactly the new tensor
    /// entries; existing entries are carried over bit-for-bit.
    pub fn extend(&mut self, game: &MarkovGame, new_policies: Vec<BehaviorPolicy>) -> Result<()> {
        if new_policies.len() != 2 {
            return Err(Error::InvalidConfig("one new policy per player".into()));
        }
        let mut it = new_policies.into_iter();
        let p0 = it.next().unwrap();
        let p1 = it.next().unwrap();
        if p0.player() != 0 || p1.player() != 1 {
            return Err(Error::InvalidConfig("policies must be ordered by player".into()));
        }
        p0.validate(game)?;
        p1.validate(game)?;
        let (m, n) = self.sizes();
        if self.policies[0].len() != m || self.policies[1].len() != n {
            return Err(Error::InvalidConfig(
                "cannot extend an empirical game built from raw tensors".into(),
            ));
        }
        self.policies[0].push(p0);
        self.policies[1].push(p1);
        let missing: Vec<(usize, usize)> = (0..=m)
            .flat_map(|i| (0..=n).map(move |j| (i, j)))
            .filter(|&(i, j)| i == m || j == n)
            .collect();
        let mode = self.mode;
        let entries: Vec<((usize, usize), [f64; 2])> = missing
            .into_par_iter()
            .map(|(i, j)| {
                let profile = [self.policies[0][i].clone(), self.policies[1][j].clone()];
                let u = evaluate_profile(game, &profile, mode, i, j)?;
                Ok(((i, j), u))
            })
            .collect::<Result<_>>()?;
        let (rows, cols) = (m + 1, n + 1);
        for player in 0..2 {
            let mut grown = vec![0.0f64; rows * cols];
            for i in 0..m {
                grown[i * cols..i * cols + n].copy_from_slice(&self.u[player][i * n..(i + 1) * n]);
            }
            for &((i, j), u) in &entries {
                grown[i * cols + j] = u[player];
            }
            self.u[player] = grown;
        }
        self.rows = rows;
        self.cols = cols;
        Ok(())
    }

    /// Writes a self-describing JSON checkpoint: policy tables, tensors, and
    /// the evaluation mode.
    pub fn save(&self, game: &MarkovGame, path: &Path) -> Result<()> {
        if self.policies[0].len() != self.rows || self.policies[1].len() != self.cols {
            return Err(Error::InvalidConfig(
                "cannot checkpoint an empirical game built from raw tensors".into(),
            ));
        }
        let doc = Checkpoint {
            game: self.game_id,
            mode: self.mode,
            policies: [
                self.policies[0].iter().map(|p| p.to_table(game)).collect(),
                self.policies[1].iter().map(|p| p.to_table(game)).collect(),
            ],
            u: self.u.clone(),
        };
        let file = File::create(path)?;
        serde_json::to_writer_pretty(BufWriter::new(file), &doc)
            .map_err(|e| Error::MalformedData(format!("checkpoint write failed: {e}")))?;
        Ok(())
    }

    /// Reloads a checkpoint against the same game.
    pub fn load(game: &MarkovGame, path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        let doc: Checkpoint = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::MalformedData(format!("checkpoint read failed: {e}")))?;
        if doc.game != game.id() {
            return Err(Error::MalformedData(format!(
                "checkpoint belongs to `{}`, not `{}`",
                doc.game,
                game.id()
            )));
        }
        let mut policies: [Vec<BehaviorPolicy>; 2] = [Vec::new(), Vec::new()];
        for player in 0..2 {
            for table in &doc.policies[player] {
                policies[player].push(BehaviorPolicy::from_table(game, player, table)?);
            }
        }
        let (m, n) = (policies[0].len(), policies[1].len());
        if doc.u[0].len() != m * n || doc.u[1].len() != m * n {
            return Err(Error::MalformedData("checkpoint tensor shape mismatch".into()));
        }
        Ok(EmpiricalGame {
            game_id: doc.game,
            mode: doc.mode,
            rows: m,
            cols: n,
            policies,
            u: doc.u,
        })
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
struct Checkpoint {
    game: GameId,
    mode: EvalMode,
    policies: [Vec<std::collections::BTreeMap<String, Vec<f64>>>; 2],
    u: [Vec<f64>; 2],
}

fn evaluate_profile(
    game: &MarkovGame,
    profile: &[BehaviorPolicy; 2],
    mode: EvalMode,
    i: usize,
    j: usize,
) -> Result<[f64; 2]> {
    match mode {
        EvalMode::Exact => {
            let u = expected_payoff(game, profile)?;
            Ok([u[0], u[1]])
        }
        EvalMode::Rollout { episodes, seed } => {
            let mut total = [0.0f64; 2];
            for e in 0..episodes {
                let mut rng = rng::stream(seed, tags::rollout(i, j, u64::from(e)));
                let r = play_episode_with(game, profile, &mut rng)?.returns(2);
                total[0] += r[0];
                total[1] += r[1];
            }
            Ok([total[0] / f64::from(episodes), total[1] / f64::from(episodes)])
        }
    }
}

/// Runs projected replicator dynamics on the empirical game and returns the
/// trajectory average.
pub fn projected_replicator_dynamics(
    eg: &EmpiricalGame,
    steps: u64,
    dt: f64,
    gamma_floor: f64,
) -> Result<MetaProfile> {
    let (m, n) = eg.sizes();
    if m == 0 || n == 0 {
        return Err(Error::InvalidConfig("empty empirical game".into()));
    }
    if steps == 0 {
        return Err(Error::InvalidConfig("PRD needs at least one step".into()));
    }
    if dt <= 0.0 {
        return Err(Error::InvalidConfig("PRD step size must be positive".into()));
    }
    let max_dim = m.max(n) as f64;
    if !(0.0..1.0 / max_dim).contains(&gamma_floor) {
        return Err(Error::InvalidConfig(format!(
            "gamma_floor must lie in [0, 1/{}), got {gamma_floor}",
            m.max(n)
        )));
    }
    // Transposed copy of player 1's matrix so both matvecs walk rows.
    let u1 = &eg.u[0];
    let mut u2t = vec![0.0f64; m * n];
    for i in 0..m {
        for j in 0..n {
            u2t[j * m + i] = eg.u[1][i * n + j];
        }
    }
    let mut x = vec![1.0 / m as f64; m];
    let mut y = vec![1.0 / n as f64; n];
    let mut dx = vec![0.0f64; m];
    let mut dy = vec![0.0f64; n];
    let mut sum_x = vec![0.0f64; m];
    let mut sum_y = vec![0.0f64; n];
    let mut scratch = Vec::new();
    let mut kept = 0u64;
    for _step in 0..steps {
        for (k, d) in dx.iter_mut().enumerate() {
            *d = dot(&u1[k * n..(k + 1) * n], &y);
        }
        for (k, d) in dy.iter_mut().enumerate() {
            *d = dot(&u2t[k * m..(k + 1) * m], &x);
        }
        let mean_x = dot(&dx, &x);
        let mean_y = dot(&dy, &y);
        for k in 0..m {
            x[k] += dt * x[k] * (dx[k] - mean_x);
        }
        for k in 0..n {
            y[k] += dt * y[k] * (dy[k] - mean_y);
        }
        project_floored_simplex_with(&mut x, gamma_floor, &mut scratch);
        project_floored_simplex_with(&mut y, gamma_floor, &mut scratch);
        for (s, &v) in sum_x.iter_mut().zip(&x) {
            *s += v;
        }
        for (s, &v) in sum_y.iter_mut().zip(&y) {
            *s += v;
        }
        kept += 1;
    }
    let scale = 1.0 / kept as f64;
    sum_x.iter_mut().for_each(|v| *v *= scale);
    sum_y.iter_mut().for_each(|v| *v *= scale);
    // The average of feasible points is feasible; re-projecting only clears
    // accumulation dust so the readout satisfies the floor exactly.
    project_floored_simplex(&mut sum_x, gamma_floor);
    project_floored_simplex(&mut sum_y, gamma_floor);
    Ok(MetaProfile { weights: [sum_x, sum_y] })
}

/// Dot product with four fixed accumulator lanes. The association order is
/// deterministic; the lanes only break the serial dependency chain.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    for (ca, cb) in a.chunks_exact(4).zip(b.chunks_exact(4)) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
    }
    let mut tail = 0.0;
    let rem = a.len() / 4 * 4;
    for (x, y) in a[rem..].iter().zip(&b[rem..]) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Exact Euclidean projection onto `{ v : v_k >= floor, sum v = 1 }` via
/// active-set iteration. Skipped when the point is already feasible, which
/// the replicator step nearly always preserves.
fn project_floored_simplex(v: &mut [f64], floor: f64) {
    project_floored_simplex_with(v, floor, &mut Vec::new());
}

fn project_floored_simplex_with(v: &mut [f64], floor: f64, active: &mut Vec<bool>) {
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() <= 1e-12 && v.iter().all(|&p| p >= floor) {
        return;
    }
    let k = v.len();
    active.clear();
    active.resize(k, true);
    loop {
        let (count, total) = v
            .iter()
            .zip(active.iter())
            .filter(|(_, &a)| a)
            .fold((0usize, 0.0f64), |(c, t), (&p, _)| (c + 1, t + p));
        let budget = 1.0 - floor * (k - count) as f64;
        let tau = (total - budget) / count as f64;
        let mut changed = false;
        for (p, a) in v.iter_mut().zip(active.iter_mut()) {
            if *a && *p - tau < floor {
                *a = false;
                changed = true;
            }
        }
        if !changed {
            for (p, a) in v.iter_mut().zip(active.iter()) {
                *p = if *a { *p - tau } else { floor };
            }
            return;
        }
        if active.iter().all(|&a| !a) {
            // Everything clipped: the floored simplex is a single point only
            // when floor == 1/k; fall back to it.
            v.iter_mut().for_each(|p| *p = 1.0 / k as f64);
            return;
        }
    }
}

/// Sum over players of the best pure deviation payoff against the profile
/// minus the profile's payoff, evaluated on the empirical tensor.
pub fn restricted_regret(eg: &EmpiricalGame, profile: &MetaProfile) -> f64 {
    let (m, n) = eg.sizes();
    let x = &profile.weights[0];
    let y = &profile.weights[1];
    assert_eq!(x.len(), m, "profile shape");
    assert_eq!(y.len(), n, "profile shape");
    let mut best0 = f64::NEG_INFINITY;
    let mut current0 = 0.0;
    for i in 0..m {
        let row = dot(&eg.u[0][i * n..(i + 1) * n], y);
        best0 = best0.max(row);
        current0 += x[i] * row;
    }
    let mut best1 = f64::NEG_INFINITY;
    let mut current1 = 0.0;
    for j in 0..n {
        let mut col = 0.0;
        for i in 0..m {
            col += x[i] * eg.u[1][i * n + j];
        }
        best1 = best1.max(col);
        current1 += y[j] * col;
    }
    (best0 - current0) + (best1 - current1)
}

/// Builds an empirical game directly from payoff tensors, with no attached
/// policies; used for meta-solver sanity checks on synthetic games.
pub fn from_tensors(rows: usize, cols: usize, u0: Vec<f64>, u1: Vec<f64>) -> EmpiricalGame {
    assert_eq!(u0.len(), rows * cols);
    assert_eq!(u1.len(), rows * cols);
    EmpiricalGame {
        game_id: GameId::Matrix { seed: 0, rows, cols },
        mode: EvalMode::Exact,
        rows,
        cols,
        policies: [Vec::new(), Vec::new()],
        u: [u0, u1],
    }
}

#[cfg(test)]
mod tests;
