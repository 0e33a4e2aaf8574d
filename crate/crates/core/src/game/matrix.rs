//! Random zero-sum bimatrix games: a single simultaneous decision state, row
//! payoffs drawn uniformly from [-1, 1] by a seeded stream. The column
//! player's payoff is the negated row payoff. Both players observe the key
//! `root`.

use rand::Rng;

use super::{GameBuilder, GameId, MarkovGame};
use crate::{rng, Result};

pub(super) fn build(seed: u64, rows: usize, cols: usize) -> Result<MarkovGame> {
    let m = payoffs(seed, rows, cols);
    let lo = m.iter().flatten().fold(f64::INFINITY, |a, &v| a.min(v.min(-v)));
    let hi = m.iter().flatten().fold(f64::NEG_INFINITY, |a, &v| a.max(v.max(-v)));
    let mut b = GameBuilder::new(GameId::Matrix { seed, rows, cols }, 2);
    b.payoff_bounds(lo, hi);
    let terminal = b.add_terminal();
    let mut table = Vec::with_capacity(rows * cols);
    for row in &m {
        for &v in row {
            table.push((terminal, vec![v, -v]));
        }
    }
    let mut actors = Vec::new();
    if rows > 1 {
        actors.push((0, rows));
    }
    if cols > 1 {
        actors.push((1, cols));
    }
    let root = if actors.is_empty() {
        // Degenerate 1x1 game: nobody chooses anything.
        let (next, rewards) = table.pop().unwrap();
        b.add_chance(vec![super::ChanceOutcome { prob: 1.0, next, rewards }])
    } else {
        b.add_decision(vec!["root".into(), "root".into()], actors, table)
    };
    b.finish(vec![(root, 1.0)])
}

/// The row player's payoff matrix for `matrix:<seed>:<rows>x<cols>`.
pub fn payoffs(seed: u64, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    let mut rng = rng::stream(seed, 0x6d61_7472_6978);
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect()
}
