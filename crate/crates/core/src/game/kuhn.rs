//! Kuhn poker: 3 cards, one betting round, ante 1, bet 1.
//!
//! Infostate keys have the form `<card>:<history>` where `<card>` is one of
//! `J`, `Q`, `K` and `<history>` is the public betting string over
//! `x` (check), `b` (bet), `f` (fold), `c` (call). Each decision state offers
//! two actions: action 0 is the passive one (check or fold), action 1 the
//! aggressive one (bet or call).

use std::collections::BTreeMap;

use super::{ChanceOutcome, GameBuilder, GameId, MarkovGame, StateId};
use crate::policy::BehaviorPolicy;
use crate::{Error, Result};

pub const CARDS: [char; 3] = ['J', 'Q', 'K'];

pub(super) fn build() -> Result<MarkovGame> {
    let mut b = GameBuilder::new(GameId::Kuhn, 2);
    b.payoff_bounds(-2.0, 2.0);
    let terminal = b.add_terminal();
    let mut outcomes = Vec::new();
    for c1 in 0..3usize {
        for c2 in 0..3usize {
            if c1 == c2 {
                continue;
            }
            let root = betting_node(&mut b, terminal, c1, c2, "");
            outcomes.push(ChanceOutcome {
                prob: 1.0 / 6.0,
                next: root,
                rewards: vec![0.0, 0.0],
            });
        }
    }
    let deal = b.add_chance(outcomes);
    b.finish(vec![(deal, 1.0)])
}

fn betting_node(
    b: &mut GameBuilder,
    terminal: StateId,
    c1: usize,
    c2: usize,
    hist: &str,
) -> StateId {
    let player = hist.len() % 2;
    let mut rows = Vec::with_capacity(2);
    for action in action_chars(hist) {
        let child = format!("{hist}{action}");
        if let Some(p1) = terminal_payoff(c1, c2, &child) {
            rows.push((terminal, vec![p1, -p1]));
        } else {
            let next = betting_node(b, terminal, c1, c2, &child);
            rows.push((next, vec![0.0, 0.0]));
        }
    }
    let obs = vec![
        format!("{}:{hist}", CARDS[c1]),
        format!("{}:{hist}", CARDS[c2]),
    ];
    b.add_decision(obs, vec![(player, 2)], rows)
}

/// Legal action letters given the public history: `[passive, aggressive]`.
fn action_chars(hist: &str) -> [char; 2] {
    if hist.ends_with('b') {
        ['f', 'c']
    } else {
        ['x', 'b']
    }
}

/// Player-1 payoff if `hist` is a finished betting sequence.
fn terminal_payoff(c1: usize, c2: usize, hist: &str) -> Option<f64> {
    let win = if c1 > c2 { 1.0 } else { -1.0 };
    match hist {
        "xx" => Some(win),
        "bc" | "xbc" => Some(2.0 * win),
        "bf" => Some(1.0),
        "xbf" => Some(-1.0),
        _ => None,
    }
}

/// The classic one-parameter family of Kuhn equilibria, `alpha` in [0, 1/3]:
/// the first player bluff-bets a jack with probability `alpha`, value-bets a
/// king with `3 alpha`, always checks a queen and calls a bet behind the
/// check with `alpha + 1/3`; the second player bets a jack with 1/3, calls
/// with a queen with 1/3, and always bets or calls a king. Game value is
/// -1/18 for the first player.
pub fn nash_profile(game: &MarkovGame, alpha: f64) -> Result<Vec<BehaviorPolicy>> {
    if !(0.0..=1.0 / 3.0).contains(&alpha) {
        return Err(Error::InvalidConfig(format!(
            "alpha must lie in [0, 1/3], got {alpha}"
        )));
    }
    let bet = |p: f64| vec![1.0 - p, p];
    let mut p1 = BTreeMap::new();
    p1.insert("J:".to_string(), bet(alpha));
    p1.insert("Q:".to_string(), bet(0.0));
    p1.insert("K:".to_string(), bet(3.0 * alpha));
    p1.insert("J:xb".to_string(), bet(0.0));
    p1.insert("Q:xb".to_string(), bet(alpha + 1.0 / 3.0));
    p1.insert("K:xb".to_string(), bet(1.0));
    let mut p2 = BTreeMap::new();
    p2.insert("J:x".to_string(), bet(1.0 / 3.0));
    p2.insert("Q:x".to_string(), bet(0.0));
    p2.insert("K:x".to_string(), bet(1.0));
    p2.insert("J:b".to_string(), bet(0.0));
    p2.insert("Q:b".to_string(), bet(1.0 / 3.0));
    p2.insert("K:b".to_string(), bet(1.0));
    Ok(vec![
        BehaviorPolicy::from_table(game, 0, &p1)?,
        BehaviorPolicy::from_table(game, 1, &p2)?,
    ])
}
