//! Shared test support: an independent brute-force oracle for Kuhn poker.
#![allow(dead_code)] // each test binary uses a different subset

//!
//! The oracle re-implements the rules from scratch -- six ordered deals, five
//! betting sequences with hand-written payoffs -- and evaluates profiles by
//! enumerating every (deal, sequence) outcome weighted by chance and policy
//! probabilities. Best responses enumerate all 64 deterministic tables of a
//! player. Nothing here touches the library's tree walkers, so agreement is
//! meaningful.

use psro_core::{BehaviorPolicy, MarkovGame};

pub const CARDS: [char; 3] = ['J', 'Q', 'K'];
pub const DEALS: [(usize, usize); 6] = [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)];

/// One betting step: the action index taken (into `[passive, aggressive]`)
/// at the public history it was taken from.
type Step = (usize, &'static str);

/// Betting sequences as (steps in turn order, payoff to player 1, showdown?);
/// showdown payoffs are additionally signed by the card comparison.
const SEQUENCES: [(&[Step], f64, bool); 5] = [
    // history of (acting infostate suffix, action): payoff, showdown?
    (&[(0, ""), (0, "x")], 1.0, true),           // xx: showdown for the ante
    (&[(0, ""), (1, "x"), (0, "xb")], -1.0, false), // xbf: player 1 folds
    (&[(0, ""), (1, "x"), (1, "xb")], 2.0, true), // xbc: called bet showdown
    (&[(1, ""), (0, "b")], 1.0, false),           // bf: player 2 folds
    (&[(1, ""), (1, "b")], 2.0, true),            // bc: called bet showdown
];

fn prob_of(
    game: &MarkovGame,
    policy: &BehaviorPolicy,
    player: usize,
    card: usize,
    hist: &str,
    action: usize,
) -> f64 {
    let key = format!("{}:{hist}", CARDS[card]);
    let id = game
        .infostates(player)
        .id_of(&key)
        .unwrap_or_else(|| panic!("missing infostate {key}"));
    policy.row(id).expect("row defined")[action]
}

/// Expected player-1 payoff by direct enumeration of all outcomes.
pub fn kuhn_expected_value(
    game: &MarkovGame,
    p1: &BehaviorPolicy,
    p2: &BehaviorPolicy,
) -> f64 {
    let mut total = 0.0;
    for &(c1, c2) in &DEALS {
        let win = if c1 > c2 { 1.0 } else { -1.0 };
        for (steps, payoff, showdown) in SEQUENCES {
            let mut prob = 1.0 / 6.0;
            for (turn, &(action, hist)) in steps.iter().enumerate() {
                prob *= if turn % 2 == 0 {
                    prob_of(game, p1, 0, c1, hist, action)
                } else {
                    prob_of(game, p2, 1, c2, hist, action)
                };
            }
            total += prob * payoff * if showdown { win } else { 1.0 };
        }
    }
    total
}

/// Exact best-response value for `player` by enumerating all 64 deterministic
/// tables over the player's six acting infostates.
pub fn kuhn_best_response_value(
    game: &MarkovGame,
    player: usize,
    opponent: &BehaviorPolicy,
) -> f64 {
    let keys: Vec<String> = match player {
        0 => CARDS
            .iter()
            .flat_map(|c| ["", "xb"].iter().map(move |h| format!("{c}:{h}")))
            .collect(),
        _ => CARDS
            .iter()
            .flat_map(|c| ["x", "b"].iter().map(move |h| format!("{c}:{h}")))
            .collect(),
    };
    let infos = game.infostates(player);
    let mut best = f64::NEG_INFINITY;
    for mask in 0..(1u32 << keys.len()) {
        let mut table = BehaviorPolicy::empty(game, player);
        for (bit, key) in keys.iter().enumerate() {
            let action = usize::from(mask >> bit & 1 == 1);
            let mut row = vec![0.0, 0.0];
            row[action] = 1.0;
            table.set_row(infos.id_of(key).unwrap(), row);
        }
        let value = match player {
            0 => kuhn_expected_value(game, &table, opponent),
            _ => -kuhn_expected_value(game, opponent, &table),
        };
        best = best.max(value);
    }
    best
}

/// NashConv by brute force: sum of best-response gains.
pub fn kuhn_nashconv(game: &MarkovGame, p1: &BehaviorPolicy, p2: &BehaviorPolicy) -> f64 {
    let u1 = kuhn_expected_value(game, p1, p2);
    (kuhn_best_response_value(game, 0, p2) - u1)
        + (kuhn_best_response_value(game, 1, p1) - (-u1))
}

pub fn median(mut values: Vec<f64>) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    values[values.len() / 2]
}
