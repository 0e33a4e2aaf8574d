//! Leduc poker: 6 cards (3 ranks x 2 suits), two betting rounds with at most
//! two raises each, raise size 2 in round one and 4 in round two, ante 1.
//! After the first round a public board card is dealt; at showdown a hand
//! pairing the board beats any unpaired hand, otherwise rank decides, and
//! equal ranks split the pot.
//!
//! Infostate keys have the form `<card>:<board>:<round1>/<round2>` with `-`
//! standing for an undealt board, e.g. `Qa:-:cr/` or `Qa:Kb:crc/r`. Betting
//! letters are `c` (check or call), `r` (raise), `f` (fold). Facing no
//! outstanding raise the actions are `[c, r]`; facing a raise they are
//! `[f, c, r]`, with the raise dropped once two raises were made in the
//! round.

use super::{ChanceOutcome, GameBuilder, GameId, MarkovGame, StateId};
use crate::Result;

pub const CARDS: [&str; 6] = ["Ja", "Jb", "Qa", "Qb", "Ka", "Kb"];

const RAISE_SIZE: [i64; 2] = [2, 4];
const MAX_RAISES: u8 = 2;

fn rank(card: usize) -> usize {
    card / 2
}

#[derive(Clone)]
struct Betting {
    round: usize,
    hist: [String; 2],
    raises: u8,
    /// Chips contributed so far by each player, antes included.
    contrib: [i64; 2],
    to_act: usize,
}

impl Betting {
    fn new_round(round: usize, contrib: [i64; 2]) -> Self {
        Betting { round, hist: [String::new(), String::new()], raises: 0, contrib, to_act: 0 }
    }

    fn outstanding(&self) -> bool {
        self.contrib[self.to_act] < self.contrib[1 - self.to_act]
    }

    fn actions(&self) -> Vec<char> {
        if self.outstanding() {
            if self.raises < MAX_RAISES {
                vec!['f', 'c', 'r']
            } else {
                vec!['f', 'c']
            }
        } else {
            vec!['c', 'r']
        }
    }

    fn key(&self, card: usize, board: Option<usize>) -> String {
        let board = board.map_or("-", |c| CARDS[c]);
        format!("{}:{}:{}/{}", CARDS[card], board, self.hist[0], self.hist[1])
    }
}

enum AfterAction {
    Continue(Betting),
    RoundOver([i64; 2]),
    Fold { folder: usize },
}

fn apply(b: &Betting, action: char) -> AfterAction {
    let mut next = b.clone();
    let me = b.to_act;
    next.hist[b.round].push(action);
    match action {
        'f' => return AfterAction::Fold { folder: me },
        'c' => {
            next.contrib[me] = next.contrib[1 - me];
            // A call closes the round unless it is a first-action check.
            let closes = b.outstanding() || !b.hist[b.round].is_empty();
            if closes {
                return AfterAction::RoundOver(next.contrib);
            }
        }
        'r' => {
            next.contrib[me] = next.contrib[1 - me] + RAISE_SIZE[b.round];
            next.raises += 1;
        }
        _ => unreachable!(),
    }
    next.to_act = 1 - me;
    AfterAction::Continue(next)
}

fn fold_rewards(folder: usize, contrib: [i64; 2]) -> Vec<f64> {
    let loss = contrib[folder] as f64;
    let mut r = vec![0.0, 0.0];
    r[folder] = -loss;
    r[1 - folder] = loss;
    r
}

fn showdown_rewards(c1: usize, c2: usize, board: usize, contrib: [i64; 2]) -> Vec<f64> {
    let winner = if rank(c1) == rank(board) {
        Some(0)
    } else if rank(c2) == rank(board) {
        Some(1)
    } else if rank(c1) > rank(c2) {
        Some(0)
    } else if rank(c2) > rank(c1) {
        Some(1)
    } else {
        None
    };
    match winner {
        Some(w) => {
            let gain = contrib[1 - w] as f64;
            let mut r = vec![0.0, 0.0];
            r[w] = gain;
            r[1 - w] = -gain;
            r
        }
        None => vec![0.0, 0.0],
    }
}

struct Ctx {
    terminal: StateId,
    c1: usize,
    c2: usize,
}

pub(super) fn build() -> Result<MarkovGame> {
    let mut b = GameBuilder::new(GameId::Leduc, 2);
    b.payoff_bounds(-13.0, 13.0);
    let terminal = b.add_terminal();
    let mut outcomes = Vec::new();
    for c1 in 0..6usize {
        for c2 in 0..6usize {
            if c1 == c2 {
                continue;
            }
            let ctx = Ctx { terminal, c1, c2 };
            let root = betting_node(&mut b, &ctx, Betting::new_round(0, [1, 1]), None);
            outcomes.push(ChanceOutcome {
                prob: 1.0 / 30.0,
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
    ctx: &Ctx,
    betting: Betting,
    board: Option<usize>,
) -> StateId {
    let actions = betting.actions();
    let mut rows = Vec::with_capacity(actions.len());
    for &action in &actions {
        match apply(&betting, action) {
            AfterAction::Fold { folder } => {
                rows.push((ctx.terminal, fold_rewards(folder, betting.contrib)));
            }
            AfterAction::RoundOver(contrib) => match board {
                None => {
                    // Deal the board, then play round two.
                    let round1 = {
                        let mut h = betting.hist[0].clone();
                        h.push(action);
                        h
                    };
                    let mut deals = Vec::new();
                    for card in 0..6usize {
                        if card == ctx.c1 || card == ctx.c2 {
                            continue;
                        }
                        let mut next_round = Betting::new_round(1, contrib);
                        next_round.hist[0] = round1.clone();
                        let next = betting_node(b, ctx, next_round, Some(card));
                        deals.push(ChanceOutcome {
                            prob: 0.25,
                            next,
                            rewards: vec![0.0, 0.0],
                        });
                    }
                    rows.push((b.add_chance(deals), vec![0.0, 0.0]));
                }
                Some(board) => {
                    rows.push((ctx.terminal, showdown_rewards(ctx.c1, ctx.c2, board, contrib)));
                }
            },
            AfterAction::Continue(next) => {
                rows.push((betting_node(b, ctx, next, board), vec![0.0, 0.0]));
            }
        }
    }
    let obs = vec![betting.key(ctx.c1, board), betting.key(ctx.c2, board)];
    b.add_decision(obs, vec![(betting.to_act, actions.len())], rows)
}
