use super::*;
use crate::game::{build_game, GameId};
use crate::policy::{random_profile, uniform_profile, BehaviorPolicy};
use crate::rng;
use rand::Rng;

fn matching_pennies() -> EmpiricalGame {
    let u0 = vec![1.0, -1.0, -1.0, 1.0];
    let u1: Vec<f64> = u0.iter().map(|v| -v).collect();
    from_tensors(2, 2, u0, u1)
}

#[test]
fn first_extension_matches_expected_payoff() {
    let game = build_game(GameId::Kuhn).unwrap();
    let mut eg = EmpiricalGame::new(&game, EvalMode::Exact).unwrap();
    eg.extend(&game, uniform_profile(&game)).unwrap();
    assert_eq!(eg.sizes(), (1, 1));
    let u = crate::game::expected_payoff(&game, &uniform_profile(&game)).unwrap();
    assert_eq!(eg.payoff(0, 0, 0), u[0]);
    assert_eq!(eg.payoff(1, 0, 0), u[1]);
}

#[test]
fn extend_only_fills_the_new_border() {
    let game = build_game(GameId::Kuhn).unwrap();
    let mut eg = EmpiricalGame::new(&game, EvalMode::Exact).unwrap();
    for seed in 0..2 {
        eg.extend(&game, random_profile(&game, &mut rng::stream(seed, 50))).unwrap();
    }
    assert_eq!(eg.sizes(), (2, 2));
    let before: Vec<Vec<f64>> = (0..2)
        .map(|p| (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| eg.payoff(p, i, j)).collect())
        .collect();
    eg.extend(&game, random_profile(&game, &mut rng::stream(9, 50))).unwrap();
    assert_eq!(eg.sizes(), (3, 3));
    // Old entries are carried over bit-for-bit.
    for p in 0..2 {
        let mut k = 0;
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(eg.payoff(p, i, j).to_bits(), before[p][k].to_bits());
                k += 1;
            }
        }
    }
    // Every entry equals an exact recomputation.
    for i in 0..3 {
        for j in 0..3 {
            let profile = vec![eg.policies(0)[i].clone(), eg.policies(1)[j].clone()];
            let u = crate::game::expected_payoff(&game, &profile).unwrap();
            assert_eq!(eg.payoff(0, i, j), u[0]);
            assert_eq!(eg.payoff(1, i, j), u[1]);
        }
    }
}

#[test]
fn zero_sum_closure_of_the_tensor() {
    let game = build_game(GameId::Kuhn).unwrap();
    let mut eg = EmpiricalGame::new(&game, EvalMode::Exact).unwrap();
    for seed in 0..3 {
        eg.extend(&game, random_profile(&game, &mut rng::stream(seed, 51))).unwrap();
    }
    let (m, n) = eg.sizes();
    for i in 0..m {
        for j in 0..n {
            assert!((eg.payoff(0, i, j) + eg.payoff(1, i, j)).abs() < 1e-9);
            assert!(eg.payoff(0, i, j).abs() <= 2.0 + 1e-9);
        }
    }
}

#[test]
fn rollout_mode_approximates_the_exact_tensor() {
    let game = build_game(GameId::Kuhn).unwrap();
    let mut exact = EmpiricalGame::new(&game, EvalMode::Exact).unwrap();
    let mut rolled =
        EmpiricalGame::new(&game, EvalMode::Rollout { episodes: 20_000, seed: 7 }).unwrap();
    exact.extend(&game, uniform_profile(&game)).unwrap();
    rolled.extend(&game, uniform_profile(&game)).unwrap();
    assert!((exact.payoff(0, 0, 0) - rolled.payoff(0, 0, 0)).abs() < 0.05);
}

#[test]
fn prd_on_a_singleton_game() {
    let eg = from_tensors(1, 1, vec![0.3], vec![-0.3]);
    let meta = projected_replicator_dynamics(&eg, 100, 1e-3, 0.0).unwrap();
    assert_eq!(meta.weights[0], vec![1.0]);
    assert_eq!(meta.weights[1], vec![1.0]);
}

#[test]
fn prd_finds_the_matching_pennies_equilibrium() {
    let eg = matching_pennies();
    let meta = projected_replicator_dynamics(&eg, 100_000, 1e-3, 1e-10).unwrap();
    for side in 0..2 {
        for &w in &meta.weights[side] {
            assert!((w - 0.5).abs() < 0.05, "side {side}: {:?}", meta.weights[side]);
        }
    }
    assert!(restricted_regret(&eg, &meta) < 0.05);
}

#[test]
fn prd_respects_dominance_and_the_floor() {
    let floor = 1e-10;
    let u0 = vec![1.0, 1.0, 0.0, 0.0];
    let u1: Vec<f64> = u0.iter().map(|v| -v).collect();
    let eg = from_tensors(2, 2, u0, u1);
    let meta = projected_replicator_dynamics(&eg, 100_000, 1e-3, floor).unwrap();
    // The trajectory average keeps a sliver of mass on the transient away
    // from the dominant action; concentration is near-total regardless.
    assert!(meta.weights[0][0] >= 0.98, "{:?}", meta.weights[0]);
    let tail = projected_replicator_dynamics(&eg, 1_000_000, 1e-3, floor).unwrap();
    assert!(tail.weights[0][0] > meta.weights[0][0], "more steps concentrate further");
    for side in 0..2 {
        let sum: f64 = meta.weights[side].iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(meta.weights[side].iter().all(|&w| w >= floor));
    }
}

#[test]
fn prd_output_stays_on_the_floored_simplex() {
    let mut rng = rng::stream(60, 0);
    for trial in 0..10 {
        let (m, n) = (2 + trial % 3, 2 + (trial / 3) % 3);
        let u0: Vec<f64> = (0..m * n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let u1: Vec<f64> = u0.iter().map(|v| -v).collect();
        let eg = from_tensors(m, n, u0, u1);
        let floor = 1e-6;
        let meta = projected_replicator_dynamics(&eg, 5_000, 1e-2, floor).unwrap();
        for side in 0..2 {
            let sum: f64 = meta.weights[side].iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "trial {trial}");
            assert!(meta.weights[side].iter().all(|&w| w >= floor - 1e-12), "trial {trial}");
        }
    }
}

#[test]
fn prd_rejects_bad_parameters() {
    let eg = matching_pennies();
    assert!(projected_replicator_dynamics(&eg, 0, 1e-3, 0.0).is_err());
    assert!(projected_replicator_dynamics(&eg, 10, 0.0, 0.0).is_err());
    assert!(projected_replicator_dynamics(&eg, 10, 1e-3, 0.5).is_err());
}

#[test]
fn prd_solves_random_zero_sum_games_to_low_regret() {
    let mut rng = rng::stream(61, 0);
    let mut regrets: Vec<f64> = (0..20)
        .map(|_| {
            let u0: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let u1: Vec<f64> = u0.iter().map(|v| -v).collect();
            let eg = from_tensors(3, 3, u0, u1);
            let meta = projected_replicator_dynamics(&eg, 100_000, 1e-3, 1e-10).unwrap();
            restricted_regret(&eg, &meta)
        })
        .collect();
    regrets.sort_by(f64::total_cmp);
    assert!(regrets[10] <= 0.05, "median regret {}", regrets[10]);
}

#[test]
fn restricted_regret_cases() {
    let singleton = from_tensors(1, 1, vec![0.7], vec![-0.7]);
    let profile = MetaProfile { weights: [vec![1.0], vec![1.0]] };
    assert_eq!(restricted_regret(&singleton, &profile), 0.0);

    let eg = matching_pennies();
    let mixed = MetaProfile { weights: [vec![0.5, 0.5], vec![0.5, 0.5]] };
    assert!(restricted_regret(&eg, &mixed).abs() < 1e-12);
    // At the pure diagonal profile only the column player can gain (by 2):
    // direct tensor evaluation of sum_i [max_k u_i(e_k, x_-i) - u_i(x)].
    let pure = MetaProfile { weights: [vec![1.0, 0.0], vec![1.0, 0.0]] };
    assert!((restricted_regret(&eg, &pure) - 2.0).abs() < 1e-12);
}

#[test]
fn checkpoints_reproduce_prd_exactly() {
    let game = build_game(GameId::Kuhn).unwrap();
    let mut eg = EmpiricalGame::new(&game, EvalMode::Exact).unwrap();
    for seed in 0..3 {
        eg.extend(&game, random_profile(&game, &mut rng::stream(seed, 52))).unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eg.json");
    eg.save(&game, &path).unwrap();
    let reloaded = EmpiricalGame::load(&game, &path).unwrap();
    let a = projected_replicator_dynamics(&eg, 10_000, 1e-3, 1e-10).unwrap();
    let b = projected_replicator_dynamics(&reloaded, 10_000, 1e-3, 1e-10).unwrap();
    for side in 0..2 {
        for (x, y) in a.weights[side].iter().zip(&b.weights[side]) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

#[test]
fn checkpoints_reject_the_wrong_game() {
    let kuhn = build_game(GameId::Kuhn).unwrap();
    let leduc = build_game(GameId::Leduc).unwrap();
    let mut eg = EmpiricalGame::new(&kuhn, EvalMode::Exact).unwrap();
    eg.extend(&kuhn, uniform_profile(&kuhn)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eg.json");
    eg.save(&kuhn, &path).unwrap();
    assert!(EmpiricalGame::load(&leduc, &path).is_err());
}

#[test]
fn synthetic_games_cannot_extend() {
    let game = build_game(GameId::Kuhn).unwrap();
    let mut eg = matching_pennies();
    assert!(eg.extend(&game, uniform_profile(&game)).is_err());
}

#[test]
fn mixed_policy_players_are_checked() {
    let game = build_game(GameId::Kuhn).unwrap();
    let mut eg = EmpiricalGame::new(&game, EvalMode::Exact).unwrap();
    let swapped = vec![BehaviorPolicy::uniform(&game, 1), BehaviorPolicy::uniform(&game, 0)];
    assert!(eg.extend(&game, swapped).is_err());
}
