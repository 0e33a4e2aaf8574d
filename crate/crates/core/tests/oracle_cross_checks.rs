//! Cross-validation of the library's exact evaluators against the
//! independent brute-force oracle, plus the Monte-Carlo consistency check.

mod common;

use psro_core::game::kuhn;
use psro_core::meta::{EmpiricalGame, EvalMode, MetaProfile};
use psro_core::policy::{random_profile, uniform_profile};
use psro_core::psro::nashconv;
use psro_core::{
    build_game, exact_best_response, expected_payoff, play_episode, rng, GameId,
};

#[test]
fn expected_payoff_matches_brute_force_enumeration() {
    let game = build_game(GameId::Kuhn).unwrap();
    let uniform = uniform_profile(&game);
    let exact = expected_payoff(&game, &uniform).unwrap();
    let brute = common::kuhn_expected_value(&game, &uniform[0], &uniform[1]);
    assert!((exact[0] - brute).abs() < 1e-12);
    assert!((exact[0] - 0.125).abs() < 1e-12);
    for seed in 0..20 {
        let profile = random_profile(&game, &mut rng::stream(seed, 1));
        let exact = expected_payoff(&game, &profile).unwrap();
        let brute = common::kuhn_expected_value(&game, &profile[0], &profile[1]);
        assert!(
            (exact[0] - brute).abs() < 1e-10,
            "seed {seed}: {} vs {brute}",
            exact[0]
        );
        assert!((exact[0] + exact[1]).abs() < 1e-12);
    }
}

#[test]
fn tree_search_matches_brute_force_best_response() {
    let game = build_game(GameId::Kuhn).unwrap();
    for seed in 0..10 {
        let profile = random_profile(&game, &mut rng::stream(seed, 2));
        for player in 0..2 {
            let fast = exact_best_response(&game, player, &profile).unwrap().value;
            let brute = common::kuhn_best_response_value(&game, player, &profile[1 - player]);
            assert!(
                (fast - brute).abs() < 1e-10,
                "seed {seed} player {player}: {fast} vs {brute}"
            );
        }
    }
}

#[test]
fn nashconv_matches_brute_force() {
    let game = build_game(GameId::Kuhn).unwrap();
    let mut eg = EmpiricalGame::new(&game, EvalMode::Exact).unwrap();
    eg.extend(&game, uniform_profile(&game)).unwrap();
    let profile = MetaProfile { weights: [vec![1.0], vec![1.0]] };
    let fast = nashconv(&game, &profile, &eg).unwrap();
    let uniform = uniform_profile(&game);
    let brute = common::kuhn_nashconv(&game, &uniform[0], &uniform[1]);
    assert!((fast - brute).abs() < 1e-10, "{fast} vs {brute}");
    assert!(fast >= 0.0);
}

#[test]
fn equilibrium_profiles_have_zero_brute_force_nashconv() {
    let game = build_game(GameId::Kuhn).unwrap();
    let nash = kuhn::nash_profile(&game, 1.0 / 3.0).unwrap();
    let brute = common::kuhn_nashconv(&game, &nash[0], &nash[1]);
    assert!(brute.abs() < 1e-9, "brute-force NashConv at equilibrium: {brute}");
    let value = common::kuhn_expected_value(&game, &nash[0], &nash[1]);
    assert!((value + 1.0 / 18.0).abs() < 1e-9);
}

#[test]
fn monte_carlo_agrees_with_exact_expectation() {
    let game = build_game(GameId::Kuhn).unwrap();
    let profile = random_profile(&game, &mut rng::stream(5, 3));
    let exact = expected_payoff(&game, &profile).unwrap()[0];
    let episodes = 50_000;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for e in 0..episodes {
        let r = play_episode(&game, &profile, rng::derive_seed(99, e))
            .unwrap()
            .returns(2)[0];
        sum += r;
        sum_sq += r * r;
    }
    let n = episodes as f64;
    let mean = sum / n;
    let variance = (sum_sq / n - mean * mean).max(0.0);
    let stderr = (variance / n).sqrt();
    assert!(
        (mean - exact).abs() <= 3.0 * stderr,
        "MC mean {mean} vs exact {exact} (3 SE = {})",
        3.0 * stderr
    );
}
