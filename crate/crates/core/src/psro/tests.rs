use super::*;
use crate::game::kuhn;
use crate::meta::EvalMode;

fn tiny(game: GameId, method: Method) -> RunConfig {
    RunConfig {
        iterations: 4,
        budget: 100,
        prd: PrdParams { steps: 2_000, ..PrdParams::default() },
        ..RunConfig::new(game, method)
    }
}

#[test]
fn hybrid_schedule_is_one_based() {
    let fired: Vec<u32> = (1..=100).filter(|&t| is_ibr_iteration(t, 10)).collect();
    assert_eq!(fired, vec![10, 20, 30, 40, 50, 60, 70, 80, 90, 100]);
    assert!((1..=100).all(|t| !is_ibr_iteration(t, 0)));
}

#[test]
fn budget_ledger_matches_the_schedule_formula() {
    for (method, hybrid_k) in [
        (Method::Psro, 0),
        (Method::JbrNaive, 0),
        (Method::JbrDeltaRandom, 0),
        (Method::JbrNaive, 2),
    ] {
        let mut cfg = tiny(GameId::Kuhn, method);
        cfg.hybrid_k = hybrid_k;
        let records = run_psro(&cfg).unwrap();
        let total = records.last().unwrap().cumulative_episodes;
        assert_eq!(total, scheduled_episodes(&cfg, 2), "{method} k={hybrid_k}");
        // The ledger never decreases.
        for pair in records.windows(2) {
            assert!(pair[1].cumulative_episodes >= pair[0].cumulative_episodes);
        }
    }
    // Closed forms for the paper-scale configuration.
    let base = RunConfig::new(GameId::Leduc, Method::Psro);
    assert_eq!(scheduled_episodes(&base, 2), 2 * 100 * 10_000);
    let jbr = RunConfig::new(GameId::Leduc, Method::JbrNaive);
    assert_eq!(scheduled_episodes(&jbr, 2), 100 * 10_000);
    let hybrid = RunConfig { hybrid_k: 10, ..RunConfig::new(GameId::Leduc, Method::JbrDeltaTargeted) };
    assert_eq!(scheduled_episodes(&hybrid, 2), 100 * 10_000 + 10 * 10_000);
}

#[test]
fn hybrid_runs_mark_their_ibr_iterations() {
    let mut cfg = tiny(GameId::Kuhn, Method::JbrNaive);
    cfg.hybrid_k = 2;
    let records = run_psro(&cfg).unwrap();
    let kinds: Vec<&str> = records.iter().map(|r| r.oracle_kind).collect();
    assert_eq!(kinds, vec!["jbr-naive", "ibr", "jbr-naive", "ibr"]);
}

#[test]
fn nashconv_vanishes_at_the_kuhn_equilibrium() {
    let game = crate::game::build_game(GameId::Kuhn).unwrap();
    let nash = kuhn::nash_profile(&game, 0.2).unwrap();
    let mut eg = crate::meta::EmpiricalGame::new(&game, EvalMode::Exact).unwrap();
    eg.extend(&game, nash).unwrap();
    let profile = crate::meta::MetaProfile { weights: [vec![1.0], vec![1.0]] };
    let nc = nashconv(&game, &profile, &eg).unwrap();
    assert!(nc.abs() < 1e-6, "NashConv at equilibrium: {nc}");
}

#[test]
fn nashconv_is_nonnegative_and_bounded() {
    let game = crate::game::build_game(GameId::Kuhn).unwrap();
    let mut eg = crate::meta::EmpiricalGame::new(&game, EvalMode::Exact).unwrap();
    eg.extend(&game, crate::policy::uniform_profile(&game)).unwrap();
    let profile = crate::meta::MetaProfile { weights: [vec![1.0], vec![1.0]] };
    let nc = nashconv(&game, &profile, &eg).unwrap();
    assert!(nc >= 0.0);
    assert!(nc <= 2.0 * game.payoff_range());
}

#[test]
fn runs_are_deterministic() {
    let cfg = tiny(GameId::Kuhn, Method::JbrDeltaTargeted);
    let a = run_psro(&cfg).unwrap();
    let b = run_psro(&cfg).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.nashconv.to_bits(), y.nashconv.to_bits());
        assert_eq!(x.cumulative_episodes, y.cumulative_episodes);
        for (u, v) in x.br_values.iter().zip(&y.br_values) {
            assert_eq!(u.to_bits(), v.to_bits());
        }
    }
}

#[test]
fn csv_schema_and_running_minimum() {
    let cfg = tiny(GameId::Kuhn, Method::JbrNaive);
    let records = run_psro(&cfg).unwrap();
    let mut buf = Vec::new();
    {
        let mut writer = RunCsvWriter::new(&mut buf).unwrap();
        for r in &records {
            writer.write(r).unwrap();
        }
    }
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), RUN_CSV_HEADER);
    let mut min_so_far = f64::INFINITY;
    for (line, record) in lines.zip(&records) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 7);
        min_so_far = min_so_far.min(record.nashconv);
        let written: f64 = cols[3].parse().unwrap();
        assert_eq!(written, min_so_far);
    }
}

#[test]
fn theory_check_is_tight_at_zero_delta() {
    let game = crate::game::build_game(GameId::Kuhn).unwrap();
    let report = theory_check_perturbation(&game, 5, &[0.0], 3).unwrap();
    let entry = &report.per_delta[0];
    assert_eq!(entry.violations, 0);
    assert!(entry.max_measured_l1 == 0.0);
    assert!(entry.max_gap.abs() < 1e-9, "gap {}", entry.max_gap);
}

#[test]
fn theory_check_holds_on_small_games() {
    let game = crate::game::build_game(GameId::Kuhn).unwrap();
    let report = theory_check_perturbation(&game, 20, &[0.1, 0.5], 4).unwrap();
    assert_eq!(report.violations(), 0);
    for entry in &report.per_delta {
        assert!(entry.max_measured_l1 <= 2.0 * entry.delta + 1e-12);
    }
    let matrix = crate::game::build_game(GameId::Matrix { seed: 8, rows: 2, cols: 2 }).unwrap();
    let report = theory_check_perturbation(&matrix, 50, &[0.1, 0.5], 5).unwrap();
    assert_eq!(report.violations(), 0);
}

#[test]
fn method_strings_round_trip() {
    for method in [
        Method::Psro,
        Method::JbrNaive,
        Method::JbrSpi,
        Method::JbrDeltaRandom,
        Method::JbrDeltaTargeted,
    ] {
        let s = method.to_string();
        assert_eq!(s.parse::<Method>().unwrap(), method);
    }
    assert!("ddpg".parse::<Method>().is_err());
}

#[test]
fn config_validation_catches_nonsense() {
    let mut cfg = RunConfig::new(GameId::Kuhn, Method::JbrNaive);
    cfg.iterations = 0;
    assert!(cfg.validate().is_err());
    cfg.iterations = 1;
    cfg.budget = 0;
    assert!(cfg.validate().is_err());
    cfg.budget = 1;
    cfg.delta = Some(1.5);
    assert!(cfg.validate().is_err());
}

#[test]
fn jbr_runs_with_spi_sweep_mode() {
    let mut cfg = tiny(GameId::Kuhn, Method::JbrSpi);
    cfg.spi = SpiMode::Sweep { lo: 0, hi: 5 };
    let records = run_psro(&cfg).unwrap();
    assert_eq!(records.len(), 4);
    assert!(records.iter().all(|r| r.oracle_kind == "jbr-spi"));
}
