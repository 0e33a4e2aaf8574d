//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured quantities. The experiment grid (Kuhn and Leduc runs at
//! T = 100, budget = 10,000, seeds 0/1/2) is executed once and shared.

mod common;

use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::Instant;

use rayon::prelude::*;

use psro_core::dataset::collect;
use psro_core::game::expected_payoff;
use psro_core::meta::{from_tensors, projected_replicator_dynamics, restricted_regret};
use psro_core::oracles::{
    best_response_via_vi, exact_best_response, optimal_value, spi_jbr, SpiConfig,
};
use psro_core::policy::random_profile;
use psro_core::psro::{
    run_psro, scheduled_episodes, theory_check_perturbation, write_run_csv, Method, RunConfig,
    SpiMode,
};
use psro_core::{build_game, rng, GameId};

const SEEDS: [u64; 3] = [0, 1, 2];

struct RunOutcome {
    cfg: RunConfig,
    min_nashconv: f64,
    final_nashconv: f64,
    total_episodes: u64,
}

struct Bundle {
    runs: Vec<RunOutcome>,
}

impl Bundle {
    fn medians(&self, game: GameId) -> BTreeMap<String, f64> {
        let mut grouped: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for run in self.runs.iter().filter(|r| r.cfg.game == game) {
            grouped.entry(run.cfg.label()).or_default().push(run.min_nashconv);
        }
        grouped.into_iter().map(|(label, mins)| (label, common::median(mins))).collect()
    }
}

fn bundle() -> &'static Bundle {
    static BUNDLE: OnceLock<Bundle> = OnceLock::new();
    BUNDLE.get_or_init(|| {
        let mut configs = Vec::new();
        let mut push = |game, method, delta: Option<f64>, hybrid_k| {
            for seed in SEEDS {
                configs.push(RunConfig {
                    game,
                    method,
                    iterations: 100,
                    budget: 10_000,
                    delta,
                    spi: SpiMode::default(),
                    hybrid_k,
                    seed,
                    prd: Default::default(),
                });
            }
        };
        push(GameId::Kuhn, Method::Psro, None, 0);
        push(GameId::Kuhn, Method::JbrNaive, None, 0);
        push(GameId::Leduc, Method::Psro, None, 0);
        push(GameId::Leduc, Method::JbrNaive, None, 0);
        for delta in [0.05, 0.1, 0.2, 0.4, 0.6] {
            push(GameId::Leduc, Method::JbrDeltaRandom, Some(delta), 0);
        }
        for delta in [0.1, 0.2, 0.3, 0.4, 0.5] {
            push(GameId::Leduc, Method::JbrDeltaTargeted, Some(delta), 0);
        }
        push(GameId::Leduc, Method::JbrDeltaTargeted, Some(0.5), 10);
        let start = Instant::now();
        let runs: Vec<RunOutcome> = configs
            .into_par_iter()
            .map(|cfg| {
                let records = run_psro(&cfg).expect("run failed");
                RunOutcome {
                    min_nashconv: records.iter().map(|r| r.nashconv).fold(f64::INFINITY, f64::min),
                    final_nashconv: records.last().unwrap().nashconv,
                    total_episodes: records.last().unwrap().cumulative_episodes,
                    cfg,
                }
            })
            .collect();
        eprintln!("[acceptance] {} runs in {:.1?}", runs.len(), start.elapsed());
        Bundle { runs }
    })
}

#[test]
fn criterion_1_oracle_equivalence() {
    let start = Instant::now();
    let game = build_game(GameId::Kuhn).unwrap();
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let profile = random_profile(&game, &mut rng::stream(seed, 20));
        for player in 0..2 {
            let tree = exact_best_response(&game, player, &profile).unwrap().value;
            let (mdp, q) = best_response_via_vi(&game, player, &profile).unwrap();
            let vi = optimal_value(&mdp, &q);
            worst = worst.max((tree - vi).abs());
        }
    }
    let elapsed = start.elapsed();
    assert!(worst < 1e-9, "max |tree - VI| = {worst:.3e}");
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:.2?}");
    println!("ACCEPTANCE 1 (oracle equivalence): PASS - max deviation {worst:.2e} in {elapsed:.2?}");
}

#[test]
fn criterion_2_kuhn_feasibility() {
    let bundle = bundle();
    let medians = bundle.medians(GameId::Kuhn);
    let psro = medians["psro"];
    let jbr = medians["jbr"];
    assert!(psro < 0.1, "PSRO median min-NashConv {psro}");
    assert!(jbr < 0.1, "JBR median min-NashConv {jbr}");
    assert!(jbr <= 2.0 * psro, "JBR {jbr} vs 2x PSRO {}", 2.0 * psro);
    // PSRO on Kuhn converges outright: median final NashConv below 0.05.
    let finals: Vec<f64> = bundle
        .runs
        .iter()
        .filter(|r| r.cfg.game == GameId::Kuhn && r.cfg.method == Method::Psro)
        .map(|r| r.final_nashconv)
        .collect();
    let final_med = common::median(finals);
    assert!(final_med < 0.05, "PSRO median final NashConv {final_med}");
    println!(
        "ACCEPTANCE 2 (Kuhn feasibility): PASS - psro {psro:.4}, jbr {jbr:.4}, final {final_med:.4}"
    );
}

#[test]
fn criterion_3_leduc_ordering() {
    let medians = bundle().medians(GameId::Leduc);
    let psro = medians["psro"];
    let hbr = medians["jbr-dt-d0.5-h10"];
    let dt = medians["jbr-dt-d0.5"];
    let dr = medians["jbr-dr-d0.1"];
    let naive = medians["jbr"];
    assert!(psro <= hbr, "psro {psro} vs hbr {hbr}");
    assert!(hbr <= dt, "hbr {hbr} vs dt {dt}");
    assert!(dt <= dr, "dt {dt} vs dr {dr}");
    assert!(dr <= naive, "dr {dr} vs naive {naive}");
    assert!(naive >= 2.0 * psro, "naive {naive} vs 2x psro {}", 2.0 * psro);
    println!(
        "ACCEPTANCE 3 (Leduc ordering): PASS - psro {psro:.3} <= hbr {hbr:.3} <= dt {dt:.3} <= dr {dr:.3} <= naive {naive:.3}"
    );
}

#[test]
fn criterion_4_sample_efficiency_ledger() {
    let bundle = bundle();
    for run in &bundle.runs {
        let expected = scheduled_episodes(&run.cfg, 2);
        assert_eq!(
            run.total_episodes,
            expected,
            "{} seed {}",
            run.cfg.label(),
            run.cfg.seed
        );
    }
    // Closed forms at the experimental scale.
    let psro = RunConfig::new(GameId::Leduc, Method::Psro);
    assert_eq!(scheduled_episodes(&psro, 2), 2_000_000);
    let jbr = RunConfig::new(GameId::Leduc, Method::JbrNaive);
    assert_eq!(scheduled_episodes(&jbr, 2), 1_000_000);
    let hbr = RunConfig { hybrid_k: 10, ..RunConfig::new(GameId::Leduc, Method::JbrDeltaTargeted) };
    assert_eq!(scheduled_episodes(&hbr, 2), 1_000_000 + 100_000);
    println!(
        "ACCEPTANCE 4 (sample-efficiency ledger): PASS - {} runs match the schedule exactly",
        bundle.runs.len()
    );
}

#[test]
fn criterion_5_spi_safety() {
    let game = build_game(GameId::Kuhn).unwrap();
    let n_wedge = 10;
    let mut worst = f64::INFINITY;
    for seed in 0..10 {
        let profile = random_profile(&game, &mut rng::stream(seed, 21));
        let data = collect(&game, &profile, 50_000, 1000 + seed).unwrap();
        let base = expected_payoff(&game, &profile).unwrap();
        for player in 0..2 {
            let result = spi_jbr(
                &data,
                &game,
                player,
                &SpiConfig { n_wedge, baseline: profile[player].clone() },
            )
            .unwrap();
            // Pinned mass: uncertain pairs reproduce the baseline exactly.
            let infos = game.infostates(player);
            for id in 0..infos.len() as u32 {
                for a in 0..infos.num_actions(id) {
                    if data.count(player, id, a) < n_wedge {
                        assert_eq!(
                            result.policy.row(id).unwrap()[a],
                            profile[player].row(id).unwrap()[a],
                            "pinned pair ({}, {a})",
                            infos.key(id)
                        );
                    }
                }
            }
            let mut eval = profile.clone();
            eval[player] = result.policy;
            let value = expected_payoff(&game, &eval).unwrap()[player];
            worst = worst.min(value - base[player]);
            assert!(
                value >= base[player] - 0.05,
                "seed {seed} player {player}: {value} vs baseline {}",
                base[player]
            );
        }
    }
    println!("ACCEPTANCE 5 (SPI safety): PASS - worst improvement {worst:+.4}");
}

#[test]
fn criterion_6_perturbation_bound() {
    let deltas = [0.1, 0.5];
    let mut violations = 0;
    let mut max_excess = f64::NEG_INFINITY;
    for seed in 0..1000u64 {
        let game = build_game(GameId::Matrix { seed, rows: 2, cols: 2 }).unwrap();
        let report = theory_check_perturbation(&game, 1, &deltas, seed).unwrap();
        violations += report.violations();
        for entry in &report.per_delta {
            max_excess = max_excess.max(entry.max_excess);
            assert!(entry.max_measured_l1 <= 2.0 * entry.delta + 1e-12);
        }
    }
    let kuhn = build_game(GameId::Kuhn).unwrap();
    let report = theory_check_perturbation(&kuhn, 100, &deltas, 7).unwrap();
    violations += report.violations();
    for entry in &report.per_delta {
        max_excess = max_excess.max(entry.max_excess);
        assert!(entry.max_measured_l1 <= 2.0 * entry.delta + 1e-12);
    }
    assert_eq!(violations, 0, "bound violations observed");
    println!(
        "ACCEPTANCE 6 (perturbed-BR bound): PASS - 0 violations, max excess {max_excess:+.3e}"
    );
}

#[test]
fn criterion_7_delta_sweep_shape() {
    let medians = bundle().medians(GameId::Leduc);
    let naive = medians["jbr"];
    let random: Vec<(f64, f64)> = [0.05, 0.1, 0.2, 0.4, 0.6]
        .iter()
        .map(|&d| (d, medians[&format!("jbr-dr-d{d}")]))
        .collect();
    let best_random = random
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
        .0;
    assert!(
        [0.05, 0.1, 0.2].contains(&best_random),
        "random exploration best at delta {best_random}: {random:?}"
    );
    let at_06 = medians["jbr-dr-d0.6"];
    assert!(at_06 > naive, "random delta=0.6 ({at_06}) should fall behind naive ({naive})");
    for delta in [0.1, 0.2, 0.3, 0.4, 0.5] {
        let dt = medians[&format!("jbr-dt-d{delta}")];
        assert!(
            dt < naive,
            "targeted delta={delta} ({dt}) should beat naive ({naive})"
        );
    }
    println!(
        "ACCEPTANCE 7 (delta-sweep shape): PASS - random best at {best_random}, targeted always beats naive"
    );
}

#[test]
fn criterion_8_prd_sanity() {
    let u0 = vec![1.0, -1.0, -1.0, 1.0];
    let u1: Vec<f64> = u0.iter().map(|v| -v).collect();
    let pennies = from_tensors(2, 2, u0, u1);
    let meta = projected_replicator_dynamics(&pennies, 100_000, 1e-3, 1e-10).unwrap();
    for side in 0..2 {
        for &w in &meta.weights[side] {
            assert!((w - 0.5).abs() <= 0.05, "matching pennies side {side}: {w}");
        }
    }
    use rand::Rng;
    let mut stream = rng::stream(8, 22);
    let regrets: Vec<f64> = (0..20)
        .map(|_| {
            let u0: Vec<f64> = (0..9).map(|_| stream.random_range(-1.0..=1.0)).collect();
            let u1: Vec<f64> = u0.iter().map(|v| -v).collect();
            let eg = from_tensors(3, 3, u0, u1);
            let meta = projected_replicator_dynamics(&eg, 100_000, 1e-3, 1e-10).unwrap();
            restricted_regret(&eg, &meta)
        })
        .collect();
    let med = common::median(regrets.clone());
    let max = regrets.iter().cloned().fold(0.0f64, f64::max);
    assert!(max <= 0.05, "regrets {regrets:?}");
    println!("ACCEPTANCE 8 (PRD sanity): PASS - pennies at 1/2, regret median {med:.4} (max {max:.4})");
}

#[test]
fn criterion_9_determinism() {
    let cfg = RunConfig {
        iterations: 3,
        budget: 300,
        ..RunConfig::new(GameId::Kuhn, Method::JbrDeltaTargeted)
    };
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for pass in 0..2 {
        let records = run_psro(&cfg).unwrap();
        let path = dir.path().join(format!("pass{pass}.csv"));
        write_run_csv(&path, &records).unwrap();
        bytes.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(bytes[0], bytes[1], "re-execution changed the metric columns");
    println!("ACCEPTANCE 9 (determinism): PASS - byte-identical metrics across executions");
}
