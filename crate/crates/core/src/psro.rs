//! The PSRO loop with pluggable response oracles.
//!
//! One iteration: materialize the meta-strategy as behavior policies, obtain
//! one new policy per player from the configured oracle, extend the empirical
//! game, re-solve it with projected replicator dynamics, and record the exact
//! NashConv of the new meta-profile. Joint-experience modes collect a single
//! shared dataset per iteration and charge its episode budget once; the
//! independent oracle charges the budget per player. A hybrid period `k > 0`
//! replaces every k-th iteration (1-based) with independent best responses.
//!
//! Targeted exploration splits the shared budget in two: an on-policy warmup
//! half trains preliminary best responses, and the second half is collected
//! with every player's behavior delta-mixed toward its candidate BR -- the
//! policy being trained this iteration, taken as the learner would execute
//! it mid-training (epsilon-greedy around the candidate's greedy choice).
//! The final responses are solved on the union of both halves, so the total
//! episode charge is unchanged.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use crate::dataset::{
    collect_described, perturb, CollectionDescriptor, ExplorationKind, ExplorationSpec,
    JointDataset,
};
use crate::game::{build_game, expected_payoff, GameId, MarkovGame};
use crate::induced::{to_behavior, MixedStrategy};
use crate::meta::{projected_replicator_dynamics, EmpiricalGame, EvalMode, MetaProfile};
use crate::oracles::{exact_best_response, independent_br, naive_jbr, spi_jbr, SpiConfig};
use crate::policy::{random_profile, uniform_profile, BehaviorPolicy};
use crate::rng::{self, tags};
use crate::{Error, Result};

/// Oracle family driving a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Method {
    /// Standard PSRO: independent best responses, full budget per player.
    Psro,
    /// Naive joint-experience BR from one shared dataset.
    JbrNaive,
    /// Conservative JBR with the SPI constraint.
    JbrSpi,
    /// JBR with delta-random exploration during collection.
    JbrDeltaRandom,
    /// JBR with delta-targeted exploration toward the previous BRs.
    JbrDeltaTargeted,
}

impl Method {
    pub fn default_delta(self) -> f64 {
        match self {
            Method::JbrDeltaRandom => 0.1,
            Method::JbrDeltaTargeted => 0.5,
            _ => 0.0,
        }
    }

    fn kind_label(self) -> &'static str {
        match self {
            Method::Psro => "ibr",
            Method::JbrNaive => "jbr-naive",
            Method::JbrSpi => "jbr-spi",
            Method::JbrDeltaRandom => "jbr-dr",
            Method::JbrDeltaTargeted => "jbr-dt",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::Psro => "psro",
            Method::JbrNaive => "jbr",
            Method::JbrSpi => "jbr-spi",
            Method::JbrDeltaRandom => "jbr-dr",
            Method::JbrDeltaTargeted => "jbr-dt",
        };
        f.write_str(s)
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "psro" => Ok(Method::Psro),
            "jbr" => Ok(Method::JbrNaive),
            "jbr-spi" => Ok(Method::JbrSpi),
            "jbr-dr" => Ok(Method::JbrDeltaRandom),
            "jbr-dt" => Ok(Method::JbrDeltaTargeted),
            other => Err(Error::InvalidConfig(format!("unknown method `{other}`"))),
        }
    }
}

/// How the SPI threshold is chosen each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SpiMode {
    Fixed(u32),
    /// Oracle-tuned: try every threshold in `lo..=hi` and keep the candidate
    /// with the best exact value against the opponents.
    Sweep { lo: u32, hi: u32 },
}

impl Default for SpiMode {
    fn default() -> Self {
        SpiMode::Sweep { lo: 0, hi: 50 }
    }
}

/// Projected-replicator-dynamics hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PrdParams {
    pub steps: u64,
    pub dt: f64,
    pub floor: f64,
}

impl Default for PrdParams {
    fn default() -> Self {
        PrdParams { steps: 100_000, dt: 1e-3, floor: 1e-10 }
    }
}

/// Full configuration of one PSRO run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RunConfig {
    pub game: GameId,
    pub method: Method,
    pub iterations: u32,
    /// Episodes per iteration: per player for the independent oracle, shared
    /// by all players for the joint-experience oracles.
    pub budget: u32,
    /// Exploration rate; `None` uses the method's default (0.1 random,
    /// 0.5 targeted).
    pub delta: Option<f64>,
    pub spi: SpiMode,
    /// Hybrid period: every k-th iteration uses independent BRs (0 = never).
    pub hybrid_k: u32,
    pub seed: u64,
    pub prd: PrdParams,
}

impl RunConfig {
    pub fn new(game: GameId, method: Method) -> Self {
        RunConfig {
            game,
            method,
            iterations: 100,
            budget: 10_000,
            delta: None,
            spi: SpiMode::default(),
            hybrid_k: 0,
            seed: 0,
            prd: PrdParams::default(),
        }
    }

    pub fn effective_delta(&self) -> f64 {
        self.delta.unwrap_or_else(|| self.method.default_delta())
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        if self.budget == 0 {
            return Err(Error::InvalidConfig("budget must be at least 1".into()));
        }
        let delta = self.effective_delta();
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::InvalidConfig(format!("delta must lie in [0, 1], got {delta}")));
        }
        if let SpiMode::Sweep { lo, hi } = self.spi {
            if lo > hi {
                return Err(Error::InvalidConfig("empty SPI sweep range".into()));
            }
        }
        Ok(())
    }

    /// A short label for file names: method, exploration, hybrid period.
    pub fn label(&self) -> String {
        let mut label = self.method.to_string();
        if matches!(self.method, Method::JbrDeltaRandom | Method::JbrDeltaTargeted) {
            label.push_str(&format!("-d{}", self.effective_delta()));
        }
        if self.hybrid_k > 0 {
            label.push_str(&format!("-h{}", self.hybrid_k));
        }
        label
    }
}

/// Metrics of one PSRO iteration.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iteration: u32,
    /// Which oracle produced this iteration's policies.
    pub oracle_kind: &'static str,
    /// Exact NashConv of the meta-profile after re-solving.
    pub nashconv: f64,
    /// Per-player BR values as computed by the oracles.
    pub br_values: Vec<f64>,
    /// Total best-response episodes charged so far.
    pub cumulative_episodes: u64,
    pub wall_time_ms: f64,
}

/// Whether iteration `t` (1-based) is an independent-BR iteration under
/// hybrid period `k`.
pub fn is_ibr_iteration(t: u32, k: u32) -> bool {
    k > 0 && t % k == 0
}

/// Total episodes a full run charges: the closed form the ledger must match.
pub fn scheduled_episodes(cfg: &RunConfig, num_players: u64) -> u64 {
    let t = u64::from(cfg.iterations);
    let budget = u64::from(cfg.budget);
    match cfg.method {
        Method::Psro => num_players * t * budget,
        _ => {
            let ibr_iters = if cfg.hybrid_k > 0 { t / u64::from(cfg.hybrid_k) } else { 0 };
            (t - ibr_iters) * budget + ibr_iters * num_players * budget
        }
    }
}

/// Runs the configured PSRO loop and returns one record per iteration.
pub fn run_psro(cfg: &RunConfig) -> Result<Vec<IterationRecord>> {
    run_psro_streaming(cfg, |_| Ok(()))
}

/// As [`run_psro`], invoking `sink` after each iteration so callers can flush
/// partial results.
pub fn run_psro_streaming(
    cfg: &RunConfig,
    mut sink: impl FnMut(&IterationRecord) -> Result<()>,
) -> Result<Vec<IterationRecord>> {
    cfg.validate()?;
    let game = build_game(cfg.game)?;
    let players = game.num_players();
    let delta = cfg.effective_delta();
    let mut eg = EmpiricalGame::new(&game, EvalMode::Exact)?;
    eg.extend(&game, uniform_profile(&game))?;
    let mut meta = projected_replicator_dynamics(&eg, cfg.prd.steps, cfg.prd.dt, cfg.prd.floor)?;
    let mut cumulative = 0u64;
    let mut records = Vec::with_capacity(cfg.iterations as usize);
    for t in 1..=cfg.iterations {
        let start = Instant::now();
        let behaviors = materialize(&game, &eg, &meta)?;
        let ibr = cfg.method == Method::Psro || is_ibr_iteration(t, cfg.hybrid_k);
        let kind = if ibr { Method::Psro.kind_label() } else { cfg.method.kind_label() };
        let mut new_policies = Vec::with_capacity(players);
        let mut br_values = Vec::with_capacity(players);
        if ibr {
            for i in 0..players {
                let seed = rng::derive_seed(cfg.seed, tags::independent_br(t, i));
                let br = independent_br(&game, i, &behaviors, cfg.budget as usize, seed)?;
                cumulative += br.episodes_consumed;
                br_values.push(br.value);
                new_policies.push(br.policy);
            }
        } else {
            let data = collect_shared(cfg, &game, &behaviors, t, delta)?;
            cumulative += data.num_episodes() as u64;
            for i in 0..players {
                let (policy, value) = match cfg.method {
                    Method::JbrSpi => spi_with_mode(&data, &game, i, &behaviors, cfg.spi)?,
                    _ => {
                        let br = naive_jbr(&data, &game, i, &behaviors[i])?;
                        (br.policy, br.value)
                    }
                };
                br_values.push(value);
                new_policies.push(policy);
            }
        }
        eg.extend(&game, new_policies)?;
        meta = projected_replicator_dynamics(&eg, cfg.prd.steps, cfg.prd.dt, cfg.prd.floor)?;
        let nc = nashconv(&game, &meta, &eg)?;
        let record = IterationRecord {
            iteration: t,
            oracle_kind: kind,
            nashconv: nc,
            br_values,
            cumulative_episodes: cumulative,
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        sink(&record)?;
        records.push(record);
    }
    Ok(records)
}

/// Training-time exploration rate of the BR candidate used as the targeted
/// exploration policy: the candidate steers collection the way a tabular
/// learner executes its greedy policy mid-training.
const CANDIDATE_EXPLORATION: f64 = 0.25;

/// Collects the shared dataset of one JBR iteration, worth exactly
/// `cfg.budget` episodes.
fn collect_shared(
    cfg: &RunConfig,
    game: &MarkovGame,
    behaviors: &[BehaviorPolicy],
    t: u32,
    delta: f64,
) -> Result<JointDataset> {
    let budget = cfg.budget as usize;
    match cfg.method {
        Method::JbrDeltaTargeted if delta > 0.0 => {
            // Warmup half on-policy, then steer toward the best-response
            // candidates trained on it.
            let warmup_budget = budget / 2;
            let warmup = if warmup_budget == 0 {
                JointDataset::empty(game, behaviors)
            } else {
                let seed = rng::derive_seed(cfg.seed, tags::collect_warmup(t));
                collect_described(game, behaviors, warmup_budget, seed, 0.0, ExplorationKind::None)?
            };
            let mut preliminary = Vec::with_capacity(behaviors.len());
            for i in 0..behaviors.len() {
                let greedy = naive_jbr(&warmup, game, i, &behaviors[i])?.policy;
                preliminary.push(soften(game, &greedy, CANDIDATE_EXPLORATION));
            }
            let spec = ExplorationSpec::targeted(delta, preliminary)?;
            let steering = perturb(behaviors, &spec, game)?;
            let seed = rng::derive_seed(cfg.seed, tags::collect(t));
            let steered = collect_described(
                game,
                &steering,
                budget - warmup_budget,
                seed,
                delta,
                ExplorationKind::Targeted,
            )?;
            let descriptor = CollectionDescriptor {
                delta,
                kind: ExplorationKind::Targeted,
                ..warmup.descriptor.clone()
            };
            Ok(JointDataset::merge(game, descriptor, vec![warmup, steered]))
        }
        _ => {
            let spec = match cfg.method {
                Method::JbrDeltaRandom => ExplorationSpec::random(delta)?,
                _ => ExplorationSpec::none(),
            };
            let collection_profile = perturb(behaviors, &spec, game)?;
            let seed = rng::derive_seed(cfg.seed, tags::collect(t));
            collect_described(game, &collection_profile, budget, seed, spec.delta, spec.kind)
        }
    }
}

/// Epsilon-greedy execution of a policy: mixes each row toward the uniform
/// distribution over its legal actions.
fn soften(game: &MarkovGame, policy: &BehaviorPolicy, epsilon: f64) -> BehaviorPolicy {
    let player = policy.player();
    let infos = game.infostates(player);
    let mut out = policy.clone();
    for id in 0..infos.len() as u32 {
        if let Some(row) = policy.row(id) {
            let n = row.len() as f64;
            out.set_row(id, row.iter().map(|p| (1.0 - epsilon) * p + epsilon / n).collect());
        }
    }
    out
}

/// Materializes each player's meta-strategy mixture as a behavior policy.
fn materialize(
    game: &MarkovGame,
    eg: &EmpiricalGame,
    meta: &MetaProfile,
) -> Result<Vec<BehaviorPolicy>> {
    (0..game.num_players())
        .map(|i| {
            let atoms = eg
                .policies(i)
                .iter()
                .cloned()
                .zip(meta.weights[i].iter().copied())
                .collect();
            to_behavior(&MixedStrategy::new(i, atoms)?, game)
        })
        .collect()
}

/// Oracle-tuned SPI: sweep the threshold (or use the fixed one) and keep the
/// candidate with the best exact value against the opponents.
fn spi_with_mode(
    data: &crate::dataset::JointDataset,
    game: &MarkovGame,
    player: usize,
    behaviors: &[BehaviorPolicy],
    mode: SpiMode,
) -> Result<(BehaviorPolicy, f64)> {
    let (lo, hi) = match mode {
        SpiMode::Fixed(n) => (n, n),
        SpiMode::Sweep { lo, hi } => (lo, hi),
    };
    let mut best: Option<(BehaviorPolicy, f64)> = None;
    for n_wedge in lo..=hi {
        let cfg = SpiConfig { n_wedge, baseline: behaviors[player].clone() };
        let candidate = spi_jbr(data, game, player, &cfg)?;
        let mut profile = behaviors.to_vec();
        profile[player] = candidate.policy.clone();
        let value = expected_payoff(game, &profile)?[player];
        if best.as_ref().is_none_or(|(_, v)| value > *v) {
            best = Some((candidate.policy, value));
        }
    }
    Ok(best.expect("sweep range is nonempty"))
}

/// Exact NashConv of a meta-profile over the empirical game's policy sets:
/// each player's mixture is materialized as a behavior policy, best responses
/// are computed by exact tree search, and the payoffs by exact expectation.
pub fn nashconv(game: &MarkovGame, profile: &MetaProfile, eg: &EmpiricalGame) -> Result<f64> {
    let behaviors = materialize(game, eg, profile)?;
    let u = expected_payoff(game, &behaviors)?;
    let mut total = 0.0;
    for i in 0..game.num_players() {
        let br = exact_best_response(game, i, &behaviors)?;
        total += br.value - u[i];
    }
    debug_assert!(total > -1e-9, "NashConv must be nonnegative, got {total}");
    Ok(total)
}

/// Result of one perturbation-bound check.
#[derive(Debug, Clone)]
pub struct DeltaReport {
    pub delta: f64,
    pub trials: u32,
    /// Largest measured per-state L1 perturbation (never exceeds 2 delta).
    pub max_measured_l1: f64,
    /// Largest payoff loss of the perturbed best response.
    pub max_gap: f64,
    /// Largest `gap - R * measured_l1`; nonpositive when the bound holds.
    pub max_excess: f64,
    pub violations: u32,
}

#[derive(Debug, Clone, Default)]
pub struct PerturbationReport {
    pub per_delta: Vec<DeltaReport>,
}

impl PerturbationReport {
    pub fn violations(&self) -> u32 {
        self.per_delta.iter().map(|d| d.violations).sum()
    }
}

impl fmt::Display for PerturbationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "perturbed best-response bound: gap <= R * max-L1(sigma, sigma~)")?;
        for d in &self.per_delta {
            writeln!(
                f,
                "delta={:<5} trials={:<6} max_l1={:.6} max_gap={:.6} max_excess={:+.3e} violations={}",
                d.delta, d.trials, d.max_measured_l1, d.max_gap, d.max_excess, d.violations
            )?;
        }
        Ok(())
    }
}

/// Empirically checks the perturbed-best-response bound on random profiles:
/// for each trial, a random full-support profile is delta-random perturbed,
/// an exact best response to the perturbed profile is evaluated against the
/// original one, and the payoff gap is compared to `R * measured_L1`.
pub fn theory_check_perturbation(
    game: &MarkovGame,
    trials: u32,
    deltas: &[f64],
    seed: u64,
) -> Result<PerturbationReport> {
    let range = game.payoff_range();
    let mut report = PerturbationReport::default();
    for (di, &delta) in deltas.iter().enumerate() {
        let mut entry = DeltaReport {
            delta,
            trials,
            max_measured_l1: 0.0,
            max_gap: 0.0,
            max_excess: f64::NEG_INFINITY,
            violations: 0,
        };
        for trial in 0..trials {
            let mut rng = rng::stream(seed, ((di as u64) << 32) | u64::from(trial));
            let profile = random_profile(game, &mut rng);
            let spec = ExplorationSpec::random(delta)?;
            let perturbed = perturb(&profile, &spec, game)?;
            for player in 0..game.num_players() {
                let measured = max_l1_against(game, &profile, &perturbed, player);
                entry.max_measured_l1 = entry.max_measured_l1.max(measured);
                let ideal = exact_best_response(game, player, &profile)?.value;
                let hat = exact_best_response(game, player, &perturbed)?;
                let mut eval = profile.clone();
                eval[player] = hat.policy;
                let achieved = expected_payoff(game, &eval)?[player];
                let gap = ideal - achieved;
                let excess = gap - range * measured;
                entry.max_gap = entry.max_gap.max(gap);
                entry.max_excess = entry.max_excess.max(excess);
                if excess > 1e-9 {
                    entry.violations += 1;
                }
            }
        }
        if trials == 0 {
            entry.max_excess = 0.0;
        }
        report.per_delta.push(entry);
    }
    Ok(report)
}

/// Largest per-state L1 distance between the two profiles over the players
/// other than `player`.
fn max_l1_against(
    game: &MarkovGame,
    base: &[BehaviorPolicy],
    perturbed: &[BehaviorPolicy],
    player: usize,
) -> f64 {
    let mut max = 0.0f64;
    for (j, (a, b)) in base.iter().zip(perturbed).enumerate() {
        if j == player {
            continue;
        }
        for id in 0..game.infostates(j).len() as u32 {
            if let (Some(x), Some(y)) = (a.row(id), b.row(id)) {
                let l1: f64 = x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum();
                max = max.max(l1);
            }
        }
    }
    max
}

/// Header of the per-run metrics CSV.
pub const RUN_CSV_HEADER: &str =
    "iteration,oracle_kind,nashconv,min_nashconv_so_far,cumulative_br_episodes,br_value_p0,br_value_p1";

/// Streams iteration records into the documented CSV schema, tracking the
/// running minimum NashConv.
pub struct RunCsvWriter<W: Write> {
    out: W,
    min_so_far: f64,
}

impl<W: Write> RunCsvWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{RUN_CSV_HEADER}")?;
        Ok(RunCsvWriter { out, min_so_far: f64::INFINITY })
    }

    pub fn write(&mut self, record: &IterationRecord) -> Result<()> {
        self.min_so_far = self.min_so_far.min(record.nashconv);
        write!(
            self.out,
            "{},{},{},{},{}",
            record.iteration,
            record.oracle_kind,
            record.nashconv,
            self.min_so_far,
            record.cumulative_episodes
        )?;
        for v in &record.br_values {
            write!(self.out, ",{v}")?;
        }
        writeln!(self.out)?;
        self.out.flush()?;
        Ok(())
    }

    pub fn min_nashconv(&self) -> f64 {
        self.min_so_far
    }
}

/// Writes the full metrics CSV for a finished run.
pub fn write_run_csv(path: &Path, records: &[IterationRecord]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut writer = RunCsvWriter::new(std::io::BufWriter::new(file))?;
    for r in records {
        writer.write(r)?;
    }
    Ok(())
}

/// Writes the run-metadata JSON next to the metrics: full configuration,
/// library version, and the PRD readout rule.
pub fn write_run_metadata(path: &Path, cfg: &RunConfig) -> Result<()> {
    let doc = serde_json::json!({
        "config": cfg,
        "library_version": env!("CARGO_PKG_VERSION"),
        "prd_readout": "full trajectory average",
    });
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), &doc)
        .map_err(|e| Error::MalformedData(format!("metadata write failed: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests;
