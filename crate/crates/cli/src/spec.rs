//! Experiment specs: a flat `key = value` text format plus command-line
//! overrides, expanded into a cartesian grid of run configurations
//! (methods x deltas x seeds).
//!
//! Method tokens may carry inline modifiers: `jbr-dt:d0.5:h10` is
//! delta-targeted JBR with delta 0.5 and a hybrid independent-BR update every
//! 10 iterations. A `deltas` list expands every delta-using method over the
//! grid; methods without exploration ignore it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use psro_core::psro::{Method, PrdParams, RunConfig, SpiMode};
use psro_core::GameId;

/// One method token from a spec or the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub method: Method,
    pub delta: Option<f64>,
    pub hybrid_k: Option<u32>,
}

impl std::str::FromStr for MethodSpec {
    type Err = anyhow::Error;

    fn from_str(token: &str) -> Result<Self> {
        let mut parts = token.split(':');
        let method: Method = parts
            .next()
            .unwrap()
            .parse()
            .map_err(|e| anyhow!("{e}"))?;
        let mut spec = MethodSpec { method, delta: None, hybrid_k: None };
        for part in parts {
            if let Some(d) = part.strip_prefix('d') {
                spec.delta = Some(d.parse().with_context(|| format!("bad delta in `{token}`"))?);
            } else if let Some(k) = part.strip_prefix('h') {
                spec.hybrid_k =
                    Some(k.parse().with_context(|| format!("bad hybrid period in `{token}`"))?);
            } else {
                bail!("unknown method modifier `{part}` in `{token}`");
            }
        }
        Ok(spec)
    }
}

/// A fully resolved experiment: the grid of runs plus execution knobs.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub game: GameId,
    pub methods: Vec<MethodSpec>,
    pub seeds: Vec<u64>,
    pub deltas: Vec<f64>,
    pub iterations: u32,
    pub budget: u32,
    pub hybrid_k: u32,
    pub spi: SpiMode,
    pub prd: PrdParams,
    pub out: Option<PathBuf>,
    pub jobs: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            game: GameId::Kuhn,
            methods: Vec::new(),
            seeds: vec![0],
            deltas: Vec::new(),
            iterations: 100,
            budget: 10_000,
            hybrid_k: 0,
            spi: SpiMode::default(),
            prd: PrdParams::default(),
            out: None,
            jobs: 1,
        }
    }
}

impl ExperimentSpec {
    /// Parses the flat key-value format. Unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = ExperimentSpec::default();
        let mut pairs = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", lineno + 1))?;
            pairs.insert(key.trim().to_string(), value.trim().to_string());
        }
        for (key, value) in pairs {
            spec.apply(&key, &value)?;
        }
        if spec.methods.is_empty() {
            bail!("spec must list at least one method");
        }
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading spec `{}`", path.display()))?;
        Self::parse(&text)
    }

    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "game" => self.game = value.parse().map_err(|e| anyhow!("{e}"))?,
            "methods" | "method" => {
                self.methods = split_list(value)
                    .map(str::parse)
                    .collect::<Result<_>>()?;
            }
            "seeds" => {
                self.seeds = split_list(value)
                    .map(|s| s.parse().with_context(|| format!("bad seed `{s}`")))
                    .collect::<Result<_>>()?;
            }
            "deltas" | "delta" => {
                self.deltas = split_list(value)
                    .map(|s| s.parse().with_context(|| format!("bad delta `{s}`")))
                    .collect::<Result<_>>()?;
            }
            "iterations" => self.iterations = value.parse().context("bad iterations")?,
            "budget" => self.budget = value.parse().context("bad budget")?,
            "hybrid_k" => self.hybrid_k = value.parse().context("bad hybrid_k")?,
            "spi" => self.spi = parse_spi(value)?,
            "prd_steps" => self.prd.steps = value.parse().context("bad prd_steps")?,
            "prd_dt" => self.prd.dt = value.parse().context("bad prd_dt")?,
            "prd_floor" => self.prd.floor = value.parse().context("bad prd_floor")?,
            "out" => self.out = Some(PathBuf::from(value)),
            "jobs" => self.jobs = value.parse().context("bad jobs")?,
            other => bail!("unknown spec key `{other}`"),
        }
        Ok(())
    }

    /// Expands the grid into concrete run configurations.
    pub fn expand(&self) -> Result<Vec<RunConfig>> {
        if self.seeds.is_empty() {
            bail!("spec must list at least one seed");
        }
        let mut runs = Vec::new();
        for method in &self.methods {
            let uses_delta = matches!(
                method.method,
                Method::JbrDeltaRandom | Method::JbrDeltaTargeted
            );
            let deltas: Vec<Option<f64>> = match (uses_delta, method.delta) {
                (false, _) => vec![None],
                (true, Some(d)) => vec![Some(d)],
                (true, None) if !self.deltas.is_empty() => {
                    self.deltas.iter().copied().map(Some).collect()
                }
                (true, None) => vec![None],
            };
            for delta in deltas {
                for &seed in &self.seeds {
                    let cfg = RunConfig {
                        game: self.game,
                        method: method.method,
                        iterations: self.iterations,
                        budget: self.budget,
                        delta,
                        spi: self.spi,
                        hybrid_k: method.hybrid_k.unwrap_or(self.hybrid_k),
                        seed,
                        prd: self.prd,
                    };
                    cfg.validate().map_err(|e| anyhow!("{e}"))?;
                    runs.push(cfg);
                }
            }
        }
        Ok(runs)
    }
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_spi(value: &str) -> Result<SpiMode> {
    if let Some(n) = value.strip_prefix("fixed:") {
        return Ok(SpiMode::Fixed(n.parse().context("bad fixed SPI threshold")?));
    }
    if let Some(range) = value.strip_prefix("sweep:") {
        let (lo, hi) = range
            .split_once(':')
            .ok_or_else(|| anyhow!("expected sweep:<lo>:<hi>"))?;
        return Ok(SpiMode::Sweep { lo: lo.parse()?, hi: hi.parse()? });
    }
    bail!("spi must be `fixed:<n>` or `sweep:<lo>:<hi>`, got `{value}`")
}

/// File stem for one run's outputs.
pub fn run_stem(cfg: &RunConfig) -> String {
    format!("{}-{}-s{}", cfg.game, cfg.label(), cfg.seed)
}
