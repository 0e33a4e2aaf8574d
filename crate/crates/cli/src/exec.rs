//! Run execution, summary aggregation, and CSV schema validation.
//!
//! Each run writes `<stem>.csv` (streamed, flushed per iteration so partial
//! results survive failures) and `<stem>.meta.json` (the full configuration).
//! The summary is recomputed purely from those files, so it can be rebuilt
//! offline from a results directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use psro_core::psro::{run_psro_streaming, write_run_metadata, RunConfig, RunCsvWriter, RUN_CSV_HEADER};
use rayon::prelude::*;

use crate::spec::run_stem;

/// Outcome of one executed run.
#[derive(Debug)]
pub struct RunOutcome {
    pub cfg: RunConfig,
    pub stem: String,
    pub min_nashconv: f64,
    pub total_episodes: u64,
    pub error: Option<String>,
}

/// Executes all runs on a pool of `jobs` workers. Failures do not abort the
/// batch; they are reported in the outcomes.
pub fn execute_all(runs: &[RunConfig], out_dir: &Path, jobs: usize) -> Result<Vec<RunOutcome>> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory `{}`", out_dir.display()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("building worker pool")?;
    let outcomes: Vec<RunOutcome> =
        pool.install(|| runs.par_iter().map(|cfg| execute_one(cfg, out_dir)).collect());
    Ok(outcomes)
}

fn execute_one(cfg: &RunConfig, out_dir: &Path) -> RunOutcome {
    let stem = run_stem(cfg);
    let mut outcome = RunOutcome {
        cfg: cfg.clone(),
        stem: stem.clone(),
        min_nashconv: f64::INFINITY,
        total_episodes: 0,
        error: None,
    };
    let result = (|| -> psro_core::Result<()> {
        write_run_metadata(&out_dir.join(format!("{stem}.meta.json")), cfg)?;
        let file = fs::File::create(out_dir.join(format!("{stem}.csv")))?;
        let mut writer = RunCsvWriter::new(std::io::BufWriter::new(file))?;
        run_psro_streaming(cfg, |record| {
            outcome.total_episodes = record.cumulative_episodes;
            writer.write(record)
        })?;
        outcome.min_nashconv = writer.min_nashconv();
        Ok(())
    })();
    if let Err(e) = result {
        outcome.error = Some(e.to_string());
    }
    outcome
}

/// One row of the aggregate summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub game: String,
    pub method: String,
    pub runs: usize,
    pub median_min_nashconv: f64,
    pub total_episodes_per_run: u64,
}

pub const SUMMARY_HEADER: &str = "game,method,runs,median_min_nashconv,total_br_episodes_per_run";
pub const SWEEP_HEADER: &str = "delta,kind,median_min_nashconv";

/// Rebuilds the summary purely from the per-run CSVs (plus their metadata
/// side-cars) found in `dir`.
pub fn summarize_dir(dir: &Path) -> Result<Vec<SummaryRow>> {
    let mut grouped: std::collections::BTreeMap<(String, String), (Vec<f64>, u64)> =
        std::collections::BTreeMap::new();
    for path in csv_files(dir)? {
        let text = fs::read_to_string(&path)?;
        if text.lines().next() != Some(RUN_CSV_HEADER) {
            continue;
        }
        let meta_path = path.with_extension("meta.json");
        let meta: serde_json::Value = serde_json::from_str(
            &fs::read_to_string(&meta_path)
                .with_context(|| format!("run `{}` has no metadata side-car", path.display()))?,
        )?;
        let cfg: RunConfig = serde_json::from_value(meta["config"].clone())
            .with_context(|| format!("bad config in `{}`", meta_path.display()))?;
        let (min_nc, total) = read_run_tail(&text)
            .with_context(|| format!("reading metrics from `{}`", path.display()))?;
        let entry = grouped
            .entry((cfg.game.to_string(), cfg.label()))
            .or_insert_with(|| (Vec::new(), total));
        entry.0.push(min_nc);
        entry.1 = total;
    }
    Ok(grouped
        .into_iter()
        .map(|((game, method), (mut mins, total))| {
            mins.sort_by(f64::total_cmp);
            SummaryRow {
                game,
                method,
                runs: mins.len(),
                median_min_nashconv: mins[mins.len() / 2],
                total_episodes_per_run: total,
            }
        })
        .collect())
}

/// Final `min_nashconv_so_far` and `cumulative_br_episodes` of a run CSV.
fn read_run_tail(text: &str) -> Result<(f64, u64)> {
    let last = text
        .lines()
        .last()
        .filter(|l| *l != RUN_CSV_HEADER)
        .ok_or_else(|| anyhow!("run CSV has no data rows"))?;
    let cols: Vec<&str> = last.split(',').collect();
    if cols.len() < 5 {
        bail!("run CSV row has too few columns");
    }
    Ok((cols[3].parse()?, cols[4].parse()?))
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut text = format!("{SUMMARY_HEADER}\n");
    for row in rows {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            row.game, row.method, row.runs, row.median_min_nashconv, row.total_episodes_per_run
        ));
    }
    fs::write(path, text)?;
    Ok(())
}

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading `{}`", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

/// Validates every CSV in `dir` against the documented schemas. Returns the
/// number of validated files; any violation is an error.
pub fn schema_check_dir(dir: &Path) -> Result<usize> {
    let files = csv_files(dir)?;
    if files.is_empty() {
        bail!("no CSV files in `{}`", dir.display());
    }
    for path in &files {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        let check = match header {
            RUN_CSV_HEADER => check_run_rows(lines),
            SUMMARY_HEADER => check_column_counts(lines, 5),
            SWEEP_HEADER => check_column_counts(lines, 3),
            other => Err(anyhow!("unknown CSV schema (header `{other}`)")),
        };
        check.with_context(|| format!("schema violation in `{}`", path.display()))?;
    }
    Ok(files.len())
}

fn check_run_rows<'a>(lines: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut expected_iteration = 1u32;
    let mut min_so_far = f64::INFINITY;
    let mut last_cumulative = 0u64;
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 {
            bail!("expected 7 columns, got {}", cols.len());
        }
        let iteration: u32 = cols[0].parse().context("iteration")?;
        if iteration != expected_iteration {
            bail!("iteration {iteration} out of order");
        }
        expected_iteration += 1;
        if !matches!(cols[1], "ibr" | "jbr-naive" | "jbr-spi" | "jbr-dr" | "jbr-dt") {
            bail!("unknown oracle kind `{}`", cols[1]);
        }
        let nashconv: f64 = cols[2].parse().context("nashconv")?;
        if nashconv < -1e-9 {
            bail!("negative nashconv {nashconv}");
        }
        let written_min: f64 = cols[3].parse().context("min_nashconv_so_far")?;
        min_so_far = min_so_far.min(nashconv);
        if written_min != min_so_far {
            bail!("min_nashconv_so_far {written_min} disagrees with recomputation {min_so_far}");
        }
        let cumulative: u64 = cols[4].parse().context("cumulative_br_episodes")?;
        if cumulative < last_cumulative {
            bail!("cumulative episodes decreased");
        }
        last_cumulative = cumulative;
        for col in &cols[5..] {
            col.parse::<f64>().context("br_value")?;
        }
    }
    Ok(())
}

fn check_column_counts<'a>(lines: impl Iterator<Item = &'a str>, expected: usize) -> Result<()> {
    for line in lines {
        let n = line.split(',').count();
        if n != expected {
            bail!("expected {expected} columns, got {n}");
        }
    }
    Ok(())
}
