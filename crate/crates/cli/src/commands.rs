//! The `train`, `sweep`, `bench` and `stats` commands.

use std::path::{Path, PathBuf};
use std::process::Command;

use corerl_core::analytics::report::{build_report, load_runs, write_report, LoadedRun, Report};
use corerl_core::benchmark::BenchmarkFn;
use corerl_core::ppo::{HyperParams, RunStatus};
use corerl_core::Error;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{
    apply_override, BenchmarkConfig, EnvironmentConfig, RunConfig, SCHEMA_VERSION,
};
use crate::rundir::{
    finished_record, run_seed, seed_dir, write_atomic, write_manifest, CONFIG_FILE, REPORT_DIR,
};
use crate::CliError;

fn write_config(dir: &Path, config: &RunConfig) -> Result<(), CliError> {
    write_atomic(&dir.join(CONFIG_FILE), config.snapshot().as_bytes())?;
    Ok(())
}

/// Builds and writes a report; failed runs are left out with a warning.
fn report_from(runs: &[LoadedRun], generations: usize, out: &Path) -> Result<Report, CliError> {
    let mut excluded = Vec::new();
    let usable: Vec<LoadedRun> = runs
        .iter()
        .filter(|r| {
            let failed =
                matches!(r.record.status, RunStatus::Failed { .. }) || r.record.episodes.is_empty();
            if failed {
                excluded.push(format!(
                    "{} seed {}: failed run excluded from the report",
                    r.treatment, r.seed
                ));
            }
            !failed
        })
        .cloned()
        .collect();
    if usable.is_empty() {
        return Err(CliError::new(
            crate::EXIT_OTHER,
            "no successful runs to report",
        ));
    }
    let mut report = build_report(&usable, generations)?;
    report.warnings.splice(0..0, excluded);
    for w in &report.warnings {
        log::warn!("{w}");
    }
    for n in &report.stats.notices {
        log::info!("{n}");
    }
    write_report(&report, out)?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct TrainArgs {
    pub config: PathBuf,
    /// Overrides the config's seed list with a single seed.
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub max_seconds: Option<f64>,
}

/// One training run per seed, persisted under `out`, followed by a report.
pub fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        config.seeds = vec![s];
    }
    if args.max_seconds.is_some() {
        config.max_seconds = args.max_seconds;
    }
    config.validate()?;
    write_config(&args.out, &config)?;
    write_manifest(&args.out, "train")?;
    let mut runs = Vec::new();
    for &seed in &config.seeds {
        let dir = seed_dir(&args.out, seed);
        let record = run_seed(&config, seed, &dir)?;
        log::info!("seed {seed}: best objective {:.6}", record.best.objective);
        runs.push(LoadedRun {
            treatment: config.name.clone(),
            seed,
            path: dir,
            record,
        });
    }
    report_from(&runs, config.generations, &args.out.join(REPORT_DIR))?;
    Ok(())
}

/// One (treatment, seed) training run of a sweep or benchmark suite.
#[derive(Debug, Clone, Serialize)]
pub struct Cell {
    pub treatment: String,
    pub seed: u64,
    #[serde(skip)]
    pub config: RunConfig,
    /// Directory holding the treatment's config and seed directories.
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Default)]
pub struct ExecOptions {
    /// Concurrent cells; above 1 each cell runs in a child process of `exe`.
    pub jobs: usize,
    pub exe: Option<PathBuf>,
}

#[derive(Debug, Default)]
pub struct GridOutcome {
    pub ran: usize,
    pub skipped: usize,
    pub failed: Vec<(String, u64, CliError)>,
}

/// Runs every unfinished cell. A failing cell only affects its own directory.
pub fn run_cells(cells: &[Cell], exec: &ExecOptions) -> Result<GridOutcome, CliError> {
    let mut outcome = GridOutcome::default();
    let mut todo = Vec::new();
    for c in cells {
        if finished_record(&seed_dir(&c.dir, c.seed)).is_some() {
            log::info!(
                "{} seed {}: already complete, skipping",
                c.treatment,
                c.seed
            );
            outcome.skipped += 1;
        } else {
            todo.push(c);
        }
    }
    let mut written = std::collections::BTreeSet::new();
    for c in &todo {
        if written.insert(c.dir.clone()) {
            write_config(&c.dir, &c.config)?;
        }
    }
    let run_one = |c: &Cell| -> Result<(), CliError> {
        match (&exec.exe, exec.jobs > 1) {
            (Some(exe), true) => {
                let status = Command::new(exe)
                    .arg("cell")
                    .arg("--config")
                    .arg(c.dir.join(CONFIG_FILE))
                    .arg("--seed")
                    .arg(c.seed.to_string())
                    .arg("--out")
                    .arg(&c.dir)
                    .status()
                    .map_err(|e| CliError::from(Error::io(exe, e)))?;
                match status.code() {
                    Some(0) => Ok(()),
                    code => Err(CliError::new(
                        code.unwrap_or(1),
                        format!("cell exited with {status}"),
                    )),
                }
            }
            _ => run_seed(&c.config, c.seed, &seed_dir(&c.dir, c.seed))
                .map(|_| ())
                .map_err(CliError::from),
        }
    };
    let results: Vec<Result<(), CliError>> = if exec.jobs > 1 && exec.exe.is_some() {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(exec.jobs)
            .build()
            .map_err(|e| CliError::new(1, e.to_string()))?;
        pool.install(|| todo.par_iter().map(|c| run_one(c)).collect())
    } else {
        todo.iter().map(|c| run_one(c)).collect()
    };
    for (c, r) in todo.iter().zip(results) {
        match r {
            Ok(()) => outcome.ran += 1,
            Err(e) => {
                log::error!("{} seed {}: {e}", c.treatment, c.seed);
                outcome.failed.push((c.treatment.clone(), c.seed, e));
            }
        }
    }
    Ok(outcome)
}

fn finish_grid(outcome: GridOutcome) -> Result<(), CliError> {
    log::info!(
        "{} cells run, {} skipped, {} failed",
        outcome.ran,
        outcome.skipped,
        outcome.failed.len()
    );
    match outcome.failed.into_iter().next() {
        None => Ok(()),
        Some((t, s, e)) => Err(CliError::new(
            e.code,
            format!("cell {t} seed {s} failed: {}", e.message),
        )),
    }
}

/// `N` means seeds `0..N`; a comma-separated list is taken literally.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, CliError> {
    let bad = |_| CliError::usage(format!("invalid seed list {text:?}"));
    let seeds: Vec<u64> = if text.contains(',') {
        text.split(',')
            .map(|s| s.trim().parse().map_err(bad))
            .collect::<Result<_, _>>()?
    } else {
        (0..text.trim().parse().map_err(bad)?).collect()
    };
    if seeds.is_empty() {
        return Err(CliError::usage("seed list is empty"));
    }
    Ok(seeds)
}

/// Parses a sweep value: JSON when it parses as JSON, a string otherwise.
pub fn parse_value(text: &str) -> serde_json::Value {
    let t = text.trim();
    serde_json::from_str(t).unwrap_or_else(|_| serde_json::Value::String(t.to_string()))
}

fn dir_component(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "._-=+".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SweepArgs {
    pub config: PathBuf,
    pub param: String,
    pub values: Vec<String>,
    /// Seeds from the config when absent.
    pub seeds: Option<Vec<u64>>,
    pub out: PathBuf,
    pub exec: ExecOptions,
}

pub fn sweep_cells(args: &SweepArgs) -> Result<Vec<Cell>, CliError> {
    let base = RunConfig::load(&args.config)?;
    if args.values.is_empty() {
        return Err(CliError::usage("--values is empty"));
    }
    let seeds = args.seeds.clone().unwrap_or_else(|| base.seeds.clone());
    let mut cells = Vec::new();
    for v in &args.values {
        let treatment = dir_component(&format!("{}={}", args.param, v.trim()));
        let mut config = apply_override(&base, &args.param, &parse_value(v))?;
        config.name = treatment.clone();
        config.seeds = seeds.clone();
        config.validate()?;
        let dir = args.out.join(&treatment);
        cells.extend(seeds.iter().map(|&seed| Cell {
            treatment: treatment.clone(),
            seed,
            config: config.clone(),
            dir: dir.clone(),
        }));
    }
    Ok(cells)
}

/// Full values × seeds grid, resumable, followed by a cross-treatment report.
pub fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let cells = sweep_cells(args)?;
    write_manifest(&args.out, "sweep")?;
    let outcome = run_cells(&cells, &args.exec)?;
    let generations = cells[0].config.generations;
    let (runs, warnings) = load_runs(&args.out)?;
    for w in warnings {
        log::warn!("{w}");
    }
    let report = report_from(&runs, generations, &args.out.join(REPORT_DIR));
    finish_grid(outcome)?;
    report.map(|_| ())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Nf,
    Nsteps,
    Entcoef,
}

impl Suite {
    pub fn param(self) -> &'static str {
        match self {
            Suite::Nf => "nf",
            Suite::Nsteps => "n_steps",
            Suite::Entcoef => "ent_coef",
        }
    }

    pub fn values(self) -> Vec<serde_json::Value> {
        use serde_json::json;
        match self {
            Suite::Nf => vec![json!(1), json!(25), json!(100)],
            Suite::Nsteps => vec![json!(1), json!(2), json!(4), json!(8), json!(16)],
            Suite::Entcoef => vec![json!(0.1), json!(0.01), json!(0.001), json!(0.0001)],
        }
    }

    pub fn nx(self) -> usize {
        match self {
            Suite::Entcoef => 10,
            _ => 2,
        }
    }

    pub fn samples(self) -> u64 {
        match self {
            Suite::Entcoef => 20_000,
            _ => 10_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchArgs {
    pub suite: Suite,
    pub out: PathBuf,
    pub seeds: Vec<u64>,
    /// Sample budget; the suite's own when absent.
    pub samples: Option<u64>,
    pub functions: Vec<BenchmarkFn>,
    pub dry_run: bool,
    pub exec: ExecOptions,
}

impl BenchArgs {
    pub fn new(suite: Suite, out: PathBuf) -> Self {
        Self {
            suite,
            out,
            seeds: (0..20).collect(),
            samples: None,
            functions: BenchmarkFn::ALL.to_vec(),
            dry_run: false,
            exec: ExecOptions::default(),
        }
    }
}

pub fn bench_cells(args: &BenchArgs) -> Result<Vec<Cell>, CliError> {
    let mut cells = Vec::new();
    for &f in &args.functions {
        let base = RunConfig {
            schema_version: SCHEMA_VERSION,
            name: f.name().into(),
            environment: EnvironmentConfig::Benchmark(BenchmarkConfig {
                function: f,
                nx: args.suite.nx(),
                bound: None,
                instance_seed: None,
                shift_file: None,
                rotation_file: None,
            }),
            algorithm: Default::default(),
            hyperparams: HyperParams {
                ncores: 8,
                total_samples: args.samples.unwrap_or(args.suite.samples()),
                ..HyperParams::default()
            },
            seeds: args.seeds.clone(),
            generations: corerl_core::analytics::metrics::DEFAULT_GENERATIONS,
            max_seconds: None,
        };
        for v in args.suite.values() {
            let treatment = format!("{}={}", args.suite.param(), v);
            let mut config = apply_override(&base, args.suite.param(), &v)?;
            config.name = treatment.clone();
            config.validate()?;
            let dir = args.out.join(f.name()).join(&treatment);
            cells.extend(args.seeds.iter().map(|&seed| Cell {
                treatment: treatment.clone(),
                seed,
                config: config.clone(),
                dir: dir.clone(),
            }));
        }
    }
    Ok(cells)
}

/// Runs a benchmark suite: one treatment per grid value, one report per function.
pub fn cmd_bench(args: &BenchArgs) -> Result<(), CliError> {
    let cells = bench_cells(args)?;
    if args.dry_run {
        println!("function\ttreatment\tseed\tsamples\tdir");
        for c in &cells {
            let EnvironmentConfig::Benchmark(b) = &c.config.environment else {
                unreachable!()
            };
            println!(
                "{}\t{}\t{}\t{}\t{}",
                b.function.name(),
                c.treatment,
                c.seed,
                c.config.hyperparams.total_samples,
                seed_dir(&c.dir, c.seed).display()
            );
        }
        println!("{} runs", cells.len());
        return Ok(());
    }
    write_manifest(&args.out, "bench")?;
    let outcome = run_cells(&cells, &args.exec)?;
    for &f in &args.functions {
        let dir = args.out.join(f.name());
        let (runs, warnings) = load_runs(&dir)?;
        for w in warnings {
            log::warn!("{w}");
        }
        if let Err(e) = report_from(&runs, cells[0].config.generations, &dir.join(REPORT_DIR)) {
            log::error!("{}: {e}", f.name());
        }
    }
    finish_grid(outcome)
}

#[derive(Debug, Clone)]
pub struct StatsArgs {
    pub runs: Vec<PathBuf>,
    pub out: PathBuf,
    pub generations: usize,
}

pub fn cmd_stats(args: &StatsArgs) -> Result<Report, CliError> {
    if args.runs.is_empty() {
        return Err(CliError::usage("no run directories given"));
    }
    let mut runs = Vec::new();
    for dir in &args.runs {
        if !dir.is_dir() {
            return Err(CliError::usage(format!(
                "{} is not a directory",
                dir.display()
            )));
        }
        let (mut r, warnings) = load_runs(dir)?;
        for w in warnings {
            log::warn!("{w}");
        }
        runs.append(&mut r);
    }
    if runs.is_empty() {
        return Err(CliError::usage("no run records found"));
    }
    let report = report_from(&runs, args.generations, &args.out)?;
    for row in &report.summary {
        println!(
            "{:<24} runs {:>3}  avg max {:>12.6}  best {:>12.6}  improvement {:>8.4}  se {:.4} ± {:.4}",
            row.treatment,
            row.runs,
            row.avg_max_objective,
            row.best_max_objective,
            row.improvement_ratio,
            row.se_mean,
            row.se_std
        );
    }
    for t in &report.stats.tests {
        println!(
            "{}: Friedman statistic {:.4}, p = {:.4e}{}",
            t.measure,
            t.result.statistic,
            t.result.p_value,
            if t.significant { " (significant)" } else { "" }
        );
    }
    for n in &report.stats.notices {
        println!("{n}");
    }
    Ok(report)
}
