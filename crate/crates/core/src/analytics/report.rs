//! Summary tables and statistical comparisons over a set of finished runs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::{
    bin_generations, improvement_ratio, mean_std, sample_efficiency, GenerationSeries,
};
use super::stats::{friedman_nemenyi, StatTestResult};
use crate::error::{Error, Result};
use crate::ppo::train::RunRecord;

pub const RUN_RECORD_FILE: &str = "run_record.json";

/// Significance level for flagging differences.
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub treatment: String,
    pub seed: u64,
    pub path: PathBuf,
    pub record: RunRecord,
}

fn collect_records(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_records(&p, out)?;
        } else if p.file_name().is_some_and(|n| n == RUN_RECORD_FILE) {
            out.push(p);
        }
    }
    Ok(())
}

fn seed_from_dir(p: &Path) -> Option<u64> {
    p.file_name()?.to_str()?.strip_prefix("seed-")?.parse().ok()
}

/// Finds every run record under `root`. The treatment label is the record's
/// directory path relative to `root` with any trailing `seed-N` removed
/// (the root's own name when nothing is left). Unreadable records are skipped
/// and reported in the returned warnings.
pub fn load_runs(root: &Path) -> Result<(Vec<LoadedRun>, Vec<String>)> {
    let mut paths = Vec::new();
    collect_records(root, &mut paths)?;
    let root_name = root
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    let mut runs = Vec::new();
    let mut warnings = Vec::new();
    for path in paths {
        let dir = path.parent().expect("file has a parent");
        let record: RunRecord = match std::fs::read_to_string(&path)
            .map_err(|e| e.to_string())
            .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
        {
            Ok(r) => r,
            Err(e) => {
                warnings.push(format!("skipping {}: {e}", path.display()));
                continue;
            }
        };
        let (group_dir, seed) = match seed_from_dir(dir) {
            Some(s) => (dir.parent().unwrap_or(dir), s),
            None => (dir, record.hyperparams.seed),
        };
        let rel = group_dir.strip_prefix(root).unwrap_or(group_dir);
        let treatment = if rel.as_os_str().is_empty() {
            root_name.clone()
        } else {
            rel.components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join("/")
        };
        runs.push(LoadedRun {
            treatment,
            seed,
            path,
            record,
        });
    }
    Ok((runs, warnings))
}

/// One treatment row: statistics of the per-run best objective plus IR and SE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub treatment: String,
    pub runs: usize,
    pub avg_max_objective: f64,
    pub best_max_objective: f64,
    pub std_max_objective: f64,
    pub improvement_ratio: f64,
    pub se_mean: f64,
    pub se_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureTest {
    pub measure: String,
    pub treatments: Vec<String>,
    pub seeds: Vec<u64>,
    #[serde(flatten)]
    pub result: StatTestResult,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub alpha: f64,
    pub generations: usize,
    pub tests: Vec<MeasureTest>,
    pub notices: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub generations: usize,
    pub summary: Vec<SummaryRow>,
    pub stats: StatsReport,
    /// (treatment, seed, series) in treatment then seed order.
    #[serde(skip)]
    pub series: Vec<(String, u64, GenerationSeries)>,
    pub warnings: Vec<String>,
}

/// Builds the report. Generation counts shrink to what the shortest run supports.
pub fn build_report(runs: &[LoadedRun], n_gen: usize) -> Result<Report> {
    if runs.is_empty() {
        return Err(Error::Contract("no completed runs to report on".into()));
    }
    let mut warnings = Vec::new();
    let shortest = runs
        .iter()
        .map(|r| r.record.episodes.len())
        .min()
        .unwrap_or(0);
    if shortest == 0 {
        return Err(Error::Contract("a run has no finished episodes".into()));
    }
    let n_gen = if shortest < n_gen {
        warnings.push(format!(
            "shortest run has {shortest} episodes; using {shortest} generations instead of {n_gen}"
        ));
        shortest
    } else {
        n_gen
    };

    let mut by_treatment: BTreeMap<&str, Vec<&LoadedRun>> = BTreeMap::new();
    for r in runs {
        by_treatment.entry(&r.treatment).or_default().push(r);
    }
    for v in by_treatment.values_mut() {
        v.sort_by_key(|r| r.seed);
    }

    let mut summary = Vec::new();
    let mut series = Vec::new();
    let mut measures: BTreeMap<&str, BTreeMap<u64, (f64, f64)>> = BTreeMap::new();
    for (t, rs) in &by_treatment {
        let records: Vec<&RunRecord> = rs.iter().map(|r| &r.record).collect();
        let best: Vec<f64> = records.iter().map(|r| r.best.objective).collect();
        let (avg, std) = mean_std(&best);
        let ir = records.iter().map(|r| improvement_ratio(r)).sum::<f64>() / records.len() as f64;
        let (se_mean, se_std) = sample_efficiency(&records, n_gen)?;
        summary.push(SummaryRow {
            treatment: t.to_string(),
            runs: rs.len(),
            avg_max_objective: avg,
            best_max_objective: best.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            std_max_objective: std,
            improvement_ratio: ir,
            se_mean,
            se_std,
        });
        let per_seed = measures.entry(t).or_default();
        for r in rs {
            let s = bin_generations(&r.record.episodes, n_gen)?;
            let best_mean = s.mean.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if per_seed
                .insert(r.seed, (r.record.best.objective, best_mean))
                .is_some()
            {
                warnings.push(format!(
                    "treatment {t} has seed {} more than once; keeping the last",
                    r.seed
                ));
            }
            series.push((t.to_string(), r.seed, s));
        }
    }

    let stats = compare(&measures, n_gen);
    Ok(Report {
        generations: n_gen,
        summary,
        stats,
        series,
        warnings,
    })
}

fn compare(measures: &BTreeMap<&str, BTreeMap<u64, (f64, f64)>>, n_gen: usize) -> StatsReport {
    let mut report = StatsReport {
        alpha: ALPHA,
        generations: n_gen,
        tests: Vec::new(),
        notices: Vec::new(),
    };
    let treatments: Vec<String> = measures.keys().map(|s| s.to_string()).collect();
    if treatments.len() < 3 {
        report.notices.push(format!(
            "{} treatment(s): rank tests need at least 3, skipped",
            treatments.len()
        ));
        return report;
    }
    // Only seeds present for every treatment form complete blocks.
    let mut seeds: BTreeSet<u64> = measures
        .values()
        .next()
        .map(|m| m.keys().copied().collect())
        .unwrap_or_default();
    for m in measures.values() {
        seeds.retain(|s| m.contains_key(s));
    }
    let all: BTreeSet<u64> = measures.values().flat_map(|m| m.keys().copied()).collect();
    if seeds.len() < all.len() {
        report.notices.push(format!(
            "{} seed(s) missing from some treatment were left out",
            all.len() - seeds.len()
        ));
    }
    if seeds.len() < 2 {
        report
            .notices
            .push("fewer than 2 complete seeds, rank tests skipped".into());
        return report;
    }
    let seeds: Vec<u64> = seeds.into_iter().collect();
    for (name, pick) in [("max_objective", 0usize), ("max_mean_objective", 1)] {
        let matrix: Vec<Vec<f64>> = seeds
            .iter()
            .map(|s| {
                measures
                    .values()
                    .map(|m| if pick == 0 { m[s].0 } else { m[s].1 })
                    .collect()
            })
            .collect();
        match friedman_nemenyi(&matrix) {
            Ok(result) => report.tests.push(MeasureTest {
                measure: name.into(),
                treatments: treatments.clone(),
                seeds: seeds.clone(),
                significant: !result.degenerate && result.p_value < ALPHA,
                result,
            }),
            Err(e) => report.notices.push(format!("{name}: {e}")),
        }
    }
    report
}

fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

/// Per-generation table of one run.
pub fn generations_csv(series: &GenerationSeries) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "generation",
        "samples",
        "episodes",
        "mean_objective",
        "max_objective",
    ])
    .map_err(csv_err)?;
    for g in 0..series.len() {
        w.write_record([
            (g + 1).to_string(),
            series.samples[g].to_string(),
            series.episodes[g].to_string(),
            fmt(series.mean[g]),
            fmt(series.max_so_far[g]),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Numeric(format!("csv: {e}"))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Numeric(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// All runs' generation tables in one file.
pub fn combined_generations_csv(report: &Report) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "treatment",
        "seed",
        "generation",
        "samples",
        "episodes",
        "mean_objective",
        "max_objective",
    ])
    .map_err(csv_err)?;
    for (t, seed, s) in &report.series {
        for g in 0..s.len() {
            w.write_record([
                t.clone(),
                seed.to_string(),
                (g + 1).to_string(),
                s.samples[g].to_string(),
                s.episodes[g].to_string(),
                fmt(s.mean[g]),
                fmt(s.max_so_far[g]),
            ])
            .map_err(csv_err)?;
        }
    }
    finish(w)
}

/// Writes `generations.csv`, `summary.json` and `stats.json` into `out`.
pub fn write_report(report: &Report, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let write = |name: &str, text: String| {
        let p = out.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    write("generations.csv", combined_generations_csv(report)?)?;
    #[derive(Serialize)]
    struct Summary<'a> {
        generations: usize,
        treatments: &'a [SummaryRow],
        warnings: &'a [String],
    }
    let summary = Summary {
        generations: report.generations,
        treatments: &report.summary,
        warnings: &report.warnings,
    };
    write(
        "summary.json",
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    write(
        "stats.json",
        serde_json::to_string_pretty(&report.stats)? + "\n",
    )?;
    Ok(())
}
