//! Run-directory layout: `config.json`, `manifest.json`, `seed-N/` and `report/`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use corerl_core::analytics::metrics::bin_generations;
use corerl_core::analytics::report::{generations_csv, RUN_RECORD_FILE};
use corerl_core::ppo::{random_search, train, RunRecord, RunStatus, TrainOptions};
use corerl_core::{Error, Result};
use serde::Serialize;

use crate::config::{Algorithm, EnvFactory, RunConfig};

pub const CONFIG_FILE: &str = "config.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const GENERATIONS_FILE: &str = "generations.csv";
pub const BEST_DESIGN_FILE: &str = "best_design.json";
pub const REPORT_DIR: &str = "report";

pub fn version() -> String {
    format!(
        "v{}-{}",
        env!("CARGO_PKG_VERSION"),
        env!("CORERL_GIT_DESCRIBE")
    )
}

/// Writes through a sibling temp file and a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(
        path,
        (serde_json::to_string_pretty(value)? + "\n").as_bytes(),
    )
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    version: String,
    created_unix: u64,
    command: &'a str,
}

pub fn write_manifest(dir: &Path, command: &str) -> Result<()> {
    let created_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    write_json(
        &dir.join(MANIFEST_FILE),
        &Manifest {
            version: version(),
            created_unix,
            command,
        },
    )
}

pub fn seed_dir(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed-{seed}"))
}

/// A finished (completed or time-limited) record already present in `seed_dir`.
pub fn finished_record(seed_dir: &Path) -> Option<RunRecord> {
    let text = std::fs::read_to_string(seed_dir.join(RUN_RECORD_FILE)).ok()?;
    let record: RunRecord = serde_json::from_str(&text).ok()?;
    match record.status {
        RunStatus::Failed { .. } => None,
        _ => Some(record),
    }
}

#[derive(Serialize)]
struct BestDesign<'a> {
    #[serde(with = "null_neg_inf")]
    objective: f64,
    samples_at_best: u64,
    design: &'a Option<serde_json::Value>,
}

mod null_neg_inf {
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }
}

/// Trains one seed of `config` and persists its artifacts into `dir`.
///
/// The record is written even when training fails, with a failed status.
pub fn run_seed(config: &RunConfig, seed: u64, dir: &Path) -> Result<RunRecord> {
    let config = config.with_seed(seed);
    let factory = EnvFactory::new(&config, seed)?;
    let opts = TrainOptions {
        environment: factory.describe(),
        deadline: config
            .max_seconds
            .map(|s| Instant::now() + Duration::from_secs_f64(s)),
    };
    let make = |w: usize, s: u64| factory.make(w, s);
    log::info!(
        "{}: seed {seed} ({} samples)",
        config.name,
        config.hyperparams.total_samples
    );
    let outcome = match config.algorithm {
        Algorithm::Ppo => train(&config.hyperparams, make, &opts),
        Algorithm::Random => random_search(&config.hyperparams, make, &opts),
    };
    let record = &outcome.record;
    if !record.episodes.is_empty() {
        let series = bin_generations(
            &record.episodes,
            config.generations.min(record.episodes.len()),
        )?;
        write_atomic(
            &dir.join(GENERATIONS_FILE),
            generations_csv(&series)?.as_bytes(),
        )?;
    }
    write_json(
        &dir.join(BEST_DESIGN_FILE),
        &BestDesign {
            objective: record.best.objective,
            samples_at_best: record.best.samples_at_best,
            design: &record.best.payload,
        },
    )?;
    // The record goes last: its presence marks the cell as done.
    write_json(&dir.join(RUN_RECORD_FILE), record)?;
    outcome.into_result()
}
