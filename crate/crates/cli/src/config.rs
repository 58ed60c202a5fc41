//! Run configuration: one strictly validated JSON document per experiment.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use corerl_core::benchmark::{BenchmarkEnv, BenchmarkFn, BenchmarkSpec};
use corerl_core::env_core::Environment;
use corerl_core::ppo::HyperParams;
use corerl_core::pwr::{make_env, PwrConfig, PwrModel};
use corerl_core::rng::rng_from_seed;
use corerl_core::{Error, Result};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    Ppo,
    /// Uniform random actions under the same sample budget.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub function: BenchmarkFn,
    pub nx: usize,
    /// Grid half-width; the function's default when absent.
    #[serde(default)]
    pub bound: Option<i64>,
    /// Seed of the shift and rotation; the run seed when absent.
    #[serde(default)]
    pub instance_seed: Option<u64>,
    /// CEC-format shift vector and rotation matrix files.
    #[serde(default)]
    pub shift_file: Option<PathBuf>,
    #[serde(default)]
    pub rotation_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvironmentConfig {
    Pwr(PwrConfig),
    Benchmark(BenchmarkConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default = "default_name")]
    pub name: String,
    pub environment: EnvironmentConfig,
    #[serde(default)]
    pub algorithm: Algorithm,
    #[serde(default)]
    pub hyperparams: HyperParams,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Generations the run is divided into for reporting.
    #[serde(default = "default_generations")]
    pub generations: usize,
    /// Wall-clock cap per run, seconds.
    #[serde(default)]
    pub max_seconds: Option<f64>,
}

fn default_name() -> String {
    "run".into()
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_generations() -> usize {
    corerl_core::analytics::metrics::DEFAULT_GENERATIONS
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

fn require_file(p: &Option<PathBuf>, what: &str) -> Result<()> {
    match p {
        Some(path) if !path.is_file() => Err(Error::Config(format!(
            "{what} file {} does not exist",
            path.display()
        ))),
        _ => Ok(()),
    }
}

fn find_program(name: &str) -> bool {
    let p = Path::new(name);
    if p.components().count() > 1 {
        return p.is_file();
    }
    std::env::var_os("PATH")
        .map(|paths| std::env::split_paths(&paths).any(|d| d.join(name).is_file()))
        .unwrap_or(false)
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if c.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "config schema_version {} is not supported (expected {SCHEMA_VERSION})",
                c.schema_version
            )));
        }
        Ok(c)
    }

    /// Reads a config and makes its file references absolute relative to the config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut c = Self::from_json(&text)?;
        let base = path
            .parent()
            .map(|p| {
                if p.as_os_str().is_empty() {
                    Path::new(".")
                } else {
                    p
                }
            })
            .unwrap_or(Path::new("."));
        let base = std::fs::canonicalize(base).map_err(|e| Error::io(base, e))?;
        c.resolve_paths(&base);
        Ok(c)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        match &mut self.environment {
            EnvironmentConfig::Pwr(p) => {
                for f in [
                    &mut p.geometry,
                    &mut p.catalog,
                    &mut p.inventory,
                    &mut p.economics,
                ] {
                    resolve(base, f);
                }
                if let Some(x) = &mut p.external {
                    resolve(base, &mut x.work_dir);
                    if let Some(cmd) = x.command.first_mut() {
                        let as_path = Path::new(cmd.as_str());
                        if as_path.components().count() > 1 && as_path.is_relative() {
                            *cmd = base.join(as_path).to_string_lossy().into_owned();
                        }
                    }
                }
            }
            EnvironmentConfig::Benchmark(b) => {
                resolve(base, &mut b.shift_file);
                resolve(base, &mut b.rotation_file);
            }
        }
    }

    /// Checks everything that can be checked without evaluating a design.
    pub fn validate(&self) -> Result<()> {
        self.hyperparams.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.generations == 0 {
            return Err(Error::Config("generations must be positive".into()));
        }
        if let Some(s) = self.max_seconds {
            if !(s > 0.0) {
                return Err(Error::Config("max_seconds must be positive".into()));
            }
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Config(format!("invalid run name {:?}", self.name)));
        }
        match &self.environment {
            EnvironmentConfig::Pwr(p) => {
                require_file(&p.geometry, "geometry")?;
                require_file(&p.catalog, "catalog")?;
                require_file(&p.inventory, "inventory")?;
                require_file(&p.economics, "economics")?;
                if let Some(x) = &p.external {
                    match x.command.first() {
                        None => {
                            return Err(Error::Config("external evaluator command is empty".into()))
                        }
                        Some(c) if !find_program(c) => {
                            return Err(Error::Config(format!("external evaluator {c} not found")))
                        }
                        _ => {}
                    }
                }
                // Loading the model checks every data file.
                PwrModel::from_config(p)?;
            }
            EnvironmentConfig::Benchmark(b) => {
                require_file(&b.shift_file, "shift")?;
                require_file(&b.rotation_file, "rotation")?;
                self.benchmark_spec(b, self.seeds[0])?;
            }
        }
        Ok(())
    }

    pub fn benchmark_spec(&self, b: &BenchmarkConfig, seed: u64) -> Result<BenchmarkSpec> {
        if let Some(shift) = &b.shift_file {
            return BenchmarkSpec::from_cec_files(
                b.function,
                b.nx,
                shift,
                b.rotation_file.as_deref(),
            );
        }
        let bound = b.bound.unwrap_or_else(|| b.function.default_bound());
        BenchmarkSpec::generate_with_bound(b.function, b.nx, bound, b.instance_seed.unwrap_or(seed))
    }

    /// The configuration written into run directories.
    pub fn snapshot(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.seeds = vec![seed];
        c.hyperparams.seed = seed;
        c
    }
}

/// Builds worker environments for one run.
pub struct EnvFactory {
    kind: FactoryKind,
}

enum FactoryKind {
    Pwr {
        model: Arc<PwrModel>,
        cfg: PwrConfig,
        run_id: String,
    },
    Benchmark(BenchmarkSpec),
}

impl EnvFactory {
    pub fn new(config: &RunConfig, seed: u64) -> Result<Self> {
        let kind = match &config.environment {
            EnvironmentConfig::Pwr(p) => FactoryKind::Pwr {
                model: Arc::new(PwrModel::from_config(p)?),
                cfg: p.clone(),
                run_id: format!("{}-seed{seed}", config.name),
            },
            EnvironmentConfig::Benchmark(b) => {
                FactoryKind::Benchmark(config.benchmark_spec(b, seed)?)
            }
        };
        Ok(Self { kind })
    }

    pub fn make(&self, worker: usize, env_seed: u64) -> Result<Box<dyn Environment>> {
        Ok(match &self.kind {
            FactoryKind::Pwr { model, cfg, run_id } => Box::new(make_env(
                model,
                cfg,
                run_id,
                worker,
                rng_from_seed(env_seed),
            )?),
            FactoryKind::Benchmark(spec) => Box::new(BenchmarkEnv::new(spec.clone())?),
        })
    }

    /// Description stored in the run record.
    pub fn describe(&self) -> serde_json::Value {
        match &self.kind {
            FactoryKind::Pwr { model, .. } => serde_json::json!({
                "kind": "pwr",
                "geometry": model.geometry.name,
                "decision_locations": model.geometry.n_locations(),
                "catalog_types": model.catalog.len(),
            }),
            FactoryKind::Benchmark(spec) => serde_json::json!({
                "kind": "benchmark",
                "function": spec.function,
                "nx": spec.nx,
                "bound": spec.bound,
                "instance_seed": spec.seed,
                "optimum": spec.function.optimum(),
            }),
        }
    }
}

/// Sets `name` (a hyper-parameter, or `env.<path>` inside the environment) to a JSON value.
pub fn apply_override(
    config: &RunConfig,
    name: &str,
    value: &serde_json::Value,
) -> Result<RunConfig> {
    let mut doc = serde_json::to_value(config)?;
    let (root, path): (&str, Vec<&str>) = match name.strip_prefix("env.") {
        Some(rest) => ("environment", rest.split('.').collect()),
        None => ("hyperparams", name.split('.').collect()),
    };
    let unknown = || Error::Config(format!("unknown parameter {name:?}"));
    let mut node = doc.get_mut(root).ok_or_else(unknown)?;
    for (i, key) in path.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(unknown)?;
        if i + 1 == path.len() {
            // Optional fields may be absent from the serialized form; known-ness is
            // checked when the result is parsed back with unknown fields denied.
            obj.insert(key.to_string(), value.clone());
            break;
        }
        node = obj.get_mut(*key).ok_or_else(unknown)?;
    }
    let text = serde_json::to_string(&doc)?;
    RunConfig::from_json(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("parameter {name:?}: {m}")),
        e => e,
    })
}
