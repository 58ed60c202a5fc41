//! File-based protocol for running an out-of-process core simulator.
//!
//! The evaluator command is invoked as `cmd... request.json response.json`.
//! Exit code 0 means the response file holds a complete result.

use std::io::Read as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::catalog::FuelCatalog;
use super::geometry::CoreGeometry;
use super::inventory::Inventory;
use super::pattern::{Assembly, LoadingPattern};
use super::surrogate::{AssemblyFom, FomSet};
use crate::error::{Error, EvaluatorErrorKind as Kind, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestAssembly {
    pub location: [i32; 2],
    pub assembly_id: String,
    pub enrichment: f64,
    pub ifba: u32,
    pub waba: u32,
    pub boc_burnup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestMeta {
    pub run_id: String,
    pub sample_index: u64,
    pub worker: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatorRequest {
    pub pattern: Vec<RequestAssembly>,
    pub meta: RequestMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseAssembly {
    pub location: [i32; 2],
    pub rpf: f64,
    pub fdh: f64,
    pub eoc_exposure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluatorResponse {
    pub cycle_length_efpd: f64,
    pub fq: f64,
    pub fdh: f64,
    pub cb_ppm: f64,
    pub pin_peak_bu_gwd_thm: f64,
    pub assemblies: Vec<ResponseAssembly>,
}

pub fn build_request(
    pattern: &LoadingPattern,
    geometry: &CoreGeometry,
    catalog: &FuelCatalog,
    inventory: &Inventory,
    meta: RequestMeta,
) -> EvaluatorRequest {
    let pattern = pattern
        .cells
        .iter()
        .enumerate()
        .map(|(pos, cell)| {
            let (x, y) = geometry.position(pos);
            match *cell {
                Assembly::Fresh { fuel_type } => {
                    let t = catalog.get(fuel_type);
                    RequestAssembly {
                        location: [x, y],
                        assembly_id: t.id.clone(),
                        enrichment: t.enrichment,
                        ifba: t.ifba_rods,
                        waba: t.waba_rods,
                        boc_burnup: 0.0,
                    }
                }
                Assembly::Burned { group, copy } => {
                    let g = inventory.group(group);
                    let t = catalog.get(inventory.source_type(group));
                    RequestAssembly {
                        location: [x, y],
                        assembly_id: format!("{}-{}", g.id, copy + 1),
                        enrichment: t.enrichment,
                        ifba: t.ifba_rods,
                        waba: t.waba_rods,
                        boc_burnup: g.boc_burnup,
                    }
                }
            }
        })
        .collect();
    EvaluatorRequest { pattern, meta }
}

/// Converts a response into a FomSet ordered like the geometry.
pub fn parse_response(text: &str, geometry: &CoreGeometry) -> Result<FomSet> {
    let malformed = |m: String| Error::evaluator(Kind::Malformed, m);
    let r: EvaluatorResponse =
        serde_json::from_str(text).map_err(|e| malformed(format!("invalid response: {e}")))?;
    let mut slots: Vec<Option<AssemblyFom>> = vec![None; geometry.n_positions()];
    for a in &r.assemblies {
        let Some(pos) = geometry.index_of(a.location[0], a.location[1]) else {
            return Err(malformed(format!("unknown location {:?}", a.location)));
        };
        if slots[pos].is_some() {
            return Err(malformed(format!(
                "location {:?} reported twice",
                a.location
            )));
        }
        slots[pos] = Some(AssemblyFom {
            rpf: a.rpf,
            fdh: a.fdh,
            eoc_exposure: a.eoc_exposure,
        });
    }
    let assemblies = slots
        .into_iter()
        .enumerate()
        .map(|(pos, a)| {
            a.ok_or_else(|| malformed(format!("location {:?} missing", geometry.position(pos))))
        })
        .collect::<Result<Vec<_>>>()?;
    let foms = FomSet {
        cycle_length: r.cycle_length_efpd,
        fq: r.fq,
        fdh: r.fdh,
        cb: r.cb_ppm,
        pin_peak_bu: r.pin_peak_bu_gwd_thm,
        assemblies,
    };
    foms.validate().map_err(malformed)?;
    Ok(foms)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalConfig {
    /// Program followed by fixed leading arguments.
    pub command: Vec<String>,
    #[serde(default = "default_timeout")]
    pub timeout_seconds: f64,
    /// Where request/response files go; the system temp dir if absent.
    #[serde(default)]
    pub work_dir: Option<PathBuf>,
}

fn default_timeout() -> f64 {
    600.0
}

/// One worker's handle on the external evaluator.
#[derive(Debug, Clone)]
pub struct ExternalEvaluator {
    config: ExternalConfig,
    run_id: String,
    worker: usize,
    calls: u64,
}

impl ExternalEvaluator {
    pub fn new(config: ExternalConfig, run_id: impl Into<String>, worker: usize) -> Result<Self> {
        if config.command.is_empty() {
            return Err(Error::Config("external evaluator command is empty".into()));
        }
        if !(config.timeout_seconds > 0.0) {
            return Err(Error::Config(
                "external evaluator timeout must be positive".into(),
            ));
        }
        Ok(Self {
            config,
            run_id: run_id.into(),
            worker,
            calls: 0,
        })
    }

    pub fn evaluate(
        &mut self,
        pattern: &LoadingPattern,
        geometry: &CoreGeometry,
        catalog: &FuelCatalog,
        inventory: &Inventory,
    ) -> Result<FomSet> {
        self.calls += 1;
        let meta = RequestMeta {
            run_id: self.run_id.clone(),
            sample_index: self.calls,
            worker: self.worker,
        };
        let request = build_request(pattern, geometry, catalog, inventory, meta);
        let dir = match &self.config.work_dir {
            Some(d) => d.clone(),
            None => std::env::temp_dir(),
        };
        let tag: String = self
            .run_id
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        let stem = format!(
            "eval-{}-{tag}-w{}-{}",
            std::process::id(),
            self.worker,
            self.calls
        );
        let req_path = dir.join(format!("{stem}.request.json"));
        let resp_path = dir.join(format!("{stem}.response.json"));
        let io = |e: std::io::Error, p: &Path| {
            Error::evaluator(Kind::Io, format!("{}: {e}", p.display()))
        };
        std::fs::write(&req_path, serde_json::to_vec_pretty(&request)?)
            .map_err(|e| io(e, &req_path))?;
        let result = self.run(&req_path, &resp_path).and_then(|()| {
            let text = std::fs::read_to_string(&resp_path)
                .map_err(|e| Error::evaluator(Kind::Malformed, format!("no response file: {e}")))?;
            parse_response(&text, geometry)
        });
        let _ = std::fs::remove_file(&req_path);
        let _ = std::fs::remove_file(&resp_path);
        result
    }

    fn run(&self, req: &Path, resp: &Path) -> Result<()> {
        let mut child = Command::new(&self.config.command[0])
            .args(&self.config.command[1..])
            .arg(req)
            .arg(resp)
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| {
                Error::evaluator(
                    Kind::Io,
                    format!("cannot start {:?}: {e}", self.config.command[0]),
                )
            })?;
        let mut stderr = child.stderr.take().expect("stderr is piped");
        let reader = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = stderr.read_to_string(&mut s);
            s
        });
        let deadline = Instant::now() + Duration::from_secs_f64(self.config.timeout_seconds);
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) if Instant::now() >= deadline => {
                    let _ = child.kill();
                    let _ = child.wait();
                    // The reader may block on grandchildren holding the pipe; leave it detached.
                    drop(reader);
                    return Err(Error::evaluator(
                        Kind::Timeout,
                        format!("no result after {} s", self.config.timeout_seconds),
                    ));
                }
                Ok(None) => std::thread::sleep(Duration::from_millis(5)),
                Err(e) => return Err(Error::evaluator(Kind::Io, format!("wait failed: {e}"))),
            }
        };
        let stderr = reader.join().unwrap_or_default();
        if !status.success() {
            return Err(Error::evaluator(
                Kind::NonzeroExit,
                format!("{status}; stderr: {}", stderr.trim()),
            ));
        }
        Ok(())
    }
}
