//! Pressurized-water-reactor loading-pattern optimization.

pub mod catalog;
pub mod decode;
pub mod economics;
pub mod embed;
pub mod env;
pub mod external;
pub mod geometry;
pub mod inventory;
pub mod objective;
pub mod pattern;
pub mod surrogate;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use catalog::{FreshFuelType, FuelCatalog};
pub use decode::{action_spec, decode_action};
pub use economics::{compute_lcoe, EconomicParams};
pub use embed::EmbedRanges;
pub use env::PwrEnv;
pub use external::{ExternalConfig, ExternalEvaluator};
pub use geometry::{BurnClass, CoreGeometry};
pub use inventory::Inventory;
pub use objective::{normalized_distance, objective, ConstraintSpec};
pub use pattern::{check_structural, count_batches, Assembly, LoadingPattern, StructuralViolation};
pub use surrogate::{surrogate_evaluate, FomSet, SurrogateParams};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Data files and model settings; any file left unset uses the bundled default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PwrConfig {
    pub geometry: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub inventory: Option<PathBuf>,
    pub economics: Option<PathBuf>,
    pub surrogate: SurrogateParams,
    pub constraints: ConstraintSpec,
    pub embed: Option<EmbedRanges>,
    /// Use an external simulator instead of the surrogate.
    pub external: Option<ExternalConfig>,
}

/// Immutable problem data shared by every worker.
#[derive(Debug, Clone)]
pub struct PwrModel {
    pub geometry: CoreGeometry,
    pub catalog: FuelCatalog,
    pub inventory: Inventory,
    pub economics: EconomicParams,
    pub surrogate: SurrogateParams,
    pub constraints: ConstraintSpec,
    pub embed: EmbedRanges,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

impl PwrModel {
    pub fn default_model() -> Self {
        let geometry = CoreGeometry::default_core();
        let catalog = FuelCatalog::default_catalog();
        let inventory =
            Inventory::default_inventory(&geometry, &catalog).expect("bundled inventory is valid");
        Self {
            embed: EmbedRanges::for_catalog(&catalog),
            geometry,
            catalog,
            inventory,
            economics: EconomicParams::default_params(),
            surrogate: SurrogateParams::default(),
            constraints: ConstraintSpec::default(),
        }
    }

    pub fn from_config(cfg: &PwrConfig) -> Result<Self> {
        let geometry = match &cfg.geometry {
            Some(p) => CoreGeometry::from_json(&read(p)?)?,
            None => CoreGeometry::default_core(),
        };
        let catalog = match &cfg.catalog {
            Some(p) => FuelCatalog::from_json(&read(p)?)?,
            None => FuelCatalog::default_catalog(),
        };
        let inventory = match &cfg.inventory {
            Some(p) => Inventory::from_json(&read(p)?, &geometry, &catalog)?,
            None => Inventory::default_inventory(&geometry, &catalog)?,
        };
        let economics = match &cfg.economics {
            Some(p) => EconomicParams::from_json(&read(p)?)?,
            None => EconomicParams::default_params(),
        };
        Ok(Self {
            embed: cfg
                .embed
                .clone()
                .unwrap_or_else(|| EmbedRanges::for_catalog(&catalog)),
            geometry,
            catalog,
            inventory,
            economics,
            surrogate: cfg.surrogate.clone(),
            constraints: cfg.constraints.clone(),
        })
    }
}

/// Builds worker `worker`'s environment.
pub fn make_env(
    model: &Arc<PwrModel>,
    cfg: &PwrConfig,
    run_id: &str,
    worker: usize,
    rng: Rng,
) -> Result<PwrEnv> {
    let external = match &cfg.external {
        Some(x) => Some(ExternalEvaluator::new(x.clone(), run_id, worker)?),
        None => None,
    };
    PwrEnv::new(Arc::clone(model), rng, external)
}
