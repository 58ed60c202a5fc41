//! Fixed-length state embedding of an evaluated pattern.

use serde::{Deserialize, Serialize};

use super::catalog::FuelCatalog;
use super::geometry::CoreGeometry;
use super::inventory::Inventory;
use super::pattern::{Assembly, LoadingPattern};
use super::surrogate::FomSet;
use crate::env_core::Observation;

/// Features per decision location.
pub const FEATURES: usize = 7;

/// Min-max ranges; values outside are clamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedRanges {
    pub enrichment: (f64, f64),
    pub ifba: (f64, f64),
    pub waba: (f64, f64),
    pub rpf: (f64, f64),
    pub fdh: (f64, f64),
    pub eoc_exposure: (f64, f64),
}

impl Default for EmbedRanges {
    fn default() -> Self {
        Self {
            enrichment: (4.00, 4.95),
            ifba: (0.0, 156.0),
            waba: (0.0, 24.0),
            rpf: (0.0, 2.0),
            fdh: (0.0, 2.206),
            eoc_exposure: (0.0, 68.044),
        }
    }
}

impl EmbedRanges {
    pub fn for_catalog(catalog: &FuelCatalog) -> Self {
        Self {
            enrichment: catalog.enrichment_range(),
            ifba: (0.0, catalog.max_ifba() as f64),
            waba: (0.0, catalog.max_waba() as f64),
            ..Self::default()
        }
    }
}

pub fn scale(x: f64, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub fn observation_len(geometry: &CoreGeometry) -> usize {
    FEATURES * geometry.n_locations()
}

/// Per decision location: (relative position, enrichment, IFBA, WABA, rpf, FΔh, EOC exposure).
///
/// The relative position is 0 for fresh fuel and encodes the previous-cycle
/// location of burned fuel, so the first four features identify the pattern.
pub fn embed(
    pattern: &LoadingPattern,
    foms: &FomSet,
    geometry: &CoreGeometry,
    catalog: &FuelCatalog,
    inventory: &Inventory,
    ranges: &EmbedRanges,
) -> Observation {
    let n_loc = geometry.n_locations() as f64;
    let mut out = Vec::with_capacity(observation_len(geometry));
    for loc in 0..geometry.n_locations() {
        let pos = geometry.images(loc)[0];
        let (rel, ty) = match pattern.cells[pos] {
            Assembly::Fresh { fuel_type } => (0.0, catalog.get(fuel_type)),
            Assembly::Burned { group, .. } => (
                (inventory.group(group).prev_location as f64 + 1.0) / n_loc,
                catalog.get(inventory.source_type(group)),
            ),
        };
        let a = &foms.assemblies[pos];
        out.extend([
            rel.clamp(0.0, 1.0),
            scale(ty.enrichment, ranges.enrichment),
            scale(ty.ifba_rods as f64, ranges.ifba),
            scale(ty.waba_rods as f64, ranges.waba),
            scale(a.rpf, ranges.rpf),
            scale(a.fdh, ranges.fdh),
            scale(a.eoc_exposure, ranges.eoc_exposure),
        ]);
    }
    Observation(out)
}
