//! Fast deterministic stand-in for a nodal core simulator.
//!
//! Each assembly gets a reactivity proxy from enrichment, burnup and absorber
//! loading. Power is the exponentiated reactivity smoothed over the four
//! nearest neighbours and normalized to mean 1; cells with missing neighbours
//! leak. Two snapshots are taken: beginning of cycle with burnable absorbers
//! and end of cycle after depletion with the absorbers burnt out. Peaking is
//! the maximum over both.

use serde::{Deserialize, Serialize};

use super::catalog::FuelCatalog;
use super::geometry::CoreGeometry;
use super::inventory::Inventory;
use super::pattern::{Assembly, LoadingPattern};

/// Figures of merit of one evaluated pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FomSet {
    pub cycle_length: f64,
    pub fq: f64,
    pub fdh: f64,
    pub cb: f64,
    pub pin_peak_bu: f64,
    /// Per lattice position, in geometry order.
    pub assemblies: Vec<AssemblyFom>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssemblyFom {
    /// Relative power fraction.
    pub rpf: f64,
    /// Cycle-maximum rod-integrated peaking.
    pub fdh: f64,
    /// End-of-cycle assembly exposure, GWd/tHm.
    pub eoc_exposure: f64,
}

impl FomSet {
    /// Positive, finite and internally consistent.
    pub fn validate(&self) -> Result<(), String> {
        let scalars = [
            ("cycle_length", self.cycle_length),
            ("fq", self.fq),
            ("fdh", self.fdh),
            ("cb", self.cb),
            ("pin_peak_bu", self.pin_peak_bu),
        ];
        for (name, v) in scalars {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} = {v} is not positive and finite"));
            }
        }
        if self.fq < self.fdh {
            return Err(format!("fq {} below fdh {}", self.fq, self.fdh));
        }
        for (i, a) in self.assemblies.iter().enumerate() {
            if !(a.rpf.is_finite() && a.rpf >= 0.0 && a.fdh.is_finite() && a.fdh >= 0.0)
                || !(a.eoc_exposure.is_finite() && a.eoc_exposure > 0.0)
            {
                return Err(format!("assembly {i} has invalid fields {a:?}"));
            }
        }
        Ok(())
    }

    pub fn mean_rpf(&self) -> f64 {
        self.assemblies.iter().map(|a| a.rpf).sum::<f64>() / self.assemblies.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateParams {
    /// Fresh reactivity at 4.00 wt% without absorbers.
    pub kinf_fresh_ref: f64,
    /// Reactivity gained per wt% enrichment.
    pub kinf_per_enrichment: f64,
    /// Reactivity lost per GWd/tHm.
    pub kinf_per_burnup: f64,
    pub ifba_worth_per_rod: f64,
    pub waba_worth_per_rod: f64,
    /// Exponent linking reactivity to local power.
    pub power_sharpness: f64,
    /// Weight of each neighbour in the smoothing kernel.
    pub neighbor_coupling: f64,
    /// Cycle length at the reference core reactivity, EFPD.
    pub cycle_ref_efpd: f64,
    pub cycle_ref_kinf: f64,
    /// EFPD per unit of core-average reactivity.
    pub cycle_slope: f64,
    pub cb_ref_ppm: f64,
    pub cb_ref_kinf: f64,
    /// ppm per unit of beginning-of-cycle core reactivity.
    pub cb_slope: f64,
    /// Rod factor turning assembly power into FΔh.
    pub rod_factor: f64,
    /// Axial peaking for assemblies without IFBA; IFBA flattens it.
    pub axial_factor: f64,
    pub axial_ifba_relief: f64,
    /// Pin-to-assembly burnup ratio.
    pub pin_factor: f64,
    pub specific_power: f64,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        Self {
            kinf_fresh_ref: 1.30,
            kinf_per_enrichment: 0.10,
            kinf_per_burnup: 0.0095,
            ifba_worth_per_rod: 0.0004,
            waba_worth_per_rod: 0.0030,
            power_sharpness: 3.0,
            neighbor_coupling: 0.5,
            cycle_ref_efpd: 500.0,
            cycle_ref_kinf: 1.232,
            cycle_slope: 1500.0,
            cb_ref_ppm: 1150.0,
            cb_ref_kinf: 1.20,
            cb_slope: 6000.0,
            rod_factor: 1.08,
            axial_factor: 1.30,
            axial_ifba_relief: 0.05,
            pin_factor: 1.20,
            specific_power: 0.0385,
        }
    }
}

/// Per-position composition seen by a physics model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellComposition {
    pub enrichment: f64,
    pub ifba: u32,
    pub waba: u32,
    pub boc_burnup: f64,
    /// Reactivity proxy without absorbers.
    pub kinf: f64,
}

pub fn compositions(
    pattern: &LoadingPattern,
    catalog: &FuelCatalog,
    inventory: &Inventory,
    params: &SurrogateParams,
) -> Vec<CellComposition> {
    pattern
        .cells
        .iter()
        .map(|cell| match *cell {
            Assembly::Fresh { fuel_type } => {
                let t = catalog.get(fuel_type);
                CellComposition {
                    enrichment: t.enrichment,
                    ifba: t.ifba_rods,
                    waba: t.waba_rods,
                    boc_burnup: 0.0,
                    kinf: params.kinf_fresh_ref + params.kinf_per_enrichment * (t.enrichment - 4.0),
                }
            }
            Assembly::Burned { group, .. } => {
                let g = inventory.group(group);
                let t = catalog.get(inventory.source_type(group));
                // Absorbers are spent after the first cycle.
                CellComposition {
                    enrichment: t.enrichment,
                    ifba: 0,
                    waba: 0,
                    boc_burnup: g.boc_burnup,
                    kinf: g.boc_kinf,
                }
            }
        })
        .collect()
}

/// Normalized power from per-cell reactivity.
fn power_shape(geometry: &CoreGeometry, kinf: &[f64], params: &SurrogateParams) -> Vec<f64> {
    let s: Vec<f64> = kinf
        .iter()
        .map(|k| (params.power_sharpness * (k - 1.0)).exp())
        .collect();
    let p: Vec<f64> = (0..s.len())
        .map(|i| {
            s[i] + params.neighbor_coupling
                * geometry.neighbors(i).iter().map(|&j| s[j]).sum::<f64>()
        })
        .collect();
    let mean = p.iter().sum::<f64>() / p.len() as f64;
    p.into_iter().map(|v| v / mean).collect()
}

/// Geometric importance: interior cells count fully, edge cells lose a fifth per missing neighbour.
fn importance(geometry: &CoreGeometry, i: usize) -> f64 {
    (1.0 + geometry.neighbors(i).len() as f64) / 5.0
}

fn weighted_mean(geometry: &CoreGeometry, k: &[f64]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, v) in k.iter().enumerate() {
        let w = importance(geometry, i);
        num += w * v;
        den += w;
    }
    num / den
}

pub fn surrogate_evaluate(
    pattern: &LoadingPattern,
    geometry: &CoreGeometry,
    catalog: &FuelCatalog,
    inventory: &Inventory,
    params: &SurrogateParams,
) -> FomSet {
    let comp = compositions(pattern, catalog, inventory, params);
    let k_clean: Vec<f64> = comp.iter().map(|c| c.kinf).collect();
    let k_boc: Vec<f64> = comp
        .iter()
        .map(|c| {
            c.kinf
                - params.ifba_worth_per_rod * c.ifba as f64
                - params.waba_worth_per_rod * c.waba as f64
        })
        .collect();

    let kbar = weighted_mean(geometry, &k_clean);
    let cycle_length =
        (params.cycle_ref_efpd + params.cycle_slope * (kbar - params.cycle_ref_kinf)).max(1.0);
    let cb = (params.cb_ref_ppm
        + params.cb_slope * (weighted_mean(geometry, &k_boc) - params.cb_ref_kinf))
        .max(1.0);

    let p_boc = power_shape(geometry, &k_boc, params);
    let cycle_burnup = cycle_length * params.specific_power;
    let k_eoc: Vec<f64> = k_clean
        .iter()
        .zip(&p_boc)
        .map(|(k, p)| k - params.kinf_per_burnup * p * cycle_burnup)
        .collect();
    let p_eoc = power_shape(geometry, &k_eoc, params);

    let mut fdh = 0.0f64;
    let mut fq = 0.0f64;
    let assemblies: Vec<AssemblyFom> = comp
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let a_fdh = params.rod_factor * p_boc[i].max(p_eoc[i]);
            let axial = params.axial_factor - params.axial_ifba_relief * c.ifba as f64 / 156.0;
            fdh = fdh.max(a_fdh);
            fq = fq.max(a_fdh * axial);
            AssemblyFom {
                rpf: p_boc[i],
                fdh: a_fdh,
                eoc_exposure: c.boc_burnup + 0.5 * (p_boc[i] + p_eoc[i]) * cycle_burnup,
            }
        })
        .collect();
    let max_eoc = assemblies
        .iter()
        .map(|a| a.eoc_exposure)
        .fold(0.0, f64::max);
    FomSet {
        cycle_length,
        fq,
        fdh,
        cb,
        pin_peak_bu: params.pin_factor * max_eoc,
        assemblies,
    }
}
