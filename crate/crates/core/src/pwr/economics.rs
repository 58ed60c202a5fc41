//! Fuel-cycle levelized cost of electricity.

use serde::{Deserialize, Serialize};

use super::catalog::FuelCatalog;
use super::pattern::{Assembly, LoadingPattern};
use super::surrogate::FomSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconomicParams {
    pub schema_version: u32,
    /// Net thermal efficiency.
    pub eta: f64,
    /// Availability factor.
    pub k_av: f64,
    /// Forced and maintenance outage per cycle, days.
    pub t_fo_days: f64,
    pub t_mo_days: f64,
    pub n_batches: u32,
    /// Continuous discount rate, 1/year.
    pub discount_rate: f64,
    /// U-235 weight-% of natural feed and of enrichment tails.
    pub feed_assay: f64,
    pub tails_assay: f64,
    /// $ per kg of natural feed (mining and conversion).
    pub ore_conversion_per_kg_feed: f64,
    /// Payment times relative to cycle start, years (negative = before).
    pub ore_lead_years: f64,
    /// $ per separative work unit.
    pub swu_cost: f64,
    pub swu_lead_years: f64,
    pub fabrication_per_kg: f64,
    pub fabrication_lead_years: f64,
    pub disposal_per_kg: f64,
    pub disposal_lag_years: f64,
    /// $ per WABA rod.
    pub waba_unit_cost: f64,
    /// Heavy-metal mass of one assembly, kgU.
    pub assembly_mass_kg: f64,
    /// Burnup accrued per EFPD at average power, GWd/tHm.
    pub specific_power_gwd_per_t_per_efpd: f64,
}

impl EconomicParams {
    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn default_params() -> Self {
        Self::from_json(include_str!("../../data/economics.json"))
            .expect("bundled economics file is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("economics: {m}")));
        if self.schema_version != 1 {
            return bad("unsupported schema_version");
        }
        if !(self.discount_rate > 0.0 && self.discount_rate.is_finite()) {
            return bad("discount_rate must be positive");
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad("eta must lie in (0, 1]");
        }
        if !(self.k_av > 0.0 && self.k_av <= 1.0) {
            return bad("k_av must lie in (0, 1]");
        }
        if self.n_batches == 0 {
            return bad("n_batches must be positive");
        }
        let costs = [
            self.ore_conversion_per_kg_feed,
            self.swu_cost,
            self.fabrication_per_kg,
            self.disposal_per_kg,
            self.waba_unit_cost,
            self.t_fo_days,
            self.t_mo_days,
        ];
        if costs.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return bad("costs and outage times must be nonnegative");
        }
        if !(0.0 < self.tails_assay && self.tails_assay < self.feed_assay) {
            return bad("need 0 < tails_assay < feed_assay");
        }
        if !(self.assembly_mass_kg > 0.0 && self.specific_power_gwd_per_t_per_efpd > 0.0) {
            return bad("assembly mass and specific power must be positive");
        }
        Ok(())
    }

    /// kg of natural feed per kg of product at `enrichment` wt%.
    pub fn feed_factor(&self, enrichment: f64) -> f64 {
        (enrichment - self.tails_assay) / (self.feed_assay - self.tails_assay)
    }

    /// Separative work per kg of product.
    pub fn swu_per_kg(&self, enrichment: f64) -> f64 {
        let v = |pct: f64| {
            let x = pct / 100.0;
            (2.0 * x - 1.0) * (x / (1.0 - x)).ln()
        };
        let f = self.feed_factor(enrichment);
        v(enrichment) + (f - 1.0) * v(self.tails_assay) - f * v(self.feed_assay)
    }

    /// Undiscounted (cost $/kgU, payment time in years) stages for one enrichment.
    pub fn cost_stages(&self, enrichment: f64) -> Vec<CostStage> {
        vec![
            CostStage {
                cost: self.ore_conversion_per_kg_feed * self.feed_factor(enrichment),
                time: self.ore_lead_years,
            },
            CostStage {
                cost: self.swu_cost * self.swu_per_kg(enrichment),
                time: self.swu_lead_years,
            },
            CostStage {
                cost: self.fabrication_per_kg,
                time: self.fabrication_lead_years,
            },
            CostStage {
                cost: self.disposal_per_kg,
                time: self.disposal_lag_years,
            },
        ]
    }

    pub fn lcoe_inputs(&self, cycle_length_efpd: f64) -> LcoeInputs {
        LcoeInputs {
            eta: self.eta,
            k_av: self.k_av,
            t_outage_years: (self.t_fo_days + self.t_mo_days) / 365.25,
            t_lev_years: cycle_length_efpd * self.n_batches as f64 / 365.25,
            discount_rate: self.discount_rate,
            waba_unit_cost: self.waba_unit_cost,
            waba_time: self.fabrication_lead_years,
            mass_kg: self.assembly_mass_kg,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostStage {
    /// $/kgU.
    pub cost: f64,
    /// Years relative to cycle start.
    pub time: f64,
}

/// One fresh-fuel class of the reload batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuelClass {
    /// Fraction of the reload batch.
    pub alpha: f64,
    /// Discharge burnup, GWd/tHm.
    pub burnup: f64,
    pub stages: Vec<CostStage>,
    /// WABA rods per assembly.
    pub waba_rods: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LcoeInputs {
    pub eta: f64,
    pub k_av: f64,
    /// Outage per cycle, years.
    pub t_outage_years: f64,
    /// Levelization period, years.
    pub t_lev_years: f64,
    pub discount_rate: f64,
    pub waba_unit_cost: f64,
    pub waba_time: f64,
    /// kgU the WABA cost is spread over.
    pub mass_kg: f64,
}

/// Levelized fuel-cycle cost in $/MWh.
///
/// `EFPY/(η K_f 24) · r/(1 - e^{-rT}) · Σ α_i/Bu_i · (Σ_k c_ik e^{-r T_ik} + C_waba,i)`
/// with `K_f = K_av (1 - T_out/T)` and `EFPY = K_f T`.
pub fn compute_lcoe(inputs: &LcoeInputs, classes: &[FuelClass]) -> Result<f64> {
    let t = inputs.t_lev_years;
    let r = inputs.discount_rate;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!(
            "levelization period {t} must be positive"
        )));
    }
    let k_f = inputs.k_av * (1.0 - inputs.t_outage_years / t);
    if k_f <= 0.0 {
        return Err(Error::Domain(format!(
            "capacity factor {k_f} is not positive; cycle too short"
        )));
    }
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!(
            "discount rate {r} must be nonnegative"
        )));
    }
    let efpy = k_f * t;
    // r / (1 - e^{-rT}); expm1 keeps precision for small rT.
    let annuity = if r == 0.0 {
        1.0 / t
    } else {
        r / -(-r * t).exp_m1()
    };
    let mut sum = 0.0;
    for (i, c) in classes.iter().enumerate() {
        if !(c.burnup > 0.0) {
            return Err(Error::Domain(format!(
                "fuel class {i} has nonpositive burnup {}",
                c.burnup
            )));
        }
        let mut cost: f64 = c.stages.iter().map(|s| s.cost * (-r * s.time).exp()).sum();
        cost += c.waba_rods as f64 * inputs.waba_unit_cost * (-r * inputs.waba_time).exp()
            / inputs.mass_kg;
        sum += c.alpha * cost / c.burnup;
    }
    Ok(efpy / (inputs.eta * k_f * 24.0) * annuity * sum)
}

/// Groups the fresh batch by type and builds the cost classes.
///
/// Discharge burnup extrapolates each type's mean end-of-cycle exposure by
/// the remaining `n_batches - 1` cycles at average power.
pub fn fuel_classes(
    pattern: &LoadingPattern,
    foms: &FomSet,
    catalog: &FuelCatalog,
    econ: &EconomicParams,
) -> Vec<FuelClass> {
    let mut count = vec![0usize; catalog.len()];
    let mut eoc = vec![0.0f64; catalog.len()];
    for (pos, cell) in pattern.cells.iter().enumerate() {
        if let Assembly::Fresh { fuel_type } = *cell {
            count[fuel_type] += 1;
            eoc[fuel_type] += foms.assemblies[pos].eoc_exposure;
        }
    }
    let total: usize = count.iter().sum();
    let extra =
        (econ.n_batches as f64 - 1.0) * foms.cycle_length * econ.specific_power_gwd_per_t_per_efpd;
    (0..catalog.len())
        .filter(|&t| count[t] > 0)
        .map(|t| {
            let ty = catalog.get(t);
            FuelClass {
                alpha: count[t] as f64 / total as f64,
                burnup: eoc[t] / count[t] as f64 + extra,
                stages: econ.cost_stages(ty.enrichment),
                waba_rods: ty.waba_rods,
            }
        })
        .collect()
}

pub fn pattern_lcoe(
    pattern: &LoadingPattern,
    foms: &FomSet,
    catalog: &FuelCatalog,
    econ: &EconomicParams,
) -> Result<f64> {
    let classes = fuel_classes(pattern, foms, catalog, econ);
    compute_lcoe(&econ.lcoe_inputs(foms.cycle_length), &classes)
}
