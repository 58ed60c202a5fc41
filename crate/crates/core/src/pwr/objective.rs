//! Penalized objective and distance to the feasible region.

use serde::{Deserialize, Serialize};

use super::surrogate::FomSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AtLeast,
    AtMost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bound {
    pub name: String,
    pub bound: f64,
    pub direction: Direction,
    pub weight: f64,
    /// Normalization range for the distance metric.
    #[serde(default)]
    pub range: Option<(f64, f64)>,
}

impl Bound {
    fn new(
        name: &str,
        bound: f64,
        direction: Direction,
        weight: f64,
        range: Option<(f64, f64)>,
    ) -> Self {
        Self {
            name: name.into(),
            bound,
            direction,
            weight,
            range,
        }
    }

    pub fn violated(&self, x: f64) -> bool {
        match self.direction {
            Direction::AtLeast => x < self.bound,
            Direction::AtMost => x > self.bound,
        }
    }

    /// Squared relative violation, zero when satisfied.
    pub fn phi(&self, x: f64) -> f64 {
        if self.violated(x) {
            let d = (x - self.bound) / self.bound;
            d * d
        } else {
            0.0
        }
    }
}

/// c1..c5 on the FOMs, then the lower and upper limits of c6 and c7.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstraintSpec {
    pub cycle_length: Bound,
    pub fq: Bound,
    pub fdh: Bound,
    pub cb: Bound,
    pub pin_peak_bu: Bound,
    pub enrichments_min: Bound,
    pub enrichments_max: Bound,
    pub bp_patterns_min: Bound,
    pub bp_patterns_max: Bound,
}

impl Default for ConstraintSpec {
    fn default() -> Self {
        use Direction::*;
        Self {
            cycle_length: Bound::new(
                "cycle_length",
                500.0,
                AtLeast,
                25_000.0,
                Some((468.9, 530.8)),
            ),
            fq: Bound::new("fq", 1.85, AtMost, 25_000.0, Some((1.768, 2.911))),
            fdh: Bound::new("fdh", 1.45, AtMost, 25_000.0, Some((1.429, 2.206))),
            cb: Bound::new("cb", 1200.0, AtMost, 25_000.0, Some((952.7, 1405.1))),
            pin_peak_bu: Bound::new(
                "pin_peak_bu",
                62.0,
                AtMost,
                25_000.0,
                Some((55.506, 68.044)),
            ),
            enrichments_min: Bound::new("n_enrichments", 2.0, AtLeast, 1_000.0, None),
            enrichments_max: Bound::new("n_enrichments", 3.0, AtMost, 1_000.0, None),
            bp_patterns_min: Bound::new("n_bp_patterns", 1.0, AtLeast, 1_000.0, None),
            bp_patterns_max: Bound::new("n_bp_patterns", 3.0, AtMost, 1_000.0, None),
        }
    }
}

impl ConstraintSpec {
    fn fom_bounds(&self) -> [&Bound; 5] {
        [
            &self.cycle_length,
            &self.fq,
            &self.fdh,
            &self.cb,
            &self.pin_peak_bu,
        ]
    }

    fn all_bounds(&self) -> [&Bound; 9] {
        [
            &self.cycle_length,
            &self.fq,
            &self.fdh,
            &self.cb,
            &self.pin_peak_bu,
            &self.enrichments_min,
            &self.enrichments_max,
            &self.bp_patterns_min,
            &self.bp_patterns_max,
        ]
    }

    pub fn scale_weights(&mut self, k: f64) {
        for b in [
            &mut self.cycle_length,
            &mut self.fq,
            &mut self.fdh,
            &mut self.cb,
            &mut self.pin_peak_bu,
            &mut self.enrichments_min,
            &mut self.enrichments_max,
            &mut self.bp_patterns_min,
            &mut self.bp_patterns_max,
        ] {
            b.weight *= k;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintTerm {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub violated: bool,
    /// γ·Φ.
    pub penalty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub objective: f64,
    pub lcoe: f64,
    pub penalty: f64,
    pub feasible: bool,
    pub terms: Vec<ConstraintTerm>,
}

/// `-LCOE - Σ γ_i Φ_i + 1[all satisfied]`; `batches` is (enrichments, BP patterns) of the fresh batch.
pub fn objective(
    foms: &FomSet,
    batches: (usize, usize),
    lcoe: f64,
    spec: &ConstraintSpec,
) -> ObjectiveBreakdown {
    let values = [
        foms.cycle_length,
        foms.fq,
        foms.fdh,
        foms.cb,
        foms.pin_peak_bu,
        batches.0 as f64,
        batches.0 as f64,
        batches.1 as f64,
        batches.1 as f64,
    ];
    let terms: Vec<ConstraintTerm> = spec
        .all_bounds()
        .iter()
        .zip(values)
        .map(|(b, x)| ConstraintTerm {
            name: b.name.clone(),
            value: x,
            bound: b.bound,
            violated: b.violated(x),
            penalty: b.weight * b.phi(x),
        })
        .collect();
    let penalty: f64 = terms.iter().map(|t| t.penalty).sum();
    let feasible = terms.iter().all(|t| !t.violated);
    let objective = -lcoe - penalty + if feasible { 1.0 } else { 0.0 };
    ObjectiveBreakdown {
        objective,
        lcoe,
        penalty,
        feasible,
        terms,
    }
}

/// Root-sum-square of range-normalized violations over the five FOM constraints.
pub fn normalized_distance(foms: &FomSet, spec: &ConstraintSpec) -> f64 {
    let values = [
        foms.cycle_length,
        foms.fq,
        foms.fdh,
        foms.cb,
        foms.pin_peak_bu,
    ];
    spec.fom_bounds()
        .iter()
        .zip(values)
        .filter(|(b, x)| b.violated(*x))
        .map(|(b, x)| {
            let (lo, hi) = b.range.unwrap_or((0.0, b.bound.abs()));
            let d = (x - b.bound) / (hi - lo);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}
