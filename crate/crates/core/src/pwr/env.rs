//! The loading-pattern design environment.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;
use serde_json::json;

use super::decode::{action_spec, decode_slots};
use super::economics::pattern_lcoe;
use super::embed::{embed, observation_len};
use super::external::ExternalEvaluator;
use super::objective::{normalized_distance, objective, ObjectiveBreakdown};
use super::pattern::{check_structural, count_batches, LoadingPattern, Slot};
use super::surrogate::{surrogate_evaluate, FomSet};
use super::PwrModel;
use crate::env_core::{ActionSpec, Environment, Evaluation};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Everything known about one evaluated pattern.
#[derive(Debug, Clone, Serialize)]
pub struct PatternEvaluation {
    pub pattern: LoadingPattern,
    pub foms: FomSet,
    pub batches: (usize, usize),
    pub breakdown: ObjectiveBreakdown,
    pub distance: f64,
    /// WABA picks on control-rod locations that were replaced.
    pub waba_replaced: usize,
}

pub struct PwrEnv {
    model: Arc<PwrModel>,
    spec: ActionSpec,
    rng: Rng,
    external: Option<ExternalEvaluator>,
}

impl PwrEnv {
    pub fn new(
        model: Arc<PwrModel>,
        rng: Rng,
        external: Option<ExternalEvaluator>,
    ) -> Result<Self> {
        let spec = action_spec(&model.geometry, &model.catalog, &model.inventory)?;
        Ok(Self {
            model,
            spec,
            rng,
            external,
        })
    }

    pub fn model(&self) -> &PwrModel {
        &self.model
    }

    pub fn evaluate_pattern(&mut self, action: &[usize]) -> Result<PatternEvaluation> {
        self.spec.validate(action)?;
        let m = &*self.model;
        let (slots, waba_replaced) =
            decode_slots(action, &m.geometry, &m.catalog, &m.inventory, &mut self.rng)?;
        let pattern = LoadingPattern::from_slots(&slots, m.inventory.center_type(), &m.geometry);
        debug_assert!(check_structural(&pattern, &m.geometry, &m.catalog, &m.inventory).is_empty());
        let foms = match &mut self.external {
            Some(ext) => ext.evaluate(&pattern, &m.geometry, &m.catalog, &m.inventory)?,
            None => surrogate_evaluate(
                &pattern,
                &m.geometry,
                &m.catalog,
                &m.inventory,
                &m.surrogate,
            ),
        };
        let lcoe = pattern_lcoe(&pattern, &foms, &m.catalog, &m.economics)?;
        if !lcoe.is_finite() {
            return Err(Error::Numeric(format!("LCOE evaluated to {lcoe}")));
        }
        let batches = count_batches(&pattern, &m.geometry, &m.catalog);
        let breakdown = objective(&foms, batches, lcoe, &m.constraints);
        let distance = normalized_distance(&foms, &m.constraints);
        Ok(PatternEvaluation {
            pattern,
            foms,
            batches,
            breakdown,
            distance,
            waba_replaced,
        })
    }

    /// Human-readable description of a pattern by decision location.
    pub fn describe_slots(&self, slots: &[Slot]) -> Vec<serde_json::Value> {
        let m = &*self.model;
        m.geometry
            .locations()
            .iter()
            .zip(slots)
            .map(|(l, s)| {
                let id = match *s {
                    Slot::Fresh { fuel_type } => m.catalog.get(fuel_type).id.clone(),
                    Slot::Burned { group } => m.inventory.group(group).id.clone(),
                };
                json!({"location": [l.x, l.y], "class": l.class, "assembly": id})
            })
            .collect()
    }
}

impl Environment for PwrEnv {
    fn action_spec(&self) -> &ActionSpec {
        &self.spec
    }

    fn observation_len(&self) -> usize {
        observation_len(&self.model.geometry)
    }

    fn evaluate(&mut self, action: &[usize]) -> Result<Evaluation> {
        let ev = self.evaluate_pattern(action)?;
        let m = &*self.model;
        let observation = embed(
            &ev.pattern,
            &ev.foms,
            &m.geometry,
            &m.catalog,
            &m.inventory,
            &m.embed,
        );
        let f = &ev.foms;
        let info = BTreeMap::from([
            ("lcoe".to_string(), ev.breakdown.lcoe),
            ("penalty".to_string(), ev.breakdown.penalty),
            (
                "feasible".to_string(),
                if ev.breakdown.feasible { 1.0 } else { 0.0 },
            ),
            ("distance".to_string(), ev.distance),
            ("cycle_length".to_string(), f.cycle_length),
            ("fq".to_string(), f.fq),
            ("fdh".to_string(), f.fdh),
            ("cb".to_string(), f.cb),
            ("pin_peak_bu".to_string(), f.pin_peak_bu),
            ("n_enrichments".to_string(), ev.batches.0 as f64),
            ("n_bp_patterns".to_string(), ev.batches.1 as f64),
        ]);
        let slots = ev.pattern.slots(&m.geometry);
        let payload = json!({
            "action": action,
            "loading": self.describe_slots(&slots),
            "foms": {
                "cycle_length_efpd": f.cycle_length,
                "fq": f.fq,
                "fdh": f.fdh,
                "cb_ppm": f.cb,
                "pin_peak_bu_gwd_thm": f.pin_peak_bu,
            },
            "objective": ev.breakdown,
            "distance": ev.distance,
        });
        Ok(Evaluation {
            objective: ev.breakdown.objective,
            observation,
            info,
            payload,
        })
    }
}
