//! Fresh fuel types available for the reload batch.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreshFuelType {
    pub id: String,
    /// U-235 weight percent.
    pub enrichment: f64,
    pub ifba_rods: u32,
    pub waba_rods: u32,
}

impl FreshFuelType {
    pub fn has_waba(&self) -> bool {
        self.waba_rods > 0
    }

    pub fn bp_pattern(&self) -> (u32, u32) {
        (self.ifba_rods, self.waba_rods)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogFile {
    pub schema_version: u32,
    pub types: Vec<FreshFuelType>,
}

#[derive(Debug, Clone)]
pub struct FuelCatalog {
    types: Vec<FreshFuelType>,
    waba_free: Vec<usize>,
}

impl FuelCatalog {
    pub fn new(types: Vec<FreshFuelType>) -> Result<Self> {
        let bad = |m: String| Err(Error::Config(format!("catalog: {m}")));
        if types.is_empty() {
            return bad("no fuel types".into());
        }
        let mut ids = HashSet::new();
        let mut combos = HashSet::new();
        for t in &types {
            if !ids.insert(t.id.as_str()) {
                return bad(format!("duplicate id {}", t.id));
            }
            if !(t.enrichment > 0.0 && t.enrichment < 20.0) {
                return bad(format!(
                    "{}: enrichment {} outside (0, 20)",
                    t.id, t.enrichment
                ));
            }
            if !combos.insert((t.enrichment.to_bits(), t.ifba_rods, t.waba_rods)) {
                return bad(format!("{}: duplicates another type's composition", t.id));
            }
        }
        let waba_free: Vec<usize> = (0..types.len()).filter(|&i| !types[i].has_waba()).collect();
        if waba_free.is_empty() {
            return bad("at least one WABA-free type is required for control-rod locations".into());
        }
        Ok(Self { types, waba_free })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: CatalogFile =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("catalog: {e}")))?;
        if f.schema_version != 1 {
            return Err(Error::Config(format!(
                "catalog: unsupported schema_version {}",
                f.schema_version
            )));
        }
        Self::new(f.types)
    }

    pub fn default_catalog() -> Self {
        Self::from_json(include_str!("../../data/catalog.json")).expect("embedded catalog is valid")
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn get(&self, i: usize) -> &FreshFuelType {
        &self.types[i]
    }

    pub fn types(&self) -> &[FreshFuelType] {
        &self.types
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.types.iter().position(|t| t.id == id)
    }

    pub fn waba_free(&self) -> &[usize] {
        &self.waba_free
    }

    pub fn enrichment_range(&self) -> (f64, f64) {
        self.types
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| {
                (lo.min(t.enrichment), hi.max(t.enrichment))
            })
    }

    pub fn max_ifba(&self) -> u32 {
        self.types.iter().map(|t| t.ifba_rods).max().unwrap_or(0)
    }

    pub fn max_waba(&self) -> u32 {
        self.types.iter().map(|t| t.waba_rods).max().unwrap_or(0)
    }
}
