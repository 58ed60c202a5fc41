//! Burned assemblies available for reloading, grouped by symmetry multiplicity.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::catalog::FuelCatalog;
use super::geometry::{BurnClass, CoreGeometry};
use crate::error::{Error, Result};

/// A set of 4 or 8 identical burned assemblies that move together under symmetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BurnedGroup {
    pub id: String,
    pub burn_class: BurnClass,
    pub multiplicity: usize,
    /// Assembly-average burnup at beginning of cycle, GWd/tHm.
    pub boc_burnup: f64,
    /// Infinite-medium multiplication proxy at beginning of cycle.
    pub boc_kinf: f64,
    pub source_fresh_type: String,
    /// Decision location the group occupied in the previous cycle.
    pub prev_location: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InventoryFile {
    pub schema_version: u32,
    pub center_fresh_type: String,
    pub groups: Vec<BurnedGroup>,
}

#[derive(Debug, Clone)]
pub struct Inventory {
    groups: Vec<BurnedGroup>,
    /// Catalog index of each group's original fresh type.
    source: Vec<usize>,
    center_type: usize,
    /// Group indices per (class, multiplicity), in file order.
    pools: BTreeMap<(BurnClass, usize), Vec<usize>>,
}

impl Inventory {
    pub fn new(f: InventoryFile, geometry: &CoreGeometry, catalog: &FuelCatalog) -> Result<Self> {
        let bad = |m: String| Err(Error::Config(format!("inventory: {m}")));
        if f.schema_version != 1 {
            return bad(format!("unsupported schema_version {}", f.schema_version));
        }
        let Some(center_type) = catalog.index_of(&f.center_fresh_type) else {
            return bad(format!(
                "center type {} not in catalog",
                f.center_fresh_type
            ));
        };
        if catalog.get(center_type).has_waba() {
            return bad("center assembly sits under control rods and cannot carry WABA".into());
        }
        let mut ids = HashSet::new();
        let mut prev = HashSet::new();
        let mut source = Vec::with_capacity(f.groups.len());
        let mut pools: BTreeMap<(BurnClass, usize), Vec<usize>> = BTreeMap::new();
        for (i, g) in f.groups.iter().enumerate() {
            if !ids.insert(g.id.as_str()) {
                return bad(format!("duplicate group id {}", g.id));
            }
            if g.burn_class == BurnClass::Fresh {
                return bad(format!(
                    "{}: burned groups must be once or twice burned",
                    g.id
                ));
            }
            if g.multiplicity != 4 && g.multiplicity != 8 {
                return bad(format!("{}: multiplicity must be 4 or 8", g.id));
            }
            if !(g.boc_burnup > 0.0) || !g.boc_kinf.is_finite() || g.boc_kinf <= 0.0 {
                return bad(format!("{}: burnup and kinf must be positive", g.id));
            }
            if g.prev_location >= geometry.n_locations() || !prev.insert(g.prev_location) {
                return bad(format!(
                    "{}: prev_location must be a distinct decision location index",
                    g.id
                ));
            }
            match catalog.index_of(&g.source_fresh_type) {
                Some(s) => source.push(s),
                None => {
                    return bad(format!(
                        "{}: source type {} not in catalog",
                        g.id, g.source_fresh_type
                    ))
                }
            }
            pools
                .entry((g.burn_class, g.multiplicity))
                .or_default()
                .push(i);
        }
        // Every burned decision location must be served by exactly one group.
        let mut slots: BTreeMap<(BurnClass, usize), usize> = BTreeMap::new();
        for l in geometry.locations() {
            if l.class != BurnClass::Fresh {
                *slots.entry((l.class, l.multiplicity())).or_default() += 1;
            }
        }
        let have: BTreeMap<(BurnClass, usize), usize> =
            pools.iter().map(|(k, v)| (*k, v.len())).collect();
        if have != slots {
            return bad(format!(
                "group counts {have:?} do not match burned locations {slots:?}"
            ));
        }
        Ok(Self {
            groups: f.groups,
            source,
            center_type,
            pools,
        })
    }

    pub fn from_json(text: &str, geometry: &CoreGeometry, catalog: &FuelCatalog) -> Result<Self> {
        let f: InventoryFile =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("inventory: {e}")))?;
        Self::new(f, geometry, catalog)
    }

    pub fn default_inventory(geometry: &CoreGeometry, catalog: &FuelCatalog) -> Result<Self> {
        Self::from_json(include_str!("../../data/inventory.json"), geometry, catalog)
    }

    pub fn groups(&self) -> &[BurnedGroup] {
        &self.groups
    }

    pub fn group(&self, i: usize) -> &BurnedGroup {
        &self.groups[i]
    }

    pub fn source_type(&self, i: usize) -> usize {
        self.source[i]
    }

    pub fn center_type(&self) -> usize {
        self.center_type
    }

    pub fn pool(&self, class: BurnClass, multiplicity: usize) -> &[usize] {
        self.pools
            .get(&(class, multiplicity))
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    pub fn count(&self, class: BurnClass) -> usize {
        self.groups
            .iter()
            .filter(|g| g.burn_class == class)
            .map(|g| g.multiplicity)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_inventory_counts() {
        let g = CoreGeometry::default_core();
        let c = FuelCatalog::default_catalog();
        let inv = Inventory::default_inventory(&g, &c).unwrap();
        assert_eq!(inv.count(BurnClass::Once), 88);
        assert_eq!(inv.count(BurnClass::Twice), 16);
        let ctype = c.get(inv.center_type());
        assert_eq!(
            (ctype.enrichment, ctype.ifba_rods, ctype.waba_rods),
            (4.0, 156, 0)
        );
        for gr in inv.groups() {
            let (lo, hi) = if gr.burn_class == BurnClass::Once {
                (18.0, 26.0)
            } else {
                (38.0, 48.0)
            };
            assert!(gr.boc_burnup >= lo && gr.boc_burnup <= hi);
        }
    }

    #[test]
    fn rejects_mismatched_counts() {
        let g = CoreGeometry::default_core();
        let c = FuelCatalog::default_catalog();
        let mut f: InventoryFile =
            serde_json::from_str(include_str!("../../data/inventory.json")).unwrap();
        f.groups.pop();
        assert!(Inventory::new(f, &g, &c).is_err());
    }
}
