//! Loading patterns and the structural rules they must satisfy.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::catalog::FuelCatalog;
use super::geometry::{BurnClass, CoreGeometry};
use super::inventory::Inventory;

/// What sits at one lattice position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Assembly {
    /// A new assembly of the given catalog type.
    Fresh { fuel_type: usize },
    /// Copy `copy` of a burned inventory group.
    Burned { group: usize, copy: usize },
}

/// Assembly choice at one decision location (replicated over its images).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Slot {
    Fresh { fuel_type: usize },
    Burned { group: usize },
}

/// Full-core assignment, indexed like the geometry lattice.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LoadingPattern {
    pub cells: Vec<Assembly>,
}

impl LoadingPattern {
    /// Replicates per-location choices over the eighth symmetry.
    pub fn from_slots(slots: &[Slot], center_type: usize, geometry: &CoreGeometry) -> Self {
        assert_eq!(slots.len(), geometry.n_locations());
        let mut cells = vec![
            Assembly::Fresh {
                fuel_type: center_type
            };
            geometry.n_positions()
        ];
        for (loc, slot) in slots.iter().enumerate() {
            for (copy, &pos) in geometry.images(loc).iter().enumerate() {
                cells[pos] = match *slot {
                    Slot::Fresh { fuel_type } => Assembly::Fresh { fuel_type },
                    Slot::Burned { group } => Assembly::Burned { group, copy },
                };
            }
        }
        Self { cells }
    }

    /// The choice at each decision location, read from its first image.
    pub fn slots(&self, geometry: &CoreGeometry) -> Vec<Slot> {
        (0..geometry.n_locations())
            .map(|loc| match self.cells[geometry.images(loc)[0]] {
                Assembly::Fresh { fuel_type } => Slot::Fresh { fuel_type },
                Assembly::Burned { group, .. } => Slot::Burned { group },
            })
            .collect()
    }

    pub fn is_fresh(&self, pos: usize) -> bool {
        matches!(self.cells[pos], Assembly::Fresh { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum StructuralViolation {
    /// A burned copy is missing, duplicated or out of range.
    Uniqueness {
        group: usize,
        detail: String,
    },
    FreshOnPeriphery {
        position: (i32, i32),
    },
    WabaUnderControlRod {
        position: (i32, i32),
    },
    /// Four fresh assemblies forming a 2×2 block (lower-left corner given).
    FreshSquare {
        corner: (i32, i32),
    },
    /// Wrong number of assemblies of a burn class.
    Count {
        class: BurnClass,
        expected: usize,
        found: usize,
    },
    CenterNotFresh,
    /// Copies of one decision location differ.
    Asymmetric {
        location: usize,
    },
    /// A fresh type index outside the catalog.
    UnknownType {
        position: (i32, i32),
    },
}

impl fmt::Display for StructuralViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniqueness { group, detail } => write!(f, "burned group {group}: {detail}"),
            Self::FreshOnPeriphery { position } => {
                write!(f, "fresh assembly on periphery at {position:?}")
            }
            Self::WabaUnderControlRod { position } => {
                write!(f, "WABA under control rod at {position:?}")
            }
            Self::FreshSquare { corner } => {
                write!(f, "2x2 block of fresh assemblies at {corner:?}")
            }
            Self::Count {
                class,
                expected,
                found,
            } => {
                write!(f, "{class:?} count {found}, expected {expected}")
            }
            Self::CenterNotFresh => write!(f, "center assembly is not fresh"),
            Self::Asymmetric { location } => {
                write!(f, "decision location {location} is not symmetric")
            }
            Self::UnknownType { position } => write!(f, "unknown fresh type at {position:?}"),
        }
    }
}

/// Checks every structural rule independently of how the pattern was built.
/// An empty result means the pattern is valid.
pub fn check_structural(
    pattern: &LoadingPattern,
    geometry: &CoreGeometry,
    catalog: &FuelCatalog,
    inventory: &Inventory,
) -> Vec<StructuralViolation> {
    let mut out = BTreeSet::new();
    let n = geometry.n_positions();
    if pattern.cells.len() != n {
        out.insert(StructuralViolation::Count {
            class: BurnClass::Fresh,
            expected: n,
            found: pattern.cells.len(),
        });
        return out.into_iter().collect();
    }

    // Uniqueness: each burned group's copies 0..m appear exactly once.
    let mut seen: Vec<Vec<usize>> = inventory
        .groups()
        .iter()
        .map(|g| vec![0; g.multiplicity])
        .collect();
    let mut counts = [0usize; 3];
    for (pos, cell) in pattern.cells.iter().enumerate() {
        match *cell {
            Assembly::Fresh { fuel_type } => {
                if fuel_type >= catalog.len() {
                    out.insert(StructuralViolation::UnknownType {
                        position: geometry.position(pos),
                    });
                    continue;
                }
                if pos != geometry.center() {
                    counts[0] += 1;
                }
                if geometry.is_periphery(pos) {
                    out.insert(StructuralViolation::FreshOnPeriphery {
                        position: geometry.position(pos),
                    });
                }
                if geometry.is_crd(pos) && catalog.get(fuel_type).has_waba() {
                    out.insert(StructuralViolation::WabaUnderControlRod {
                        position: geometry.position(pos),
                    });
                }
            }
            Assembly::Burned { group, copy } => {
                if group >= seen.len() || copy >= seen[group].len() {
                    out.insert(StructuralViolation::Uniqueness {
                        group,
                        detail: format!("copy {copy} does not exist"),
                    });
                    continue;
                }
                seen[group][copy] += 1;
                match inventory.group(group).burn_class {
                    BurnClass::Once => counts[1] += 1,
                    _ => counts[2] += 1,
                }
            }
        }
    }
    for (g, copies) in seen.iter().enumerate() {
        for (c, &k) in copies.iter().enumerate() {
            if k != 1 {
                out.insert(StructuralViolation::Uniqueness {
                    group: g,
                    detail: format!("copy {c} placed {k} times"),
                });
            }
        }
    }

    if !pattern.is_fresh(geometry.center()) {
        out.insert(StructuralViolation::CenterNotFresh);
    }
    for class in [BurnClass::Fresh, BurnClass::Once, BurnClass::Twice] {
        let expected = match class {
            BurnClass::Fresh => {
                n - 1 - inventory.count(BurnClass::Once) - inventory.count(BurnClass::Twice)
            }
            _ => inventory.count(class),
        };
        let found = counts[class as usize];
        if found != expected {
            out.insert(StructuralViolation::Count {
                class,
                expected,
                found,
            });
        }
    }

    for sq in geometry.squares() {
        if sq.iter().all(|&p| pattern.is_fresh(p)) {
            out.insert(StructuralViolation::FreshSquare {
                corner: geometry.position(sq[0]),
            });
        }
    }

    for loc in 0..geometry.n_locations() {
        let imgs = geometry.images(loc);
        let same = |a: &Assembly, b: &Assembly| match (a, b) {
            (Assembly::Fresh { fuel_type: x }, Assembly::Fresh { fuel_type: y }) => x == y,
            (Assembly::Burned { group: x, .. }, Assembly::Burned { group: y, .. }) => x == y,
            _ => false,
        };
        let first = &pattern.cells[imgs[0]];
        if imgs.iter().any(|&p| !same(first, &pattern.cells[p])) {
            out.insert(StructuralViolation::Asymmetric { location: loc });
        }
    }
    out.into_iter().collect()
}

/// Number of distinct enrichments and of distinct burnable-absorber patterns
/// among the fresh reload assemblies (the fixed center assembly excluded).
pub fn count_batches(
    pattern: &LoadingPattern,
    geometry: &CoreGeometry,
    catalog: &FuelCatalog,
) -> (usize, usize) {
    let mut enr = BTreeSet::new();
    let mut bp = BTreeSet::new();
    for (pos, cell) in pattern.cells.iter().enumerate() {
        if pos == geometry.center() {
            continue;
        }
        if let Assembly::Fresh { fuel_type } = *cell {
            let t = catalog.get(fuel_type);
            enr.insert(t.enrichment.to_bits());
            bp.insert(t.bp_pattern());
        }
    }
    (enr.len(), bp.len())
}
