//! Core lattice, eighth-symmetry decision locations and special position sets.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationKind {
    /// Strictly inside the octant; 8 symmetric copies.
    Interior,
    /// On the diagonal symmetry line; 4 copies.
    Diagonal,
    /// On the axis symmetry line; 4 copies.
    Axis,
}

impl LocationKind {
    pub fn multiplicity(self) -> usize {
        match self {
            LocationKind::Interior => 8,
            LocationKind::Diagonal | LocationKind::Axis => 4,
        }
    }
}

/// Which inventory a decision location draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BurnClass {
    Fresh,
    Once,
    Twice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionLocation {
    pub x: i32,
    pub y: i32,
    pub kind: LocationKind,
    pub class: BurnClass,
}

impl DecisionLocation {
    pub fn multiplicity(&self) -> usize {
        self.kind.multiplicity()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryFile {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub positions: Vec<[i32; 2]>,
    pub center: [i32; 2],
    pub decision_locations: Vec<DecisionLocation>,
    pub periphery: Vec<[i32; 2]>,
    pub crd: Vec<[i32; 2]>,
}

/// Validated geometry with precomputed symmetry images and neighbours.
#[derive(Debug, Clone)]
pub struct CoreGeometry {
    pub name: String,
    positions: Vec<(i32, i32)>,
    index: HashMap<(i32, i32), usize>,
    center: usize,
    locations: Vec<DecisionLocation>,
    /// Lattice indices of each decision location's copies, in image order.
    images: Vec<Vec<usize>>,
    /// (decision location, copy) of every lattice position; `None` for the center.
    owner: Vec<Option<(usize, usize)>>,
    periphery: Vec<bool>,
    crd: Vec<bool>,
    neighbors: Vec<Vec<usize>>,
}

/// The eight images of an octant coordinate, duplicates removed, in a fixed order.
pub fn symmetry_images(x: i32, y: i32) -> Vec<(i32, i32)> {
    let mut out: Vec<(i32, i32)> = Vec::with_capacity(8);
    for p in [
        (x, y),
        (y, x),
        (-y, x),
        (-x, y),
        (-x, -y),
        (-y, -x),
        (y, -x),
        (x, -y),
    ] {
        if !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

const SCHEMA_VERSION: u32 = 1;

impl CoreGeometry {
    pub fn from_file(f: GeometryFile) -> Result<Self> {
        let bad = |m: String| Err(Error::Config(format!("geometry: {m}")));
        if f.schema_version != SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {}", f.schema_version));
        }
        let positions: Vec<(i32, i32)> = f.positions.iter().map(|p| (p[0], p[1])).collect();
        let mut index = HashMap::new();
        for (i, &p) in positions.iter().enumerate() {
            if index.insert(p, i).is_some() {
                return bad(format!("duplicate position {p:?}"));
            }
        }
        let lookup = |p: [i32; 2]| index.get(&(p[0], p[1])).copied();
        let Some(center) = lookup(f.center) else {
            return bad("center is not a lattice position".into());
        };
        if f.center != [0, 0] {
            return bad("center must be at (0, 0)".into());
        }

        let n = positions.len();
        let mut owner = vec![None; n];
        let mut images = Vec::with_capacity(f.decision_locations.len());
        for (li, loc) in f.decision_locations.iter().enumerate() {
            let expected = if loc.y == 0 {
                LocationKind::Axis
            } else if loc.x == loc.y {
                LocationKind::Diagonal
            } else {
                LocationKind::Interior
            };
            if !(loc.x >= loc.y && loc.y >= 0 && loc.x > 0) || loc.kind != expected {
                return bad(format!(
                    "decision location ({}, {}) is not a valid {:?} octant location",
                    loc.x, loc.y, loc.kind
                ));
            }
            let imgs = symmetry_images(loc.x, loc.y);
            debug_assert_eq!(imgs.len(), loc.multiplicity());
            let mut idx = Vec::with_capacity(imgs.len());
            for (copy, p) in imgs.into_iter().enumerate() {
                let Some(&pi) = index.get(&p) else {
                    return bad(format!(
                        "image {p:?} of ({}, {}) is not in the lattice",
                        loc.x, loc.y
                    ));
                };
                if owner[pi].is_some() {
                    return bad(format!("position {p:?} is covered twice"));
                }
                owner[pi] = Some((li, copy));
                idx.push(pi);
            }
            images.push(idx);
        }
        for (i, o) in owner.iter().enumerate() {
            if o.is_none() && i != center {
                return bad(format!(
                    "position {:?} is not covered by any decision location",
                    positions[i]
                ));
            }
        }
        let total: usize = f
            .decision_locations
            .iter()
            .map(|l| l.multiplicity())
            .sum::<usize>()
            + 1;
        if total != n {
            return bad(format!("multiplicities sum to {total}, lattice has {n}"));
        }

        let mask = |list: &[[i32; 2]], what: &str| -> Result<Vec<bool>> {
            let mut m = vec![false; n];
            for &p in list {
                match lookup(p) {
                    Some(i) => m[i] = true,
                    None => {
                        return Err(Error::Config(format!(
                            "geometry: {what} position {p:?} not in lattice"
                        )))
                    }
                }
            }
            Ok(m)
        };
        let periphery = mask(&f.periphery, "periphery")?;
        let crd = mask(&f.crd, "crd")?;
        if periphery[center] || crd[center] {
            return bad("center must not be in the periphery or CRD sets".into());
        }
        if (0..n).any(|i| periphery[i] && crd[i]) {
            return bad("periphery and CRD sets overlap".into());
        }
        // Special sets must respect the symmetry, otherwise replication could break rules.
        for (li, imgs) in images.iter().enumerate() {
            for set in [&periphery, &crd] {
                if imgs.iter().any(|&i| set[i] != set[imgs[0]]) {
                    return bad(format!(
                        "periphery/CRD sets are not symmetric at decision location {li}"
                    ));
                }
            }
        }

        let neighbors = positions
            .iter()
            .map(|&(x, y)| {
                [(1, 0), (-1, 0), (0, 1), (0, -1)]
                    .iter()
                    .filter_map(|(dx, dy)| index.get(&(x + dx, y + dy)).copied())
                    .collect()
            })
            .collect();

        Ok(Self {
            name: f.name,
            positions,
            index,
            center,
            locations: f.decision_locations,
            images,
            owner,
            periphery,
            crd,
            neighbors,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: GeometryFile =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("geometry: {e}")))?;
        Self::from_file(f)
    }

    pub fn default_core() -> Self {
        Self::from_json(include_str!("../../data/geometry.json"))
            .expect("embedded geometry is valid")
    }

    pub fn n_positions(&self) -> usize {
        self.positions.len()
    }

    pub fn position(&self, i: usize) -> (i32, i32) {
        self.positions[i]
    }

    pub fn positions(&self) -> &[(i32, i32)] {
        &self.positions
    }

    pub fn index_of(&self, x: i32, y: i32) -> Option<usize> {
        self.index.get(&(x, y)).copied()
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn locations(&self) -> &[DecisionLocation] {
        &self.locations
    }

    pub fn n_locations(&self) -> usize {
        self.locations.len()
    }

    pub fn images(&self, loc: usize) -> &[usize] {
        &self.images[loc]
    }

    pub fn owner(&self, pos: usize) -> Option<(usize, usize)> {
        self.owner[pos]
    }

    pub fn is_periphery(&self, pos: usize) -> bool {
        self.periphery[pos]
    }

    pub fn is_crd(&self, pos: usize) -> bool {
        self.crd[pos]
    }

    /// Whether a decision location sits under control rods (all its copies do, by symmetry).
    pub fn location_is_crd(&self, loc: usize) -> bool {
        self.crd[self.images[loc][0]]
    }

    pub fn location_is_periphery(&self, loc: usize) -> bool {
        self.periphery[self.images[loc][0]]
    }

    pub fn neighbors(&self, pos: usize) -> &[usize] {
        &self.neighbors[pos]
    }

    /// Number of physical assemblies of a class implied by the template (center excluded).
    pub fn class_count(&self, class: BurnClass) -> usize {
        self.locations
            .iter()
            .filter(|l| l.class == class)
            .map(|l| l.multiplicity())
            .sum()
    }

    /// Lattice indices of the lower-left corners of every 2×2 block fully inside the lattice.
    pub fn squares(&self) -> Vec<[usize; 4]> {
        self.positions
            .iter()
            .filter_map(|&(x, y)| {
                Some([
                    self.index_of(x, y)?,
                    self.index_of(x + 1, y)?,
                    self.index_of(x, y + 1)?,
                    self.index_of(x + 1, y + 1)?,
                ])
            })
            .collect()
    }
}
