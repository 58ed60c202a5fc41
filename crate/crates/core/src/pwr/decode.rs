//! Maps a multi-discrete action onto a complete loading pattern.
//!
//! Fresh locations index the constant catalog. A WABA-bearing pick on a
//! control-rod location is replaced by a uniformly drawn WABA-free type.
//! Burned locations index the list of groups still available for their
//! (class, multiplicity); that list shrinks by one after each pick, so the
//! k-th burned location of a pool has cardinality `pool size - k`.

use rand::Rng as _;

use super::catalog::FuelCatalog;
use super::geometry::{BurnClass, CoreGeometry};
use super::inventory::Inventory;
use super::pattern::{LoadingPattern, Slot};
use crate::env_core::ActionSpec;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Action cardinalities in decision-location order.
pub fn action_cardinalities(
    geometry: &CoreGeometry,
    catalog: &FuelCatalog,
    inventory: &Inventory,
) -> Vec<usize> {
    let mut used: std::collections::BTreeMap<(BurnClass, usize), usize> = Default::default();
    geometry
        .locations()
        .iter()
        .map(|l| match l.class {
            BurnClass::Fresh => catalog.len(),
            class => {
                let key = (class, l.multiplicity());
                let rank = used.entry(key).or_default();
                let card = inventory.pool(class, l.multiplicity()).len() - *rank;
                *rank += 1;
                card
            }
        })
        .collect()
}

pub fn action_spec(
    geometry: &CoreGeometry,
    catalog: &FuelCatalog,
    inventory: &Inventory,
) -> Result<ActionSpec> {
    ActionSpec::new(action_cardinalities(geometry, catalog, inventory))
}

/// Per-location choices for an action. Also reports how many WABA picks were replaced.
pub fn decode_slots(
    action: &[usize],
    geometry: &CoreGeometry,
    catalog: &FuelCatalog,
    inventory: &Inventory,
    rng: &mut Rng,
) -> Result<(Vec<Slot>, usize)> {
    if action.len() != geometry.n_locations() {
        return Err(Error::Contract(format!(
            "action has {} entries, core has {} decision locations",
            action.len(),
            geometry.n_locations()
        )));
    }
    let mut pools: std::collections::BTreeMap<(BurnClass, usize), Vec<usize>> = Default::default();
    let mut replaced = 0;
    let mut slots = Vec::with_capacity(action.len());
    for (loc, (l, &a)) in geometry.locations().iter().zip(action).enumerate() {
        let slot = match l.class {
            BurnClass::Fresh => {
                if a >= catalog.len() {
                    return Err(Error::Contract(format!(
                        "fresh choice {a} at location {loc} out of range"
                    )));
                }
                let mut t = a;
                if geometry.location_is_crd(loc) && catalog.get(t).has_waba() {
                    let free = catalog.waba_free();
                    t = free[rng.random_range(0..free.len())];
                    replaced += 1;
                }
                Slot::Fresh { fuel_type: t }
            }
            class => {
                let avail = pools
                    .entry((class, l.multiplicity()))
                    .or_insert_with(|| inventory.pool(class, l.multiplicity()).to_vec());
                if a >= avail.len() {
                    return Err(Error::Contract(format!(
                        "burned choice {a} at location {loc} out of range (only {} left)",
                        avail.len()
                    )));
                }
                Slot::Burned {
                    group: avail.remove(a),
                }
            }
        };
        slots.push(slot);
    }
    Ok((slots, replaced))
}

pub fn decode_action(
    action: &[usize],
    geometry: &CoreGeometry,
    catalog: &FuelCatalog,
    inventory: &Inventory,
    rng: &mut Rng,
) -> Result<LoadingPattern> {
    let (slots, _) = decode_slots(action, geometry, catalog, inventory, rng)?;
    Ok(LoadingPattern::from_slots(
        &slots,
        inventory.center_type(),
        geometry,
    ))
}

/// Inverse of the burned-index part of decoding: the action that reproduces
/// the given slots (fresh entries map to their catalog index).
pub fn encode_slots(
    slots: &[Slot],
    geometry: &CoreGeometry,
    inventory: &Inventory,
) -> Result<Vec<usize>> {
    let mut pools: std::collections::BTreeMap<(BurnClass, usize), Vec<usize>> = Default::default();
    geometry
        .locations()
        .iter()
        .zip(slots)
        .map(|(l, s)| match *s {
            Slot::Fresh { fuel_type } => Ok(fuel_type),
            Slot::Burned { group } => {
                let avail = pools
                    .entry((l.class, l.multiplicity()))
                    .or_insert_with(|| inventory.pool(l.class, l.multiplicity()).to_vec());
                let k = avail.iter().position(|&g| g == group).ok_or_else(|| {
                    Error::Contract(format!("group {group} not available at this location"))
                })?;
                avail.remove(k);
                Ok(k)
            }
        })
        .collect()
}
