"""Generates the default PWR data files shipped in crates/core/data.

Run from the repository root:  python3 tools/gen_pwr_data.py
"""
import itertools
import json
import random

MAXX = {0: 7, 1: 7, 2: 7, 3: 7, 4: 6, 5: 6, 6: 5, 7: 3}


def in_core(x, y):
    return abs(y) in MAXX and abs(x) <= MAXX[abs(y)]


LATTICE = sorted(((x, y) for y in range(-7, 8) for x in range(-7, 8) if in_core(x, y)), key=lambda p: (p[1], p[0]))
assert len(LATTICE) == 193


def images(x, y):
    out = []
    for p in [(x, y), (y, x), (-y, x), (-x, y), (-x, -y), (-y, -x), (y, -x), (x, -y)]:
        if p not in out:
            out.append(p)
    return out


def periphery(x, y):
    return any(not in_core(x + dx, y + dy) for dx, dy in [(1, 0), (-1, 0), (0, 1), (0, -1)])


interior = [(x, y) for y in range(1, 8) for x in range(y + 1, 8) if in_core(x, y)]
diagonal = [(k, k) for k in range(1, 8) if in_core(k, k)]
axis = [(x, 0) for x in range(1, 8)]
assert len(interior) == 18 and len(diagonal) == 5 and len(axis) == 7

# Twice-burned: two interior periphery locations. Remaining periphery: once-burned.
twice = [(7, 3), (6, 5)]
per_int = [p for p in interior if periphery(*p)]
per_line = [p for p in diagonal + axis if periphery(*p)]
free_int = [p for p in interior if not periphery(*p)]
free_line = [p for p in diagonal + axis if not periphery(*p)]


def has_fresh_square(fresh_full):
    for (x, y) in fresh_full:
        if (x + 1, y) in fresh_full and (x, y + 1) in fresh_full and (x + 1, y + 1) in fresh_full:
            return True
    return False


def score(fi, fl):
    # Favour a ring of fresh fuel at mid radius.
    s = 0.0
    for (x, y) in fi:
        s += 8 * -abs((x * x + y * y) ** 0.5 - 4.5)
    for (x, y) in fl:
        s += 4 * -abs((x * x + y * y) ** 0.5 - 4.5)
    return s


best = None
for fi in itertools.combinations(free_int, 8):
    for fl in itertools.combinations(free_line, 6):
        full = {(0, 0)}
        for p in fi + fl:
            full.update(images(*p))
        if has_fresh_square(full):
            continue
        sc = score(fi, fl)
        if best is None or sc > best[0]:
            best = (sc, fi, fl)
_, fresh_int, fresh_line = best
fresh = set(fresh_int) | set(fresh_line)

# Action order: octant interior first, then the symmetry lines starting from the diagonal.
order = interior + diagonal + axis
locations = []
for (x, y) in order:
    kind = "interior" if (x, y) in interior else ("diagonal" if x == y else "axis")
    cls = "fresh" if (x, y) in fresh else ("twice" if (x, y) in twice else "once")
    locations.append({"x": x, "y": y, "kind": kind, "class": cls})

crd_octant = [(2, 0), (4, 0), (6, 0), (2, 2), (4, 4), (3, 1), (4, 2), (6, 2), (5, 3)]
crd = sorted({q for p in crd_octant for q in images(*p)}, key=lambda p: (p[1], p[0]))
assert len(crd) == 52
per = [p for p in LATTICE if periphery(*p)]

geometry = {
    "schema_version": 1,
    "name": "193-assembly four-loop PWR, eighth-core symmetry",
    "positions": [list(p) for p in LATTICE],
    "center": [0, 0],
    "decision_locations": locations,
    "periphery": [list(p) for p in per],
    "crd": [list(p) for p in crd],
}

# Fresh catalog: 4 enrichments x 6 burnable-absorber options.
enrichments = [4.00, 4.45, 4.75, 4.95]
bps = [(128, 0), (156, 0), (128, 12), (128, 24), (156, 12), (156, 24)]
types = []
for e in enrichments:
    for (i, w) in bps:
        types.append({"id": f"E{int(round(e * 100)):03d}-I{i}-W{w:02d}", "enrichment": e, "ifba_rods": i, "waba_rods": w})
catalog = {"schema_version": 1, "types": types}

# Burned inventory: one group per burned decision location (same multiplicity),
# each remembering where it sat in the previous cycle.
rng = random.Random(20230)
KINF_SLOPE = 0.0095


def kinf_fresh(e):
    return 1.30 + 0.10 * (e - 4.0)


groups = []
n_loc = len(locations)
once_locs = [i for i, l in enumerate(locations) if l["class"] == "once"]
twice_locs = [i for i, l in enumerate(locations) if l["class"] == "twice"]
fresh_locs = [i for i, l in enumerate(locations) if l["class"] == "fresh"]
# Once-burned groups were fresh last cycle, twice-burned ones were once-burned.
# Previous locations: once groups come from fresh locations of matching multiplicity,
# twice groups from once locations; fall back to any unused location.
mult = lambda i: 4 if locations[i]["kind"] != "interior" else 8
used = set()


def pick_prev(cands, m):
    for i in cands:
        if i not in used and mult(i) == m:
            used.add(i)
            return i
    for i in range(n_loc):
        if i not in used and mult(i) == m:
            used.add(i)
            return i
    raise SystemExit("no previous location left")


for cls, locs, lo, hi, prev_cands in [
    ("once", once_locs, 18.0, 26.0, fresh_locs),
    ("twice", twice_locs, 38.0, 48.0, once_locs),
]:
    for k, li in enumerate(locs):
        m = mult(li)
        src = rng.choice([t for t in types if t["waba_rods"] == 0])
        bu = round(rng.uniform(lo, hi), 3)
        groups.append({
            "id": f"{cls[0].upper()}{k + 1:02d}",
            "burn_class": cls,
            "multiplicity": m,
            "boc_burnup": bu,
            "boc_kinf": round(kinf_fresh(src["enrichment"]) - KINF_SLOPE * bu, 5),
            "source_fresh_type": src["id"],
            "prev_location": pick_prev(prev_cands, m),
        })

inventory = {
    "schema_version": 1,
    "center_fresh_type": "E400-I156-W00",
    "groups": groups,
}

economics = {
    "schema_version": 1,
    "eta": 0.33,
    "k_av": 0.97,
    "t_fo_days": 25.0,
    "t_mo_days": 5.0,
    "n_batches": 3,
    "discount_rate": 0.07,
    "feed_assay": 0.711,
    "tails_assay": 0.25,
    "ore_conversion_per_kg_feed": 80.0,
    "ore_lead_years": -2.0,
    "swu_cost": 100.0,
    "swu_lead_years": -1.5,
    "fabrication_per_kg": 300.0,
    "fabrication_lead_years": -1.0,
    "disposal_per_kg": 600.0,
    "disposal_lag_years": 5.0,
    "waba_unit_cost": 1500.0,
    "assembly_mass_kg": 461.0,
    "specific_power_gwd_per_t_per_efpd": 0.0385,
}

for name, obj in [("geometry", geometry), ("catalog", catalog), ("inventory", inventory), ("economics", economics)]:
    with open(f"crates/core/data/{name}.json", "w") as f:
        json.dump(obj, f, indent=1)
        f.write("\n")

for yy in range(7, -8, -1):
    row = ""
    for xx in range(-7, 8):
        if not in_core(xx, yy):
            row += "  "
            continue
        ox, oy = sorted((abs(xx), abs(yy)), reverse=True)
        if (ox, oy) == (0, 0):
            row += " C"
        elif (ox, oy) in fresh:
            row += " F"
        elif (ox, oy) in twice:
            row += " T"
        else:
            row += " o"
    print(row)
