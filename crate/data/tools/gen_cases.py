"""Convert the MATPOWER IEEE 14- and 118-bus cases (via the pypower port) into
the JSON case schema used by `maopf`, and freeze reference power-flow
solutions produced by pypower's Newton solver for cross-checking.

In the 118-bus case only the 14 units at ACTIVE_118 are dispatchable
generators with reactive limits. The remaining 40 MATPOWER units, which carry
106 MW in total, are modelled as synchronous condensers: fixed active output,
unrestricted reactive output, and a bus voltage pinned to the MATPOWER set
point by a narrow band.

Usage: python3 data/tools/gen_cases.py   (run from the repository root)
"""
import json
import math

import numpy as np
from pypower.api import case14, case118, ppoption, runpf

TAP_GRID_118 = (0.9, 1.1, 0.0125)
# Half-width of the voltage band that holds a synchronous condenser at its
# set point; condensers are not optimisation controls.
CONDENSER_BAND = 1e-4
CONDENSER_Q_MVAR = 9999.0
ACTIVE_118 = [10, 12, 25, 26, 49, 54, 59, 61, 65, 66, 69, 80, 89, 100]
SWITCHABLE_SHUNTS_118 = [34, 44, 45, 46, 48, 74, 79, 82, 83, 105, 107, 110]


def kind_of(code):
    return {1: "pq", 2: "pv", 3: "slack"}[int(code)]


def emission_118(bus, c2):
    """Synthetic quadratic emission curve (lb/h, P in MW). Larger, cheaper
    units burn dirtier fuel: the quadratic term scales inversely with the
    cost curvature so that cost and emissions pull the dispatch apart."""
    if bus not in ACTIVE_118:
        return {"a": 0.0, "b": 0.0, "c": 0.0}
    a = round(1.6e-5 / c2, 6)
    b = round(4.0 + 0.004 * (bus % 7) * 100 / 4.0, 4)
    c = 40.0 + bus % 5 * 5.0
    return {"a": a, "b": b, "c": c}


def build_118():
    ppc = case118()
    bus, gen, branch, gencost = ppc["bus"], ppc["gen"], ppc["branch"], ppc["gencost"]
    condenser_v = {int(g[0]): min(max(float(g[5]), 0.95), 1.10)
                   for g in gen if int(g[0]) not in ACTIVE_118}
    buses = []
    for row in bus:
        b = int(row[0])
        v_min, v_max = 0.95, 1.10
        if b in condenser_v:
            v_min = condenser_v[b] - CONDENSER_BAND
            v_max = condenser_v[b] + CONDENSER_BAND
        buses.append({
            "id": b,
            "kind": kind_of(row[1]),
            "v_min": round(v_min, 6),
            "v_max": round(v_max, 6),
            "u_ref": 1.0,
            "p_load_mw": float(row[2]),
            "q_load_mvar": float(row[3]),
        })
    branches = []
    for row in branch:
        tap = None
        if row[8] != 0.0:
            tap = {"t_min": TAP_GRID_118[0], "t_max": TAP_GRID_118[1], "step": TAP_GRID_118[2]}
        branches.append({
            "from": int(row[0]), "to": int(row[1]),
            "r_pu": float(row[2]), "x_pu": float(row[3]), "b_pu": float(row[4]),
            "s_max_mva": 300.0, "tap": tap,
        })
    generators = []
    for g, c in zip(gen, gencost):
        b = int(g[0])
        active = b in ACTIVE_118
        pg = float(g[1])
        generators.append({
            "bus": b,
            "p_min_mw": 0.0 if active else pg,
            "p_max_mw": float(g[8]) if active else pg,
            "q_min_mvar": float(g[4]) if active else -CONDENSER_Q_MVAR,
            "q_max_mvar": float(g[3]) if active else CONDENSER_Q_MVAR,
            "cost": {"alpha": float(c[4]), "beta": float(c[5]), "gamma": float(c[6])},
            "emission": emission_118(b, float(c[4])),
        })
    shunts = []
    for row in bus:
        b, bs = int(row[0]), float(row[5])
        if b in SWITCHABLE_SHUNTS_118:
            shunts.append({"bus": b, "q_min_mvar": 0.0, "q_max_mvar": 50.0, "step_mvar": 1.0})
        elif bs != 0.0:
            shunts.append({"bus": b, "q_min_mvar": bs, "q_max_mvar": bs, "step_mvar": 1.0})
    case = {"base_mva": 100.0, "buses": buses, "branches": branches,
            "generators": generators, "shunts": shunts}

    # Base-case controls: MATPOWER dispatch and set points, snapped onto the
    # control grids (voltages clamped to [0.95, 1.10], taps rounded to 0.0125).
    slack_bus = int(bus[bus[:, 1] == 3][0, 0])
    p_gen = [float(g[1]) / 100.0 for g in gen if int(g[0]) != slack_bus]
    v_gen = [min(max(float(g[5]), 0.95), 1.10) for g in gen]
    tap_index = []
    for row in branch:
        if row[8] != 0.0:
            tap_index.append(int(round((row[8] - TAP_GRID_118[0]) / TAP_GRID_118[2])))
    shunt_index = []
    for s in shunts:
        bs = float(bus[bus[:, 0] == s["bus"]][0, 5])
        shunt_index.append(int(round((bs - s["q_min_mvar"]) / s["step_mvar"])))
    controls = {"p_gen_pu": p_gen, "v_gen_pu": v_gen, "tap_index": tap_index,
                "shunt_index": shunt_index}
    return case, controls


def build_14():
    ppc = case14()
    bus, gen, branch, gencost = ppc["bus"], ppc["gen"], ppc["branch"], ppc["gencost"]
    buses = [{
        "id": int(r[0]), "kind": kind_of(r[1]), "v_min": float(r[12]), "v_max": 1.10,
        "u_ref": 1.0, "p_load_mw": float(r[2]), "q_load_mvar": float(r[3]),
    } for r in bus]
    branches = []
    for r in branch:
        tap = None
        if r[8] != 0.0:
            tap = {"t_min": 0.9, "t_max": 1.1, "step": 0.001}
        branches.append({"from": int(r[0]), "to": int(r[1]), "r_pu": float(r[2]),
                         "x_pu": float(r[3]), "b_pu": float(r[4]), "s_max_mva": 9900.0,
                         "tap": tap})
    generators = [{
        "bus": int(g[0]), "p_min_mw": float(g[9]), "p_max_mw": float(g[8]),
        "q_min_mvar": float(g[4]), "q_max_mvar": float(g[3]),
        "cost": {"alpha": float(c[4]), "beta": float(c[5]), "gamma": float(c[6])},
        "emission": {"a": 0.0, "b": 0.0, "c": 0.0},
    } for g, c in zip(gen, gencost)]
    shunts = [{"bus": int(r[0]), "q_min_mvar": 0.0, "q_max_mvar": 50.0, "step_mvar": 1.0}
              for r in bus if r[5] != 0.0]
    case = {"base_mva": 100.0, "buses": buses, "branches": branches,
            "generators": generators, "shunts": shunts}
    controls = {
        "p_gen_pu": [float(g[1]) / 100.0 for g in gen[1:]],
        "v_gen_pu": [float(g[5]) for g in gen],
        "tap_index": [int(round((r[8] - 0.9) / 0.001)) for r in branch if r[8] != 0.0],
        "shunt_index": [int(round(r[5])) for r in bus if r[5] != 0.0],
    }
    return case, controls


def reference(ppc_fn, controls, case):
    """Solve with pypower using exactly the settings encoded in `controls`."""
    ppc = ppc_fn()
    bus, gen, branch = ppc["bus"], ppc["gen"], ppc["branch"]
    slack_bus = int(bus[bus[:, 1] == 3][0, 0])
    k = 0
    for i, g in enumerate(gen):
        if int(g[0]) != slack_bus:
            gen[i, 1] = controls["p_gen_pu"][k] * 100.0
            k += 1
        gen[i, 5] = controls["v_gen_pu"][i]
    k = 0
    for i, (r, b) in enumerate(zip(branch, case["branches"])):
        if b["tap"] is not None:
            branch[i, 8] = b["tap"]["t_min"] + controls["tap_index"][k] * b["tap"]["step"]
            k += 1
    bus[:, 4] = 0.0
    bus[:, 5] = 0.0
    for s, idx in zip(case["shunts"], controls["shunt_index"]):
        row = int(np.where(bus[:, 0] == s["bus"])[0][0])
        bus[row, 5] += s["q_min_mvar"] + idx * s["step_mvar"]
    r, ok = runpf(ppc, ppoption(VERBOSE=0, OUT_ALL=0, PF_TOL=1e-12))
    assert ok
    return {
        "source": "pypower runpf (Newton, PF_TOL=1e-12), no Q-limit enforcement",
        "vm": [float(v) for v in r["bus"][:, 7]],
        "va_deg": [float(v) for v in r["bus"][:, 8]],
        "p_gen_mw": [float(v) for v in r["gen"][:, 1]],
        "q_gen_mvar": [float(v) for v in r["gen"][:, 2]],
        "branch_s_from_mva": [float(math.hypot(p, q)) for p, q in r["branch"][:, [13, 14]]],
        "branch_s_to_mva": [float(math.hypot(p, q)) for p, q in r["branch"][:, [15, 16]]],
    }


def dump(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


if __name__ == "__main__":
    c118, k118 = build_118()
    c14, k14 = build_14()
    dump("data/ieee118.json", c118)
    dump("data/ieee118_base_controls.json", k118)
    dump("data/ieee14.json", c14)
    dump("data/ieee14_controls.json", k14)
    dump("data/reference/ieee14_pypower.json", reference(case14, k14, c14))
    dump("data/reference/ieee118_base_pypower.json", reference(case118, k118, c118))
