"""Reference solutions for the relaxed branch-flow OPF.

Builds small radial feeders (2 to 50 buses, mostly random trees), solves the
second-order-cone program centrally with cvxpy, and writes the feeders plus a
fixture with objective, voltages and generation per feeder.

    python3 tools/oracles/opf_oracle.py tests/data/opf
"""
import json
import os
import sys

import cvxpy as cp
import numpy as np


def read_feeder(path):
    buses, branches, slack, slack_v = {}, [], None, 1.0
    for raw in open(path):
        toks = raw.split("#")[0].split()
        if not toks:
            continue
        if toks[0] == "slack":
            slack = int(toks[1])
            if len(toks) == 4:
                slack_v = float(toks[3]) ** 2
        elif toks[0] == "bus":
            kv = dict(zip(toks[2::2], map(float, toks[3::2])))
            buses[int(toks[1])] = kv
        elif toks[0] == "branch":
            kv = dict(zip(toks[3::2], map(float, toks[4::2])))
            branches.append((int(toks[1]), int(toks[2]), kv))
    return buses, branches, slack, slack_v


def solve(path, alpha, beta):
    buses, branches, slack, slack_v = read_feeder(path)
    ids = sorted(buses)
    ix = {b: k for k, b in enumerate(ids)}
    n = len(ids)
    p, q, v = cp.Variable(n), cp.Variable(n), cp.Variable(n)
    l, P, Q = cp.Variable(n), cp.Variable(n), cp.Variable(n)
    parent = {ix[c]: (ix[a], kv) for c, a, kv in branches}
    s = ix[slack]
    cons = [v[s] == slack_v, l[s] == 0, P[s] == 0, Q[s] == 0]
    cost = 0
    for b in ids:
        i, kv = ix[b], buses[b]
        lp, lq = kv.get("load_p", 0.0), kv.get("load_q", 0.0)
        gen = any(kv.get(k, 0.0) != 0.0 for k in ("pmin", "pmax"))
        if i == s or gen:
            g = p[i] + lp
            cost = cost + alpha * cp.square(g) + beta * g
        if i != s:
            cons += [p[i] + lp >= kv.get("pmin", 0.0), p[i] + lp <= kv.get("pmax", 0.0)]
            cons += [q[i] + lq >= kv.get("qmin", 0.0), q[i] + lq <= kv.get("qmax", 0.0)]
            cons += [v[i] >= kv.get("vmin", 0.9) ** 2, v[i] <= kv.get("vmax", 1.1) ** 2]
        children = [c for c, (a, _) in parent.items() if a == i]
        inflow_p = sum(P[c] - parent[c][1].get("r", 0.0) * l[c] for c in children)
        inflow_q = sum(Q[c] - parent[c][1].get("x", 0.0) * l[c] for c in children)
        cons += [p[i] == P[i] - inflow_p, q[i] == Q[i] - inflow_q]
    for i, (a, kv) in parent.items():
        r, x = kv.get("r", 0.0), kv.get("x", 0.0)
        cons += [v[a] == v[i] - 2 * (r * P[i] + x * Q[i]) + (r * r + x * x) * l[i]]
        cons += [l[i] >= 0, l[i] <= kv.get("lmax", 1e6)]
        cons += [cp.SOC(v[i] + l[i], cp.hstack([2 * P[i], 2 * Q[i], v[i] - l[i]]))]
    prob = cp.Problem(cp.Minimize(cost), cons)
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    assert prob.status == cp.OPTIMAL, prob.status
    gap = max([abs(v.value[i] * l.value[i] - P.value[i] ** 2 - Q.value[i] ** 2) for i in parent] + [0.0])
    vmin_binding = any(
        v.value[ix[b]] <= buses[b].get("vmin", 0.9) ** 2 + 1e-7 for b in ids if ix[b] != s
    )
    return {
        "objective": float(prob.value),
        "bus_ids": ids,
        "v": [float(x) for x in v.value],
        "generation": [float(p.value[ix[b]] + buses[b].get("load_p", 0.0)) for b in ids],
        "gap": float(gap),
        "vmin_binding": bool(vmin_binding),
    }


def random_tree(rng, n, load_scale, gen_buses=(), vmin=0.9, gen_range=2.0):
    lines = ["base_mva 100", "slack 0 v 1.0", "bus 0 vmin 1 vmax 1"]
    for b in range(1, n):
        lp = rng.uniform(0.2, 1.0) * load_scale
        lq = lp * rng.uniform(0.2, 0.6)
        extra = ""
        if b in gen_buses:
            extra = f" pmin {-0.5 * load_scale:.6f} pmax {gen_range * load_scale:.6f} qmin 0 qmax 0"
        lines.append(f"bus {b} load_p {lp:.6f} load_q {lq:.6f} vmin {vmin} vmax 1.1{extra}")
    for b in range(1, n):
        parent = int(rng.integers(max(0, b - 4), b))
        r = rng.uniform(0.002, 0.01)
        x = r * rng.uniform(1.0, 2.5)
        lines.append(f"branch {b} {parent} r {r:.6f} x {x:.6f} lmax 100")
    return "\n".join(lines) + "\n"


def main(out_dir):
    rng = np.random.default_rng(20240611)
    os.makedirs(out_dir, exist_ok=True)
    feeders = {
        "chain5": random_tree(rng, 5, 0.02),
        "tree10": random_tree(rng, 10, 0.02, gen_buses=(7,)),
        "tree20": random_tree(rng, 20, 0.01),
        "tree33": random_tree(rng, 33, 0.008, gen_buses=(12, 30)),
        "tree50": random_tree(rng, 50, 0.005, gen_buses=(25,)),
        "tree12_vmin": random_tree(rng, 12, 0.2, vmin=0.98, gen_buses=(6, 9), gen_range=20.0),
    }
    for name, doc in feeders.items():
        with open(os.path.join(out_dir, name + ".txt"), "w") as f:
            f.write(doc)
    cases = [
        ("two_bus", "../feeders/two_bus.txt", 1.0, 0.0),
        ("three_bus", "../feeders/three_bus.txt", 1.0, 0.5),
        ("chain5", "chain5.txt", 1.0, 0.0),
        ("tree10", "tree10.txt", 2.0, 0.3),
        ("tree20", "tree20.txt", 1.0, 1.0),
        ("tree33", "tree33.txt", 0.5, 0.1),
        ("tree50", "tree50.txt", 1.0, 0.2),
        ("tree12_vmin", "tree12_vmin.txt", 1.0, 0.0),
    ]
    fixture = []
    for name, rel, alpha, beta in cases:
        res = solve(os.path.join(out_dir, rel), alpha, beta)
        res.update({"name": name, "feeder": rel, "alpha1": alpha, "beta1": beta})
        fixture.append(res)
        print(name, res["objective"], "gap", res["gap"], "vmin binding", res["vmin_binding"])
    with open(os.path.join(out_dir, "expected.json"), "w") as f:
        json.dump({"instances": fixture}, f, indent=1)


if __name__ == "__main__":
    main(sys.argv[1])
