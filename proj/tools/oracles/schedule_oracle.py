"""Reference solutions for the smart-charging QP.

Draws random instances (at most 20 EVs x 8 sub-intervals), solves each as a
dense QP with cvxpy, and writes the frozen fixture used by the C++ tests.

    python3 tools/oracles/schedule_oracle.py tests/data/schedule/instances.json
"""
import json
import sys

import cvxpy as cp
import numpy as np


def reachable_range(soc0, cap, lim, periods):
    lower = (soc0 - lim["soc_hi"]) * cap / lim["dt"]
    upper = (soc0 - lim["soc_lo"]) * cap / lim["dt"]
    a = b = 0.0
    for _ in range(periods):
        a = max(lower, a + lim["rate_lo"])
        b = min(upper, b + lim["rate_hi"])
    return a, b


def make_instance(rng):
    n_ev = int(rng.integers(1, 21))
    periods = int(rng.integers(2, 9))
    lim = {
        "rate_lo": -float(rng.uniform(0.5, 2.0)),
        "rate_hi": float(rng.uniform(0.5, 2.0)),
        "soc_lo": 0.2,
        "soc_hi": 0.95,
        "dt": 0.25,
    }
    # Baseline swings scale with the fleet so the rate box and SOC corridor bind.
    swing = n_ev * float(rng.uniform(0.5, 2.0))
    shape = rng.uniform(-1, 1) * np.arange(periods) + rng.normal(0, 1, periods)
    baseline = (50 + swing * shape).tolist()
    evs = []
    for _ in range(n_ev):
        cap = float(rng.uniform(0.3, 2.0))  # small packs make the SOC corridor bind
        soc0 = float(rng.uniform(0.25, 0.9))
        lo, hi = reachable_range(soc0, cap, lim, periods)
        demand = float(rng.uniform(lo, hi))
        evs.append({"demand": demand, "soc0": soc0, "capacity": cap})
    return {"baseline": baseline, "limits": lim, "evs": evs}


def solve(inst):
    lim = inst["limits"]
    base = np.array(inst["baseline"])
    n_ev, periods = len(inst["evs"]), len(base)
    rates = cp.Variable((n_ev, periods))
    netload = base - cp.sum(rates, axis=0)
    cons = [rates >= lim["rate_lo"], rates <= lim["rate_hi"]]
    for i, ev in enumerate(inst["evs"]):
        cons.append(cp.sum(rates[i, :]) == ev["demand"])
        soc = ev["soc0"] - cp.cumsum(rates[i, :]) * lim["dt"] / ev["capacity"]
        cons += [soc >= lim["soc_lo"], soc <= lim["soc_hi"]]
    prob = cp.Problem(cp.Minimize(cp.sum_squares(cp.diff(netload))), cons)
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12, max_iter=500)
    assert prob.status == cp.OPTIMAL, prob.status
    return float(prob.value), (base - rates.value.sum(axis=0)).tolist()


def main(out_path):
    rng = np.random.default_rng(20240601)
    cases = []
    for _ in range(20):
        inst = make_instance(rng)
        value, netload = solve(inst)
        inst["objective"] = value
        inst["netload"] = netload
        cases.append(inst)
    with open(out_path, "w") as fh:
        json.dump({"instances": cases}, fh, indent=1)


if __name__ == "__main__":
    main(sys.argv[1])
