"""Writes the bundled evening, midday and flat-load scenario configurations.

Duck-curve netload on the 60 MW desk feeder and a commute-shaped OD
multiplier on the Sioux Falls demand table, one value per 15-minute
interval. Deterministic, no inputs.

    python3 tools/data/scenarios.py data/scenarios
"""
import math
import os
import sys

SITES = [2, 3, 5, 8, 10, 11, 17, 18, 20, 22, 23]

COMMON = """traffic_net = ../siouxfalls/SiouxFalls_net.tntp
traffic_trips = ../siouxfalls/table1_trips.tntp
feeder = ../feeders/desk33.txt
capacity_scale = 0.1
base_mva = 100
interval_minutes = 15
sub_interval_minutes = 1
tau2_minutes = 60
rho = 3
seed = 7
f_ps_a = 0.25
f_ps_b = 12
f_uts_a = 1.5e-6
f_uts_b = 0.031
f_wt_a = 1e-4
f_wt_b = 0.95
"""


def bump(h, centre, width):
    return math.exp(-((h - centre) / width) ** 2)


def evening(h):
    return 52 + 26 * bump(h, 19.25, 1.4), 0.35 + 0.65 * bump(h, 18.5, 1.25)


def midday(h):
    return 66 - 18 * bump(h, 12.5, 1.8), 0.5 + 0.1 * bump(h, 12.25, 1.0)


def flat(h):
    return 60.0, 1.0


def write(path, title, start_interval, horizon, shape):
    hours = [(start_interval + t + 0.5) / 4 for t in range(horizon)]
    load, demand = zip(*(shape(h) for h in hours))
    with open(path, "w") as f:
        f.write(f"# {title}\n")
        f.write(COMMON)
        f.write(f"start_interval = {start_interval}\nhorizon = {horizon}\n")
        f.write("load_profile = " + ", ".join(f"{v:.3f}" for v in load) + "\n")
        f.write("demand_profile = " + ", ".join(f"{v:.4f}" for v in demand) + "\n")
        for k, node in enumerate(SITES, start=1):
            f.write(f"site = {k} {node} {node}\n")


def main(out):
    os.makedirs(out, exist_ok=True)
    write(os.path.join(out, "evening.cfg"), "Evening ramp 17:00-23:00", 68, 24, evening)
    write(os.path.join(out, "midday.cfg"), "Midday valley 09:00-15:00", 36, 24, midday)
    write(os.path.join(out, "flat60.cfg"), "Flat 1.0 p.u. load, full OD table, 18:00-20:00", 72, 8, flat)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/scenarios")
