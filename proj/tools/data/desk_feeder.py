"""Writes the 33-bus desk feeder used by the bundled scenarios.

Trunk 0-17 with laterals at buses 1, 2 and 5; 60 MW nominal load on a
100 MVA base. Deterministic, no inputs.

    python3 tools/data/desk_feeder.py data/feeders/desk33.txt
"""
import sys

LOAD_KW = [0, 100, 90, 120, 60, 60, 200, 200, 60, 60, 45, 60, 60, 120, 60, 60, 60, 90,
           90, 90, 90, 90, 90, 420, 420, 60, 60, 60, 120, 200, 150, 210, 60]
PARENT = [None] + list(range(0, 17)) + [1, 18, 19, 20, 2, 22, 23, 5] + list(range(25, 32))
NOMINAL_MW = 60.0
BASE_MVA = 100.0


def main(path):
    total = sum(LOAD_KW)
    lines = ["# 33-bus radial desk feeder, 60 MW nominal", f"base_mva {BASE_MVA:g}", "slack 0 v 1.0",
             "bus 0 load_p 0 load_q 0 vmin 1 vmax 1"]
    for b in range(1, 33):
        p = NOMINAL_MW * LOAD_KW[b] / total / BASE_MVA
        lines.append(f"bus {b} load_p {p:.6f} load_q {0.45 * p:.6f} vmin 0.9 vmax 1.1")
    for b in range(1, 33):
        trunk = b <= 17
        r = (0.002 if trunk else 0.004) * (1.0 + 0.25 * ((7 * b) % 5))
        lines.append(f"branch {b} {PARENT[b]} r {r:.6f} x {1.6 * r:.6f} lmax 100")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main(sys.argv[1])
