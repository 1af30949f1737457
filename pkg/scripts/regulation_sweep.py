"""Regulation from Haar-random initial attitudes with the proportional gain pair.

Usage: python scripts/regulation_sweep.py [n_runs] [seed]
"""

import math
import sys
from pathlib import Path

import numpy as np

from geondi import sim
from geondi.config import load_scenario
from geondi.so3 import log_so3, random_rotation

SCENARIO = Path(__file__).resolve().parents[1] / "scenarios" / "proportional.yaml"


def main(argv):
    n = int(argv[0]) if argv else 20
    rng = np.random.default_rng(int(argv[1]) if len(argv) > 1 else 0)
    cfg = load_scenario(SCENARIO).replace(**{"sim.dt": 5e-3})
    finals = []
    for i in range(n):
        R0 = random_rotation(rng)
        angle = np.linalg.norm(log_so3(R0))
        res = sim.simulate(sim.Loop.from_config(cfg), R0, dt=cfg.sim.dt, duration=cfg.sim.duration)
        finals.append(res.summary.final_psi)
        print(f"run {i:3d}  initial angle {math.degrees(angle):7.2f} deg  final psi {finals[-1]:.3e}")
    print(f"worst final psi {max(finals):.3e}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
