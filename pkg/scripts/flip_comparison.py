"""Run the three double-flip scenarios and print the comparison table.

Usage: python scripts/flip_comparison.py [out_dir]
Writes one CSV and one summary per run when ``out_dir`` is given.
"""

import sys
from pathlib import Path

from geondi import sim
from geondi.config import load_scenario

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"
NAMES = ("flip_geometric_ff", "flip_geometric_noff", "flip_euler")


def main(argv):
    out = argv[0] if argv else None
    summaries = []
    for name in NAMES:
        res = sim.run(load_scenario(SCENARIOS / f"{name}.yaml"), out_dir=out)
        summaries.append(res.summary)
        print(f"{name}: {'unstable, ' + res.summary.reason if res.summary.unstable else 'completed'}")
    print(sim.compare(summaries))
    print(sim.feedforward_effort(summaries[0], summaries[1]))
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
