"""Certify the shipped PID/PD gain set and print the Lyapunov certificates.

Usage: python scripts/certify_default_gains.py [scenario.yaml]
"""

import sys

import numpy as np

from geondi import lmi, sim
from geondi.config import ScenarioConfig, load_scenario
from geondi.controllers import rate_realization


def main(argv):
    cfg = load_scenario(argv[0]) if argv else ScenarioConfig(name="defaults")
    report = sim.certify(cfg)
    for line in report.lines():
        print(line)

    att = sim.attitude_block(cfg)
    res = lmi.solve_feasibility(lmi.build_attitude_lmi(att))
    if res.certificate is not None:
        P = res.certificate.values["P"]
        print(f"attitude P eigenvalues {np.array2string(np.linalg.eigvalsh(P), precision=4)}")
    m = lmi.build_cascade_matrices(att, rate_realization(sim.rate_compensator(cfg)))
    res = lmi.solve_feasibility(lmi.build_cascade_lmis(m))
    if res.certificate is not None:
        v = res.certificate.values
        print(f"cascade p11 {v['p11'][0, 0]:.4e}, p12 {v['p12'][0, 0]:.4e}")
    return 0 if report.certified else 4


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
