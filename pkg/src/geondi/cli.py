"""Command line front-end: ``geondi certify|run|compare``.

Exit codes: 0 success, 2 configuration error, 3 the run diverged (expected
for the Euler baseline flip scenario), 4 certification failed.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import ConfigError, load_scenario
from . import sim

EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_UNCERTIFIED = 4


def _certify(args) -> int:
    cfg = load_scenario(args.config)
    report = sim.certify(cfg, with_sensor=not args.skip_sensor)
    print(f"scenario {cfg.name}")
    for line in report.lines():
        print(line)
    return 0 if report.certified else EXIT_UNCERTIFIED


def _run(args) -> int:
    cfg = load_scenario(args.config)
    out = args.out if args.out is not None else cfg.output.dir
    res = sim.run(cfg, out_dir=out)
    for line in res.summary.lines():
        print(line)
    print(f"wrote {Path(out) / (cfg.name + '.csv')}")
    return EXIT_DIVERGED if res.summary.unstable else 0


def _run_one(path: str, out):
    cfg = load_scenario(path)
    res = sim.run(cfg, out_dir=out)
    return cfg, res.summary


def _compare(args) -> int:
    if len(args.configs) < 2:
        print("compare needs at least two scenario files", file=sys.stderr)
        return EXIT_CONFIG
    for p in args.configs:  # validate everything before spending time simulating
        load_scenario(p)
    out = args.out
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_run_one, args.configs, [out] * len(args.configs)))
    else:
        results = [_run_one(p, out) for p in args.configs]
    names = [cfg.name for cfg, _ in results]
    if len(set(names)) != len(names):
        # merge by scenario id; duplicate ids get the file order appended
        for i, (cfg, s) in enumerate(results):
            s.name = f"{cfg.name}#{i}"
    summaries = [s for _, s in results]
    print(sim.compare(summaries))
    ff = [(cfg, s) for cfg, s in results if cfg.controller.type == "geometric"]
    with_ff = [s for cfg, s in ff if cfg.controller.feedforward]
    without = [s for cfg, s in ff if not cfg.controller.feedforward]
    if with_ff and without:
        print(sim.feedforward_effort(with_ff[0], without[0]))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="geondi", description="Geometric NDI attitude control scenarios.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("certify", help="Hurwitz check, LMI verdicts and bandwidth ratios")
    c.add_argument("config")
    c.add_argument("--skip-sensor", action="store_true", help="skip the informational cascade LMI with sensor states")
    c.set_defaults(func=_certify)

    r = sub.add_parser("run", help="simulate one scenario and write CSV + summary")
    r.add_argument("config")
    r.add_argument("--out", default=None, help="output directory (default: output.dir of the scenario)")
    r.set_defaults(func=_run)

    m = sub.add_parser("compare", help="simulate several scenarios and print a side-by-side table")
    m.add_argument("configs", nargs="+")
    m.add_argument("--out", default=None, help="also write per-run CSV and summaries here")
    m.add_argument("--jobs", type=int, default=1, help="run scenarios in parallel processes")
    m.set_defaults(func=_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
