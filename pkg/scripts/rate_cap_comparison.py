"""Feasible horizon of the smooth (quasistatic) control with and without a rate cap.

With no cap, a cap, and half that cap, the horizon T is scanned upward and the
first T whose optimized schedule meets the terminal tolerance is logged.
Infeasible horizons keep their terminal error, so a tighter cap shows up as a
larger miss at equal T even when no horizon in the scan succeeds.

    python3 scripts/rate_cap_comparison.py --cap 0.04 --horizons 60 80 120 160
"""
from __future__ import annotations

import argparse
import csv
import logging
import time
from pathlib import Path

import numpy as np

from rdcontrol import Nonlinearity
from rdcontrol.control import Objective, OptimizationProblem, PenaltyError, quasistatic_optimize
from rdcontrol.evolve import Grid

log = logging.getLogger("rate_cap")


def first_feasible(nl, grid, target, cap, horizons, eps, beta0, max_iter, doublings, rows):
    label = "none" if cap is None else cap
    for T in horizons:
        prob = OptimizationProblem(nl, grid, 0.0, target, eps=eps, T=T, rate_cap=cap,
                                   objective=Objective.CONTROL_SMOOTHNESS)
        t0 = time.perf_counter()
        try:
            res = quasistatic_optimize(prob, beta0=beta0, max_iter=max_iter, max_doublings=doublings)
        except PenaltyError as err:
            rows.append([label, T, 0, err.terminal_error, err.max_rate, time.perf_counter() - t0])
            log.info("cap=%s T=%g infeasible (%s)", cap, T, err)
            continue
        rate = float(np.max(np.abs(np.diff(res.schedule.values) / np.diff(res.schedule.times))))
        ok = res.terminal_error <= eps and (cap is None or rate <= cap * (1 + 1e-3))
        rows.append([label, T, int(ok), res.terminal_error, rate, time.perf_counter() - t0])
        log.info("cap=%s T=%g feasible=%s err=%.4g max|a_t|=%.4g", cap, T, ok, res.terminal_error, rate)
        if ok:
            return T
    return float("inf")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cap", type=float, default=0.04, help="looser cap; the tighter one is half")
    ap.add_argument("--horizons", type=float, nargs="+", default=[60, 80, 120, 160])
    ap.add_argument("--mu", type=float, default=1.0)
    ap.add_argument("--R", type=float, default=10.0)
    ap.add_argument("--eps", type=float, default=0.01)
    ap.add_argument("--beta0", type=float, default=100.0)
    ap.add_argument("--max-iter", type=int, default=300)
    ap.add_argument("--doublings", type=int, default=6, help="penalty doublings before giving up")
    ap.add_argument("--out", type=Path, default=Path("out/rate-cap-comparison.csv"))
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    nl = Nonlinearity.cubic(1 / 3)
    grid = Grid(N=2, R=args.R, mu=args.mu)
    rows: list[list] = []
    found = {cap: first_feasible(nl, grid, 1 / 3, cap, sorted(args.horizons), args.eps, args.beta0,
                                 args.max_iter, args.doublings, rows)
             for cap in (None, args.cap, args.cap / 2)}
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rate_cap", "T", "feasible", "terminal_error", "max_rate", "seconds"])
        w.writerows(rows)
    for cap, T in found.items():
        print(f"rate_cap={cap if cap is not None else 'none'}: first feasible T = {T:g}")


if __name__ == "__main__":
    main()
