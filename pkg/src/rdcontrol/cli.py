"""Command-line front end.

    rdc <experiment> [--config cfg.json] [--out DIR] [--format csv|svg] [--set key=value ...]

Exit status: 0 success, 2 invalid configuration (nothing written), 3 numerical
failure (a diagnostics JSON is written). ``RDC_LOG`` sets the log level.
"""
from __future__ import annotations

import argparse
import enum
import json
import logging
import math
import os
import sys
import time
import traceback
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import control, evolve, export, steady, wave
from .reaction import ClassificationError, Nonlinearity, ReactionRangeError, Variant, classify

log = logging.getLogger("rdcontrol")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


class Experiment(str, enum.Enum):
    PATH = "path"
    PATH_TO_BARRIER = "path-to-barrier"
    BARRIER = "barrier"
    MU_STAR = "mu-star"
    SIMULATE = "simulate"
    OMEGA = "omega"
    WAVE = "wave"
    STAIRCASE = "staircase"
    QUASISTATIC = "quasistatic"
    MIN_TIME = "min-time"


class ConfigError(ValueError):
    pass


def _default_nl() -> dict:
    return {"kind": "cubic_bistable", "theta": 1.0 / 3.0}


@dataclass
class RunConfig:
    """Every knob of a run; the resolved instance is echoed into the summary."""

    experiment: Experiment
    nonlinearity: dict = field(default_factory=_default_nl)
    mu: float = 1.0
    N: int = 2
    R: float | None = 10.0
    measure: float | None = None  # ball of this measure instead of R
    length: float | None = None  # interval of this length (N = 1)
    nr: int = 100
    dt: float = 0.05
    path_tol: float = 0.02
    u0: float = 0.0
    boundary: float = 0.0
    T: float = 100.0
    T_hi: float = 100.0
    eps: float = 0.01
    target: float | None = None  # default: theta
    dwell: float = 4.0
    max_doublings: int = 4
    rate_cap: float | None = None
    max_iter: int = 400
    polish_iter: int = 2000
    beta0: float = 100.0
    omega_tol: float = 1e-8
    snapshots: int = 50

    def resolved_R(self) -> float:
        if self.length is not None:
            return 0.5 * self.length
        if self.measure is not None:
            return steady.ball_radius(self.N, self.measure)
        return float(self.R)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["experiment"] = self.experiment.value
        d["R_resolved"] = self.resolved_R()
        return d


_POSITIVE = ("mu", "nr", "dt", "path_tol", "T", "T_hi", "eps", "dwell", "beta0", "omega_tol")
_UNIT = ("u0", "boundary")


def build_config(experiment: str, raw: dict) -> RunConfig:
    try:
        exp = Experiment(experiment)
    except ValueError:
        raise ConfigError(f"unknown experiment {experiment!r}") from None
    known = {f.name for f in fields(RunConfig)} - {"experiment"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = RunConfig(experiment=exp, **raw)
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        if f.name in ("nonlinearity", "experiment") or v is None:
            continue
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{f.name} must be numeric, got {v!r}")
        if not math.isfinite(v):
            raise ConfigError(f"{f.name} must be finite")
    for name in _POSITIVE:
        if not getattr(cfg, name) > 0:
            raise ConfigError(f"{name} must be positive")
    for name in ("R", "measure", "length", "rate_cap"):
        v = getattr(cfg, name)
        if v is not None and not v > 0:
            raise ConfigError(f"{name} must be positive")
    for name in _UNIT:
        if not 0.0 <= getattr(cfg, name) <= 1.0:
            raise ConfigError(f"{name} must lie in [0, 1]")
    if cfg.N not in (1, 2, 3) or isinstance(cfg.N, float):
        raise ConfigError("N must be 1, 2 or 3")
    if cfg.length is not None and cfg.N != 1:
        raise ConfigError("length describes an interval and needs N = 1")
    if cfg.length is None and cfg.measure is None and cfg.R is None:
        raise ConfigError("one of R, measure or length is required")
    if int(cfg.nr) != cfg.nr or cfg.nr < 50:
        raise ConfigError("nr must be an integer >= 50")
    cfg.nr = int(cfg.nr)
    if not isinstance(cfg.nonlinearity, dict):
        raise ConfigError("nonlinearity must be an object")
    try:
        nl = Nonlinearity.from_dict(cfg.nonlinearity)
        classify(nl)
    except (KeyError, ValueError, TypeError) as err:
        raise ConfigError(f"bad nonlinearity: {err}") from None
    if cfg.target is not None and not 0.0 <= cfg.target <= 1.0:
        raise ConfigError("target must lie in [0, 1]")
    return cfg


# ---------------------------------------------------------------------------
# experiment runners: each returns (summary fields, tables, plots)
# tables: {suffix: (header, columns)}; plots: {suffix: (series, xlabel, ylabel)}


def _grid(cfg: RunConfig) -> evolve.Grid:
    return evolve.Grid(N=cfg.N, R=cfg.resolved_R(), nr=cfg.nr, dt=cfg.dt, mu=cfg.mu)


def _target(cfg: RunConfig, nl: Nonlinearity) -> float:
    if cfg.target is not None:
        return cfg.target
    th = classify(nl).theta
    if th is None:
        raise ConfigError("no default target: the nonlinearity has no threshold")
    return th


def _profiles_table(profiles) -> tuple[list[str], list]:
    a = np.concatenate([np.full(p.r.size, p.a) for p in profiles])
    r = np.concatenate([p.r for p in profiles])
    u = np.concatenate([p.u for p in profiles])
    v = np.concatenate([p.v for p in profiles])
    return ["a", "r", "u", "v"], [a, r, u, v]


def _snapshots(traj: evolve.Trajectory, grid: evolve.Grid, k: int) -> tuple[list[str], list]:
    idx = np.unique(np.linspace(0, len(traj.times) - 1, min(k, len(traj.times))).round().astype(int))
    t = np.repeat(traj.times[idx], grid.nr + 1)
    r = np.tile(grid.r, idx.size)
    u = traj.states[idx].ravel()
    return ["t", "r", "u"], [t, r, u]


def _schedule_plot(sched):
    return [(sched.times, sched.values)], "t", "a"


def _run_path(cfg, nl):
    R = cfg.resolved_R()
    if cfg.experiment is Experiment.PATH:
        path = steady.build_path(nl, cfg.mu, cfg.N, R, cfg.path_tol)
    else:
        path = steady.path_to_minimal_barrier(nl, cfg.mu, cfg.N, R, cfg.path_tol)
    summary = {"profiles": len(path), "continuity_bound": path.continuity_bound,
               "trace_min": float(path.trace.min()), "trace_max": float(path.trace.max())}
    tables = {"": (["a", "trace"], [path.centers, path.trace]),
              "profiles": _profiles_table(path.profiles)}
    plots = {"": ([(path.centers, path.trace)], "a", "trace"),
             "phase": ([(p.u, p.v) for p in path.profiles], "u", "v")}
    return summary, tables, plots


def _run_barrier(cfg, nl):
    bars = steady.find_barriers(nl, cfg.mu, cfg.N, cfg.resolved_R())
    summary = {"count": len(bars), "centers": [b.center_value for b in bars],
               "maxima": [float(b.profile.u.max()) for b in bars]}
    tables = {"": _profiles_table([b.profile for b in bars]) if bars else (["a", "r", "u", "v"], [[]] * 4)}
    plots = {"": ([(b.profile.r, b.profile.u) for b in bars], "r", "u")} if bars else {}
    return summary, tables, plots


def _run_mu_star(cfg, nl):
    R = cfg.resolved_R()
    if cfg.length is not None:
        dom = steady.Interval(cfg.length)
        m = cfg.length
    else:
        dom = steady.Ball(cfg.N, R)
        m = steady.ball_measure(cfg.N, R)
    lb = steady.mu_star_lower_bound(nl, cfg.N, m)
    upper = steady.mu_star_upper_bound(nl, steady.lambda1(dom))
    numeric = steady.mu_star_numeric(nl, cfg.N, R)
    summary = {"lower": lb.value, "lower_delta": lb.delta, "lower_applicable": lb.applicable,
               "upper": upper, "numeric": numeric, "measure": m,
               "bracketed": bool(lb.value <= numeric <= upper)}
    return summary, {}, {}


def _run_simulate(cfg, nl):
    grid = _grid(cfg)
    sched = evolve.ControlSchedule.constant(cfg.boundary, cfg.T, cfg.dt)
    traj = evolve.simulate(nl, grid, cfg.u0, sched)
    summary = {"T": sched.T, "steps": sched.nt, "umin": float(traj.umin.min()),
               "umax": float(traj.umax.max()), "terminal_max": float(traj.terminal.max()),
               "terminal_min": float(traj.terminal.min())}
    tables = {"": _snapshots(traj, grid, cfg.snapshots), "schedule": (["t", "a"], [sched.times, sched.values])}
    idx = np.unique(np.linspace(0, len(traj.times) - 1, min(cfg.snapshots, len(traj.times))).round().astype(int))
    plots = {"": ([(grid.r, traj.states[i]) for i in idx], "r", "u")}
    return summary, tables, plots


def _run_omega(cfg, nl):
    grid = _grid(cfg)
    res = evolve.omega_classify(nl, grid, cfg.u0, cfg.boundary, T_max=cfg.T, tol=cfg.omega_tol)
    summary = {"kind": res.kind.value, "time": res.time, "rate": res.rate,
               "max": float(res.field.max()), "min": float(res.field.min())}
    tables = {"": (["t", "r", "u"], [np.full(grid.nr + 1, res.time), grid.r, res.field])}
    plots = {"": ([(grid.r, res.field)], "r", "u")}
    return summary, tables, plots


def _run_wave(cfg, nl):
    if classify(nl).variant is Variant.BISTABLE_F1_ZERO:
        sol = wave.stationary_profile(nl, cfg.mu)
    else:
        sol = wave.wave_profile(nl, cfg.mu)
    summary = {"speed": sol.speed, "samples": int(sol.U.size), "residual": sol.residual(nl)}
    return summary, {"": (["xi", "U"], [sol.xi, sol.U])}, {"": ([(sol.xi, sol.U)], "xi", "U")}


def _control_tables(cfg, grid, sched, traj):
    tables = {"": (["t", "a"], [sched.times, sched.values]),
              "states": _snapshots(traj, grid, cfg.snapshots)}
    return tables, {"": _schedule_plot(sched)}


def _run_staircase(cfg, nl):
    grid = _grid(cfg)
    path = steady.build_path(nl, cfg.mu, cfg.N, grid.R, cfg.path_tol)
    sched, traj, dwell = control.staircase_with_doubling(nl, path, grid, cfg.u0, cfg.dwell, cfg.eps,
                                                         max_doublings=cfg.max_doublings)
    th = path.profiles[-1].u[-1]
    summary = {"T": sched.T, "dwell": dwell, "waypoints": len(path),
               "terminal_error": traj.terminal_distance(th),
               "a_min": float(sched.values.min()), "a_max": float(sched.values.max())}
    tables, plots = _control_tables(cfg, grid, sched, traj)
    return summary, tables, plots


def _problem(cfg, nl, objective=control.Objective.TERMINAL_MISMATCH):
    return control.OptimizationProblem(nl, _grid(cfg), cfg.u0, _target(cfg, nl), eps=cfg.eps,
                                       T=cfg.T, rate_cap=cfg.rate_cap, objective=objective)


def _run_quasistatic(cfg, nl):
    prob = _problem(cfg, nl, control.Objective.CONTROL_SMOOTHNESS)
    res = control.quasistatic_optimize(prob, beta0=cfg.beta0, max_iter=cfg.max_iter)
    summary = {"T": prob.T, "steps": prob.nt, "terminal_error": res.terminal_error,
               "iterations": res.iterations, **res.terms}
    tables, plots = _control_tables(cfg, prob.timed_grid, res.schedule, res.trajectory)
    return summary, tables, plots


def _run_min_time(cfg, nl):
    prob = _problem(cfg, nl)
    T_min, res, probes = control.min_time_search(prob, T_hi=cfg.T_hi, max_iter=cfg.max_iter,
                                                 polish_iter=cfg.polish_iter)
    a = res.schedule.values[1:]
    summary = {"T_min": T_min, "terminal_error": res.terminal_error, "probes": len(probes),
               "bang_bang_fraction": float(np.mean(np.minimum(a, 1 - a) <= 0.05)) if a.size else 1.0}
    tables = {"": (["t", "a"], [res.schedule.times, res.schedule.values]),
              "probes": (["T", "feasible", "terminal_error"],
                         [[p.T for p in probes], [p.feasible for p in probes],
                          [p.terminal_error for p in probes]])}
    return summary, tables, {"": _schedule_plot(res.schedule)}


RUNNERS = {
    Experiment.PATH: _run_path,
    Experiment.PATH_TO_BARRIER: _run_path,
    Experiment.BARRIER: _run_barrier,
    Experiment.MU_STAR: _run_mu_star,
    Experiment.SIMULATE: _run_simulate,
    Experiment.OMEGA: _run_omega,
    Experiment.WAVE: _run_wave,
    Experiment.STAIRCASE: _run_staircase,
    Experiment.QUASISTATIC: _run_quasistatic,
    Experiment.MIN_TIME: _run_min_time,
}

NUMERICAL_ERRORS = (
    evolve.StepError,
    steady.BlowUpError,
    steady.ThresholdUndefinedError,
    steady.PathRefinementError,
    control.HorizonError,
    control.StaircaseError,
    control.PenaltyError,
    wave.WaveSearchError,
    FloatingPointError,
)
VALIDATION_ERRORS = (ConfigError, steady.PreconditionError, evolve.AdmissibilityError,
                     ClassificationError, ReactionRangeError)


def _name(cfg: RunConfig, digest: str, suffix: str, ext: str) -> str:
    stem = cfg.experiment.value if not suffix else f"{cfg.experiment.value}-{suffix}"
    return f"{stem}-{digest}.{ext}"


def run(cfg: RunConfig, out: Path, fmt: str = "csv") -> tuple[int, dict]:
    """Execute one experiment and write its artifacts into ``out``."""
    resolved = cfg.to_dict()
    digest = export.config_hash(resolved)
    nl = Nonlinearity.from_dict(cfg.nonlinearity)
    t0 = time.perf_counter()
    try:
        summary, tables, plots = RUNNERS[cfg.experiment](cfg, nl)
    except VALIDATION_ERRORS as err:
        log.error("invalid configuration: %s", err)
        return EXIT_INVALID, {"error": str(err)}
    except NUMERICAL_ERRORS as err:
        out.mkdir(parents=True, exist_ok=True)
        diag = {"config": resolved, "error": type(err).__name__, "message": str(err),
                "details": {k: v for k, v in vars(err).items() if not k.startswith("_")},
                "traceback": traceback.format_exc()}
        path = export.write_json(out / _name(cfg, digest, "diagnostics", "json"), diag)
        log.error("numerical failure: %s (see %s)", err, path)
        return EXIT_NUMERICAL, diag
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for suffix, (header, cols) in tables.items():
        files.append(export.write_csv(out / _name(cfg, digest, suffix, "csv"), header, cols).name)
    if fmt == "svg":
        for suffix, (series, xl, yl) in plots.items():
            files.append(export.write_svg(out / _name(cfg, digest, suffix, "svg"), series, xl, yl,
                                          title=cfg.experiment.value).name)
    summary_doc = {"experiment": cfg.experiment.value, "config": resolved, "hash": digest,
                   "result": summary, "files": sorted(files),
                   "elapsed_s": round(time.perf_counter() - t0, 3)}
    export.write_json(out / _name(cfg, digest, "", "json"), summary_doc)
    return EXIT_OK, summary_doc


def _parse_set(items: list[str]) -> dict:
    out = {}
    for item in items:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            out[key] = val
    return out


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="rdc", description=__doc__.splitlines()[0])
    parser.add_argument("experiment", choices=[e.value for e in Experiment])
    parser.add_argument("--config", type=Path, help="JSON file with RunConfig fields")
    parser.add_argument("--out", type=Path, default=Path("out"))
    parser.add_argument("--format", choices=("csv", "svg"), default="csv")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config field (JSON value)")
    args = parser.parse_args(argv)
    logging.basicConfig(level=os.environ.get("RDC_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        raw = {}
        if args.config is not None:
            raw = json.loads(args.config.read_text())
            if not isinstance(raw, dict):
                raise ConfigError("config file must hold a JSON object")
        raw.update(_parse_set(args.set))
        raw.pop("experiment", None)
        cfg = build_config(args.experiment, raw)
    except (ConfigError, OSError, json.JSONDecodeError, TypeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID
    code, doc = run(cfg, args.out, args.format)
    if code == EXIT_OK:
        print(json.dumps(export._jsonable(doc["result"]), sort_keys=True))
    elif code == EXIT_INVALID:
        print(f"error: {doc['error']}", file=sys.stderr)
    else:
        print(f"numerical failure: {doc['message']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
