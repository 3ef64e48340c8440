"""Admissible boundary controls steering the state to a target.

Only the boundary values are optimized. Keeping them in [0, 1] keeps the
state in [0, 1] by comparison, so no state constraint ever enters an
optimizer.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from . import _kernels
from .evolve import (
    ControlSchedule,
    Grid,
    Limit,
    StepError,
    Trajectory,
    initial_field,
    omega_classify,
)
from .reaction import Nonlinearity
from .steady import SteadyPath

log = logging.getLogger(__name__)

DT_MAX = 0.1


class Objective(str, enum.Enum):
    TERMINAL_MISMATCH = "terminal_mismatch"
    CONTROL_SMOOTHNESS = "control_smoothness"


class HorizonError(RuntimeError):
    pass


class StaircaseError(RuntimeError):
    def __init__(self, distance: float):
        super().__init__(f"staircase ended at sup-distance {distance:.4g} from the target")
        self.distance = distance


class PenaltyError(RuntimeError):
    def __init__(self, message: str, terminal_error: float = math.nan, max_rate: float = math.nan):
        super().__init__(message)
        self.terminal_error = terminal_error
        self.max_rate = max_rate


@dataclass(eq=False)
class OptimizationProblem:
    nl: Nonlinearity
    grid: Grid
    u0: np.ndarray
    target: np.ndarray
    eps: float
    T: float
    nt: int | None = None
    rate_cap: float | None = None
    objective: Objective = Objective.TERMINAL_MISMATCH

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        self.u0 = initial_field(self.grid, self.u0)
        self.target = np.broadcast_to(np.asarray(self.target, dtype=float),
                                      (self.grid.nr + 1,)).copy()
        if self.target.min() < 0 or self.target.max() > 1:
            raise ValueError("target must lie in [0, 1]")
        if self.nt is None:
            dt = min(self.grid.dt, DT_MAX)
            self.nt = max(int(math.ceil(self.T / dt - 1e-9)), 1) if self.T > 0 else 0

    @property
    def timed_grid(self) -> Grid:
        return replace(self.grid, dt=self.T / self.nt) if self.nt else self.grid

    def with_horizon(self, T: float, nt: int | None = None) -> OptimizationProblem:
        return replace(self, T=T, nt=nt)


@dataclass(eq=False)
class OptimizationResult:
    schedule: ControlSchedule
    terminal_error: float
    objective_value: float
    iterations: int
    converged: bool
    trajectory: Trajectory | None = field(default=None, repr=False)
    terms: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# forward model and adjoint


def _forward(problem: OptimizationProblem, steps: np.ndarray) -> np.ndarray:
    g = problem.timed_grid
    sub, diag, sup, bcoef = g.system
    states, failed = _kernels.march(problem.u0, np.ascontiguousarray(steps, dtype=float), sub,
                                    diag, sup, bcoef, g.dt, problem.nl.as_kernel(), g.fp_tol,
                                    g.fp_max)
    if failed >= 0:
        raise StepError(failed + 1, float("nan"))
    return states


def _backward(problem: OptimizationProblem, states: np.ndarray, p_terminal: np.ndarray) -> np.ndarray:
    g = problem.timed_grid
    sub, diag, sup, bcoef = g.system
    return _kernels.adjoint_sweep(states, sub, diag, sup, bcoef, g.dt, problem.nl.as_kernel(),
                                  np.ascontiguousarray(p_terminal, dtype=float))


def _steps_of(schedule: ControlSchedule) -> np.ndarray:
    return np.asarray(schedule.values[1:], dtype=float)


def _schedule(problem: OptimizationProblem, steps: np.ndarray) -> ControlSchedule:
    return ControlSchedule.from_steps(steps, problem.timed_grid.dt, a0=float(problem.u0[-1]))


def mismatch(problem: OptimizationProblem, steps: np.ndarray) -> tuple[float, np.ndarray]:
    states = _forward(problem, steps)
    d = states[-1] - problem.target
    return 0.5 * float(d @ d), states


def adjoint_gradient(problem: OptimizationProblem, schedule: ControlSchedule) -> np.ndarray:
    """Gradient of 1/2 |u(T) - target|^2 with respect to a_1..a_nt."""
    steps = _steps_of(schedule)
    if steps.size != problem.nt:
        raise ValueError(f"schedule has {steps.size} steps, problem expects {problem.nt}")
    if steps.size == 0:
        return np.zeros(0)
    _, states = mismatch(problem, steps)
    return _backward(problem, states, states[-1] - problem.target)


# ---------------------------------------------------------------------------
# fixed-horizon feasibility


def feasibility_solve(problem: OptimizationProblem, init: np.ndarray | None = None,
                      max_iter: int = 400, armijo: float = 1e-4) -> OptimizationResult:
    """Projected gradient (Barzilai-Borwein steps, Armijo backtracking) on the
    terminal mismatch; succeeds once the terminal sup error is <= eps."""
    nt = problem.nt
    if nt == 0 or np.max(np.abs(problem.u0 - problem.target)) <= problem.eps:
        steps = np.full(nt, float(problem.u0[-1]))
        J, states = mismatch(problem, steps) if nt else (0.0, problem.u0[None, :])
        err = float(np.max(np.abs(states[-1] - problem.target)))
        return OptimizationResult(_schedule(problem, steps), err, J, 0, err <= problem.eps)

    x = np.clip(np.full(nt, float(problem.target[-1])) if init is None else np.asarray(init, float), 0, 1)
    J, states = mismatch(problem, x)
    best = (np.inf, x, J)
    alpha = None
    it = 0
    for it in range(max_iter + 1):
        err = float(np.max(np.abs(states[-1] - problem.target)))
        if err < best[0]:
            best = (err, x.copy(), J)
        if err <= problem.eps or it == max_iter:
            break
        g = _backward(problem, states, states[-1] - problem.target)
        if alpha is None:
            alpha = 1.0 / max(np.max(np.abs(g)), 1e-12)
        while True:
            xn = np.clip(x - alpha * g, 0.0, 1.0)
            Jn, states_n = mismatch(problem, xn)
            if Jn <= J + armijo * g @ (xn - x) or alpha < 1e-14:
                break
            alpha *= 0.5
        s = xn - x
        if not np.any(s):
            break
        gn = _backward(problem, states_n, states_n[-1] - problem.target)
        y = gn - g
        sy = float(s @ y)
        alpha = float(s @ s) / sy if sy > 0 else alpha * 2.0
        alpha = min(max(alpha, 1e-10), 1e10)
        x, J, states = xn, Jn, states_n
    err, x, J = best
    return OptimizationResult(_schedule(problem, x), err, J, it, err <= problem.eps)


def _resample(steps: np.ndarray, nt: int) -> np.ndarray:
    if steps.size == 0:
        return np.zeros(nt)
    s_old = (np.arange(steps.size) + 1) / steps.size
    s_new = (np.arange(nt) + 1) / nt
    return np.interp(s_new, s_old, steps)


@dataclass
class Probe:
    T: float
    feasible: bool
    terminal_error: float


def min_time_search(problem: OptimizationProblem, T_hi: float = 100.0, rel_width: float = 1e-2,
                    max_iter: int = 400, polish_iter: int = 2000
                    ) -> tuple[float, OptimizationResult, list[Probe]]:
    """Bisection on the horizon with a feasibility solve at each probe.

    Returns (T_min, result at T_min, probe log); T_min is the feasible end
    of the final bracket. The feasibility solve stops at the first iterate
    inside the tube, so the schedule at T_min is then polished by further
    mismatch descent (``polish_iter`` iterations, 0 disables).
    """
    if np.max(np.abs(problem.u0 - problem.target)) <= problem.eps:
        p0 = problem.with_horizon(0.0, 0)
        return 0.0, feasibility_solve(p0), [Probe(0.0, True, float(np.max(np.abs(problem.u0 - problem.target))))]
    probes: list[Probe] = []

    def probe(T, warm):
        p = problem.with_horizon(T)
        init = None if warm is None else _resample(warm, p.nt)
        res = feasibility_solve(p, init=init, max_iter=max_iter)
        probes.append(Probe(T, res.converged, res.terminal_error))
        log.info("probe T=%.4g feasible=%s err=%.3g it=%d", T, res.converged, res.terminal_error,
                 res.iterations)
        return res

    best = probe(T_hi, None)
    if not best.converged:
        raise HorizonError(f"infeasible at T_hi={T_hi} (terminal error {best.terminal_error:.3g})")
    lo, hi = 0.0, T_hi
    while hi - lo > rel_width * T_hi:
        mid = 0.5 * (lo + hi)
        res = probe(mid, _steps_of(best.schedule))
        if res.converged:
            hi, best = mid, res
        else:
            lo = mid
    if polish_iter > 0:
        p = problem.with_horizon(hi)
        tight = replace(p, eps=1e-3 * p.eps)
        pol = feasibility_solve(tight, init=_steps_of(best.schedule), max_iter=polish_iter)
        if pol.terminal_error <= best.terminal_error:
            best = replace(pol, converged=True)
    return hi, best, probes


# ---------------------------------------------------------------------------
# staircase along a path of steady states


def staircase_schedule(nl: Nonlinearity, path: SteadyPath, grid: Grid, u0, dwell: float,
                       eps: float, t_release: float = 1e3,
                       local_max_iter: int = 50,
                       final_factor: int = 4) -> tuple[ControlSchedule, Trajectory]:
    """Boundary control walking the state along ``path`` waypoint by waypoint.

    Phase 1 keeps a = 0 until the state lies below the first waypoint (plus
    eps). Phase 2 spends ``dwell`` per waypoint (``final_factor * dwell`` on
    the last one): the waypoint's trace is held, and if holding misses the
    waypoint (unstable steady states cannot be reached by holding) a local
    projected-gradient steering over the same window replaces the hold.
    """
    u = initial_field(grid, u0)
    dt = grid.dt
    nd = max(int(round(dwell / dt)), 1)
    values = [float(u[-1])]
    chunks = [u[None, :]]

    # phase 1: let the state relax under zero boundary data
    ceiling = float(np.max(path.profiles[0].u)) + eps
    if np.max(u) > ceiling:
        n_rel = int(math.ceil(t_release / dt))
        sub, diag, sup, bcoef = grid.system
        states, failed = _kernels.march(u, np.zeros(n_rel), sub, diag, sup, bcoef, dt,
                                        nl.as_kernel(), grid.fp_tol, grid.fp_max)
        below = np.flatnonzero(states.max(axis=1) <= ceiling)
        if failed >= 0 or below.size == 0:
            raise StaircaseError(float(np.max(np.abs(u - path.profiles[-1].u[-1]))))
        k = int(below[0])
        values.extend([0.0] * k)
        chunks.append(states[1:k + 1])
        u = states[k]

    # phase 2: waypoint to waypoint; intermediate waypoints only need to be
    # hit to within the path spacing, the last one to within eps
    loose = max(eps, path.continuity_bound)
    last = len(path.profiles) - 1
    for k, prof in enumerate(path.profiles[1:], start=1):
        final = k == last
        n_k = nd * final_factor if final else nd
        tol_k = eps if final else loose
        wp = np.interp(grid.r, prof.r, prof.u)
        if np.max(np.abs(u - wp)) <= tol_k:
            continue
        local = OptimizationProblem(nl, grid, u, np.clip(wp, 0.0, 1.0), eps=tol_k, T=n_k * dt,
                                    nt=n_k)
        hold = np.full(n_k, min(max(prof.trace, 0.0), 1.0))
        _, states = mismatch(local, hold)
        steps = hold
        if np.max(np.abs(states[-1] - local.target)) > tol_k:
            res = feasibility_solve(local, init=hold,
                                    max_iter=local_max_iter * (5 if final else 1))
            steps = _steps_of(res.schedule)
            states = _forward(local, steps)
        values.extend(steps.tolist())
        chunks.append(states[1:])
        u = states[-1]

    target = np.interp(grid.r, path.profiles[-1].r, path.profiles[-1].u)
    dist = float(np.max(np.abs(u - target)))
    sched = ControlSchedule(np.arange(len(values)) * dt, np.array(values))
    S = np.concatenate(chunks)
    traj = Trajectory(times=sched.times, states=S, umin=S.min(axis=1), umax=S.max(axis=1))
    if dist > eps:
        raise StaircaseError(dist)
    return sched, traj


def staircase_with_doubling(nl: Nonlinearity, path: SteadyPath, grid: Grid, u0, dwell: float,
                            eps: float, max_doublings: int = 4, **kw
                            ) -> tuple[ControlSchedule, Trajectory, float]:
    """Retry the staircase with the dwell doubled until the contract holds."""
    for _ in range(max_doublings):
        try:
            sched, traj = staircase_schedule(nl, path, grid, u0, dwell, eps, **kw)
            return sched, traj, dwell
        except StaircaseError as err:
            log.info("dwell %.4g missed by %.3g; doubling", dwell, err.distance)
            dwell *= 2.0
    sched, traj = staircase_schedule(nl, path, grid, u0, dwell, eps, **kw)
    return sched, traj, dwell


# ---------------------------------------------------------------------------
# quasistatic (smooth) control


def _smoothness(steps: np.ndarray, a0: float, dt: float) -> tuple[float, np.ndarray]:
    a = np.concatenate([[a0], steps])
    d = np.diff(a)
    val = float(d @ d) / dt
    g = np.zeros_like(a)
    g[1:] += 2 * d / dt
    g[:-1] -= 2 * d / dt
    return val, g[1:]


def _rate_penalty(steps: np.ndarray, a0: float, dt: float, cap: float) -> tuple[float, np.ndarray]:
    a = np.concatenate([[a0], steps])
    d = np.diff(a) / dt
    excess = np.maximum(np.abs(d) - cap, 0.0)
    val = float(excess @ excess)
    gd = 2 * excess * np.sign(d) / dt
    g = np.zeros_like(a)
    g[1:] += gd
    g[:-1] -= gd
    return val, g[1:]


def quasistatic_optimize(problem: OptimizationProblem, init: np.ndarray | None = None,
                         beta0: float = 100.0, max_doublings: int = 20, margin: float = 0.9,
                         max_iter: int = 500) -> OptimizationResult:
    """Minimize the discrete int a_t^2 dt subject to |u(T) - target| <= eps
    and |a_t| <= rate_cap, both by quadratic penalties with beta doubled until
    the constraints hold. Penalties act on ``margin`` times the limits so the
    penalized optimum lands strictly inside them."""
    nt = problem.nt
    dt = problem.timed_grid.dt
    a0 = float(problem.u0[-1])
    eps_in = margin * problem.eps
    cap = problem.rate_cap
    cap_in = None if cap is None else margin * cap
    if init is None:
        # linear ramp towards the target trace, respecting the rate cap
        end = float(problem.target[-1])
        ramp = a0 + (end - a0) * np.minimum((np.arange(1, nt + 1) * dt) / (0.5 * problem.T), 1.0)
        init = ramp
    x = np.clip(np.asarray(init, dtype=float), 0.0, 1.0)

    def constraints_ok(states, steps):
        term = float(np.max(np.abs(states[-1] - problem.target)))
        ok = term <= problem.eps
        if cap is not None:
            rate = float(np.max(np.abs(np.diff(np.concatenate([[a0], steps])))) / dt)
            ok = ok and rate <= cap
        return ok, term

    beta = beta0
    total_it = 0
    for doubling in range(max_doublings + 1):
        def fun(z, beta=beta):
            s_val, s_grad = _smoothness(z, a0, dt)
            states = _forward(problem, z)
            d = states[-1] - problem.target
            exc = np.maximum(np.abs(d) - eps_in, 0.0)
            p_val = float(exc @ exc)
            p_grad = _backward(problem, states, 2 * exc * np.sign(d))
            val = s_val + beta * p_val
            grad = s_grad + beta * p_grad
            if cap_in is not None:
                r_val, r_grad = _rate_penalty(z, a0, dt, cap_in)
                val += beta * r_val
                grad = grad + beta * r_grad
            return val, grad

        res = minimize(fun, x, jac=True, method="L-BFGS-B", bounds=[(0.0, 1.0)] * nt,
                       options={"maxiter": max_iter, "ftol": 1e-15, "gtol": 1e-12})
        x = np.clip(res.x, 0.0, 1.0)
        total_it += int(res.nit)
        states = _forward(problem, x)
        ok, term = constraints_ok(states, x)
        log.info("beta=%.3g it=%d terminal=%.4g ok=%s", beta, res.nit, term, ok)
        if ok:
            s_val, _ = _smoothness(x, a0, dt)
            traj = Trajectory(times=np.arange(nt + 1) * dt, states=states,
                              umin=states.min(axis=1), umax=states.max(axis=1))
            return OptimizationResult(_schedule(problem, x), term, s_val, total_it, True,
                                      trajectory=traj, terms={"smoothness": s_val,
                                                              "beta": beta})
        beta *= 2.0
    rate = float(np.max(np.abs(np.diff(np.concatenate([[a0], x]))))) / dt
    raise PenaltyError(f"constraints still violated after {max_doublings} doublings "
                       f"(terminal error {term:.4g})", terminal_error=term, max_rate=rate)


def in_basin(nl: Nonlinearity, grid: Grid, u0, T_max: float = 1e3) -> bool:
    """Whether u0 is driven to 0 by the zero boundary control."""
    return omega_classify(nl, grid, u0, 0.0, T_max).kind is Limit.ZERO
