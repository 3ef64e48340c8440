"""Implicit time stepping of the radially symmetric controlled problem

    u_t - mu (u_rr + (N-1)/r u_r) = f(u)  on [0, R),   u(t, R) = a(t),  u_r(t, 0) = 0

plus omega-limit classification under constant boundary data.

Space: nodes r_i = i R / nr, the last one carrying the Dirichlet value.
Time: backward Euler, with a fixed point on the reaction term. The implicit
diffusion matrix is an M-matrix, so ordered data stay ordered.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels
from .reaction import Nonlinearity, classify
from .steady import RadialProfile


class StepError(RuntimeError):
    def __init__(self, step: int, residual: float):
        super().__init__(f"reaction fixed point did not converge at step {step} "
                         f"(last sweep change {residual:.3e})")
        self.step = step
        self.residual = residual


class AdmissibilityError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    N: int
    R: float
    nr: int = 100
    dt: float = 0.05
    mu: float = 1.0
    fp_tol: float = 1e-12
    fp_max: int = 50

    def __post_init__(self):
        if self.nr < 50:
            raise ValueError("need at least 50 radial cells")
        if not (self.dt > 0 and self.R > 0 and self.mu > 0):
            raise ValueError("dt, R and mu must be positive")
        if self.N not in (1, 2, 3):
            raise ValueError(f"unsupported dimension N={self.N}")

    @property
    def dr(self) -> float:
        return self.R / self.nr

    @cached_property
    def r(self) -> np.ndarray:
        return np.linspace(0.0, self.R, self.nr + 1)

    @cached_property
    def laplacian(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
        """(sub, diag, sup) of the radial Laplacian on interior nodes and the
        coefficient coupling the last interior node to the boundary value."""
        n, dr, N = self.nr, self.dr, self.N
        ri = self.r[:n]
        sub = np.empty(n)
        sup = np.empty(n)
        diag = np.full(n, -2.0 / dr**2)
        sub[1:] = 1.0 / dr**2 - (N - 1) / (2.0 * ri[1:] * dr)
        sup[1:] = 1.0 / dr**2 + (N - 1) / (2.0 * ri[1:] * dr)
        # r = 0: Lap u = N u_rr with the mirror node u_{-1} = u_1
        sub[0] = 0.0
        diag[0] = -2.0 * N / dr**2
        sup[0] = 2.0 * N / dr**2
        bcoef = float(sup[-1])
        sup[-1] = 0.0
        return sub, diag, sup, bcoef

    @cached_property
    def system(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
        """Tridiagonal I - dt mu Lap and the boundary coefficient dt mu b."""
        sub, diag, sup, bcoef = self.laplacian
        k = self.dt * self.mu
        return -k * sub, 1.0 - k * diag, -k * sup, k * bcoef


@dataclass(eq=False)
class ControlSchedule:
    """Boundary values a_k at t_k = k dt, k = 0..nt (a_0 is the initial trace)."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape or self.times.ndim != 1:
            raise ValueError("times and values must be matching 1-D arrays")
        if self.values.size and (self.values.min() < 0.0 or self.values.max() > 1.0):
            raise AdmissibilityError("boundary values must lie in [0, 1]")

    @classmethod
    def constant(cls, value: float, T: float, dt: float) -> ControlSchedule:
        nt = int(round(T / dt))
        return cls(np.arange(nt + 1) * dt, np.full(nt + 1, float(value)))

    @classmethod
    def from_steps(cls, steps: np.ndarray, dt: float, a0: float | None = None) -> ControlSchedule:
        """Schedule whose k-th implicit step uses steps[k-1]."""
        steps = np.asarray(steps, dtype=float)
        first = steps[0] if (a0 is None and steps.size) else (a0 if a0 is not None else 0.0)
        vals = np.concatenate([[first], steps])
        return cls(np.arange(vals.size) * dt, vals)

    @property
    def nt(self) -> int:
        return self.values.size - 1

    @property
    def T(self) -> float:
        return float(self.times[-1]) if self.times.size else 0.0


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray = field(repr=False)
    umin: np.ndarray = field(repr=False)
    umax: np.ndarray = field(repr=False)

    @property
    def terminal(self) -> np.ndarray:
        return self.states[-1]

    def terminal_distance(self, target) -> float:
        return float(np.max(np.abs(self.states[-1] - target)))


def initial_field(grid: Grid, u0) -> np.ndarray:
    """Admissible initial field from a constant, a RadialProfile or samples."""
    if isinstance(u0, RadialProfile):
        arr = np.interp(grid.r, u0.r, u0.u)
    elif np.ndim(u0) == 0:
        arr = np.full(grid.nr + 1, float(u0))
    else:
        arr = np.asarray(u0, dtype=float)
        if arr.shape != (grid.nr + 1,):
            raise ValueError(f"initial field must have {grid.nr + 1} samples")
    return np.clip(arr, 0.0, 1.0)


def step(nl: Nonlinearity, grid: Grid, u: np.ndarray, a_next: float) -> np.ndarray:
    """One implicit step; returns the full field including the boundary node."""
    sub, diag, sup, bcoef = grid.system
    x, sweeps, change = _kernels.implicit_step(np.ascontiguousarray(u[:-1], dtype=float),
                                               float(a_next), sub, diag, sup, bcoef, grid.dt,
                                               nl.as_kernel(), grid.fp_tol, grid.fp_max)
    if change > grid.fp_tol:
        raise StepError(0, change)
    return np.append(x, a_next)


def simulate(nl: Nonlinearity, grid: Grid, u0, schedule: ControlSchedule) -> Trajectory:
    """March the state through the schedule (one implicit step per entry after a_0)."""
    if not math.isclose(schedule.times[1] - schedule.times[0] if schedule.nt else grid.dt,
                        grid.dt, rel_tol=1e-9):
        raise ValueError("schedule spacing must equal grid.dt")
    u = initial_field(grid, u0)
    sub, diag, sup, bcoef = grid.system
    states, failed = _kernels.march(u, np.ascontiguousarray(schedule.values[1:]), sub, diag, sup,
                                    bcoef, grid.dt, nl.as_kernel(), grid.fp_tol, grid.fp_max)
    if failed >= 0:
        raise StepError(failed + 1, float("nan"))
    return Trajectory(times=schedule.times.copy(), states=states,
                      umin=states.min(axis=1), umax=states.max(axis=1))


class Limit(str, enum.Enum):
    ZERO = "zero"
    THETA = "theta"
    ONE = "one"
    NONTRIVIAL = "nontrivial_steady"
    UNDECIDED = "undecided"


@dataclass(eq=False)
class OmegaLimit:
    kind: Limit
    field: np.ndarray = field(repr=False)
    time: float
    rate: float


def omega_classify(nl: Nonlinearity, grid: Grid, u0, a_const: float, T_max: float = 1e3,
                   tol: float = 1e-8, match: float = 1e-3) -> OmegaLimit:
    """Run with constant boundary data until max|u^{k+1}-u^k|/dt <= tol.

    The rest state is matched against 0, theta and 1 within ``match``
    (sup norm); otherwise it is reported as a nontrivial steady state.
    """
    if not 0.0 <= a_const <= 1.0:
        raise AdmissibilityError("boundary value must lie in [0, 1]")
    u = initial_field(grid, u0)
    sub, diag, sup, bcoef = grid.system
    nmax = int(math.ceil(T_max / grid.dt))
    out, steps, rate, failed = _kernels.march_to_rest(u, float(a_const), sub, diag, sup, bcoef,
                                                      grid.dt, nl.as_kernel(), grid.fp_tol,
                                                      grid.fp_max, tol, nmax)
    if failed:
        raise StepError(steps, float("nan"))
    t = steps * grid.dt
    if rate > tol:
        return OmegaLimit(Limit.UNDECIDED, out, t, rate)
    cls = classify(nl)
    candidates = [(Limit.ZERO, 0.0), (Limit.ONE, 1.0)]
    if cls.theta is not None:
        candidates.append((Limit.THETA, cls.theta))
    for kind, level in candidates:
        if np.max(np.abs(out - level)) <= match:
            return OmegaLimit(kind, out, t, rate)
    return OmegaLimit(Limit.NONTRIVIAL, out, t, rate)
