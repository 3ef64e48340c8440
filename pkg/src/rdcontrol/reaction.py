"""Reaction terms f, their primitives F and the phase-plane energy.

Three kinds are supported: the cubic ``s(1-s)(s-theta)``, the logistic
``s(1-s)`` and a user-sampled ``Custom`` term interpolated by a monotone
(PCHIP) cubic. Inside the solvers f is continued linearly beyond
``[-0.1, 1.1]`` so transient overshoot never meets an undefined reaction.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import _kernels

MARGIN_LO = -0.1
MARGIN_HI = 1.1
F1_ZERO_TOL = 1e-12
THETA1_XTOL = 1e-10


class ReactionRangeError(ValueError):
    """Argument outside the solver overshoot margin [-0.1, 1.1]."""


class ClassificationError(ValueError):
    pass


class Kind(str, enum.Enum):
    CUBIC_BISTABLE = "cubic_bistable"
    LOGISTIC = "logistic"
    CUSTOM = "custom"


class Variant(str, enum.Enum):
    MONOSTABLE = "monostable"
    BISTABLE_F1_POSITIVE = "bistable_f1_positive"
    BISTABLE_F1_ZERO = "bistable_f1_zero"


@dataclass(frozen=True)
class Classification:
    variant: Variant
    F1: float
    Ftheta: float | None = None
    theta: float | None = None
    theta1: float | None = None

    @property
    def bistable(self) -> bool:
        return self.variant is not Variant.MONOSTABLE


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """A reaction term on [0, 1].

    Build one with :meth:`cubic`, :meth:`logistic` or :meth:`custom` rather
    than calling the constructor.
    """

    kind: Kind
    theta: float | None = None
    lipschitz: float = 0.0
    samples_s: np.ndarray | None = field(default=None, repr=False)
    samples_f: np.ndarray | None = field(default=None, repr=False)

    # ---- constructors -------------------------------------------------
    @classmethod
    def cubic(cls, theta: float) -> Nonlinearity:
        if not 0.0 < theta < 1.0:
            raise ValueError(f"theta must lie in (0, 1), got {theta}")
        nl = cls(Kind.CUBIC_BISTABLE, theta=float(theta))
        return nl._with_lipschitz()

    @classmethod
    def logistic(cls) -> Nonlinearity:
        return cls(Kind.LOGISTIC)._with_lipschitz()

    @classmethod
    def custom(cls, s, f, lipschitz: float | None = None) -> Nonlinearity:
        s = np.asarray(s, dtype=float)
        f = np.asarray(f, dtype=float)
        if s.ndim != 1 or s.shape != f.shape or s.size < 3:
            raise ValueError("custom samples must be matching 1-D arrays (>= 3 points)")
        if np.any(np.diff(s) <= 0):
            raise ValueError("custom sample abscissae must be strictly increasing")
        if s[0] > 0.0 or s[-1] < 1.0:
            raise ValueError("custom samples must cover [0, 1]")
        nl = cls(Kind.CUSTOM, samples_s=s, samples_f=f)
        pchip = PchipInterpolator(s, f, extrapolate=True)
        object.__setattr__(nl, "_pchip", pchip)
        anti = pchip.antiderivative()
        object.__setattr__(nl, "_prim", lambda x: anti(x) - anti(0.0))
        if lipschitz is None:
            return nl._with_lipschitz()
        object.__setattr__(nl, "lipschitz", float(lipschitz))
        return nl

    def _with_lipschitz(self) -> Nonlinearity:
        # finite-difference slopes on a grid that refines the 1e-3 grid
        s = np.linspace(MARGIN_LO, MARGIN_HI, 120_001)
        slopes = np.abs(np.diff(self._raw_f(s)) / np.diff(s))
        object.__setattr__(self, "lipschitz", float(slopes.max()) * (1 + 1e-9))
        return self

    # ---- evaluation ---------------------------------------------------
    def _raw_f(self, s):
        if self.kind is Kind.CUBIC_BISTABLE:
            return s * (1.0 - s) * (s - self.theta)
        if self.kind is Kind.LOGISTIC:
            return s * (1.0 - s)
        return self._pchip(s)

    def _raw_F(self, s: float) -> float:
        if self.kind is Kind.CUBIC_BISTABLE:
            th = self.theta
            return -th * s**2 / 2 + (1 + th) * s**3 / 3 - s**4 / 4
        if self.kind is Kind.LOGISTIC:
            return s**2 / 2 - s**3 / 3
        return float(self._prim(s))

    def as_kernel(self) -> tuple:
        """Packed representation consumed by the compiled kernels."""
        try:
            return self._kernel
        except AttributeError:
            pass
        empty1 = np.zeros(2)
        empty2 = np.zeros((4, 1))
        if self.kind is Kind.CUBIC_BISTABLE:
            th = self.theta
            packed = (2, np.array([th]), empty1, empty2, MARGIN_LO, MARGIN_HI)
        elif self.kind is Kind.LOGISTIC:
            packed = (0, np.array([0.0, 1.0, -1.0]), empty1, empty2, MARGIN_LO, MARGIN_HI)
        else:
            p = self._pchip
            packed = (1, np.zeros(1), np.ascontiguousarray(p.x, dtype=float),
                      np.ascontiguousarray(p.c, dtype=float), MARGIN_LO, MARGIN_HI)
        object.__setattr__(self, "_kernel", packed)
        return packed

    def f_extended(self, s):
        """f with the linear continuation outside the margin (vectorised)."""
        arr = np.atleast_1d(np.asarray(s, dtype=float))
        out = _kernels.f_vec(np.ascontiguousarray(arr.ravel()), self.as_kernel()).reshape(arr.shape)
        return out if np.ndim(s) else float(out[0])

    def fprime_extended(self, s):
        arr = np.atleast_1d(np.asarray(s, dtype=float))
        out = _kernels.fprime_vec(np.ascontiguousarray(arr.ravel()), self.as_kernel()).reshape(arr.shape)
        return out if np.ndim(s) else float(out[0])

    # ---- serialization ------------------------------------------------
    def to_dict(self) -> dict:
        if self.kind is Kind.CUBIC_BISTABLE:
            return {"kind": self.kind.value, "theta": self.theta}
        if self.kind is Kind.LOGISTIC:
            return {"kind": self.kind.value}
        return {"kind": self.kind.value, "s": self.samples_s.tolist(),
                "f": self.samples_f.tolist(), "lipschitz": self.lipschitz}

    @classmethod
    def from_dict(cls, d: dict) -> Nonlinearity:
        kind = Kind(d["kind"])
        if kind is Kind.CUBIC_BISTABLE:
            return cls.cubic(float(d["theta"]))
        if kind is Kind.LOGISTIC:
            return cls.logistic()
        return cls.custom(d["s"], d["f"], d.get("lipschitz"))


def _check_range(s: float) -> None:
    if not (MARGIN_LO <= s <= MARGIN_HI):
        raise ReactionRangeError(f"argument {s} outside [{MARGIN_LO}, {MARGIN_HI}]")


def eval_f(nl: Nonlinearity, s: float) -> float:
    _check_range(s)
    return float(nl._raw_f(s))


def eval_F(nl: Nonlinearity, s: float) -> float:
    _check_range(s)
    return float(nl._raw_F(s))


def energy(nl: Nonlinearity, u: float, v: float) -> float:
    """Phase-plane energy v^2/2 + F(u) of the radial steady-state ODE."""
    return 0.5 * v * v + eval_F(nl, u)


def _bisect(fun, lo: float, hi: float, xtol: float) -> float:
    flo = fun(lo)
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        fm = fun(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def classify(nl: Nonlinearity) -> Classification:
    if abs(eval_f(nl, 0.0)) > 1e-12:
        raise ClassificationError("f(0) must vanish")
    s = np.linspace(0.0, 1.0, 1001)
    fs = np.asarray(nl._raw_f(s), dtype=float)
    inner = fs[1:-1]
    F1 = eval_F(nl, 1.0)
    if abs(fs[-1]) > 1e-12:
        raise ClassificationError("f(1) must vanish")
    if np.all(inner > 0):
        return Classification(Variant.MONOSTABLE, F1=F1)

    # bistable: f <= 0 up to theta, f > 0 after it
    j = int(np.argmax(inner > 0))
    if inner[0] >= 0 or not np.all(inner[j:] > 0) or np.any(inner[: max(j - 1, 0)] >= 0):
        raise ClassificationError("f is neither monostable nor bistable")
    if nl.kind is Kind.CUBIC_BISTABLE:
        theta = nl.theta
    else:
        theta = _bisect(lambda x: float(nl._raw_f(x)), s[j], s[j + 1], 1e-13)
    Ftheta = eval_F(nl, theta)

    if abs(F1) <= F1_ZERO_TOL:
        return Classification(Variant.BISTABLE_F1_ZERO, F1=F1, Ftheta=Ftheta, theta=theta, theta1=1.0)
    if F1 < 0:
        raise ClassificationError("bistable f with F(1) < 0 is not covered")

    # theta1: first positive zero of F, bracketed on the 1e-3 grid above theta
    grid = np.linspace(theta, 1.0, max(int(math.ceil((1.0 - theta) / 1e-3)), 2) + 1)
    Fg = np.array([nl._raw_F(x) for x in grid])
    k = int(np.flatnonzero(Fg > 0)[0])
    theta1 = _bisect(nl._raw_F, grid[k - 1], grid[k], THETA1_XTOL)
    return Classification(Variant.BISTABLE_F1_POSITIVE, F1=F1, Ftheta=Ftheta, theta=float(theta), theta1=float(theta1))


def region_halfwidth(nl: Nonlinearity, u: float, cls: Classification | None = None) -> float:
    """Half-width sqrt(-2 F(u)) of the positively invariant phase-plane region."""
    cls = cls or classify(nl)
    if not cls.bistable:
        raise ValueError("invariant region defined for bistable f only")
    if u < 0.0 or u > cls.theta1 + THETA1_XTOL:
        raise ValueError(f"u={u} outside [0, theta1={cls.theta1}]")
    if abs(u - cls.theta1) <= THETA1_XTOL:
        return 0.0  # theta1 is only known to the bisection tolerance
    w = -2.0 * eval_F(nl, u)
    if w < 0.0:
        if w < -1e-14 and u < cls.theta1 - THETA1_XTOL:
            raise ValueError(f"F({u}) > 0 inside [0, theta1]")
        return 0.0
    return math.sqrt(w)
