"""Radial steady states, the admissible path from 0 to theta, barriers and
the critical diffusivity mu*.

Steady states on a ball B_R solve ``mu (u'' + (N-1)/r u') + f(u) = 0`` with
``u(0) = a``, ``u'(0) = 0``. Every routine absorbs mu into the reaction
(``f/mu``) and uses the scaling ``rho_mu(a) = sqrt(mu) rho_1(a)`` for zero
radii.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma

from . import _kernels
from .reaction import (
    MARGIN_HI,
    MARGIN_LO,
    Classification,
    Nonlinearity,
    Variant,
    classify,
)

J01 = 2.40482555769577  # first zero of the Bessel function J0
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
SCAN_STEP = 1e-3
ZERO_XTOL = 1e-12


class BlowUpError(RuntimeError):
    def __init__(self, a: float, radius: float):
        super().__init__(f"profile with u(0)={a} left [{MARGIN_LO}, {MARGIN_HI}] at r={radius:.6g}")
        self.a = a
        self.radius = radius


class ThresholdUndefinedError(RuntimeError):
    pass


class PathRefinementError(RuntimeError):
    pass


class PreconditionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class Interval:
    length: float


@dataclass(frozen=True)
class Ball:
    N: int
    R: float


@dataclass(eq=False)
class RadialProfile:
    a: float
    N: int
    mu: float
    R: float
    r: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)

    @property
    def trace(self) -> float:
        return float(self.u[-1])

    def energy(self, nl: Nonlinearity) -> np.ndarray:
        """E(u, v) = v^2/2 + F(u)/mu along the profile (mu absorbed in F)."""
        F = np.asarray(nl._raw_F(self.u), dtype=float)
        return 0.5 * self.v**2 + F / self.mu

    def sup_distance(self, other: RadialProfile) -> float:
        return float(np.max(np.abs(self.u - other.u)))


@dataclass(eq=False)
class SteadyPath:
    profiles: list[RadialProfile]
    continuity_bound: float

    @property
    def centers(self) -> np.ndarray:
        return np.array([p.a for p in self.profiles])

    @property
    def trace(self) -> np.ndarray:
        return np.array([p.trace for p in self.profiles])

    def __len__(self) -> int:
        return len(self.profiles)


@dataclass(eq=False)
class Barrier:
    profile: RadialProfile
    center_value: float
    is_minimal: bool = False


# ---------------------------------------------------------------------------
# integration and shooting


def default_step(R: float, mu: float) -> float:
    n = max(200, math.ceil(R / (0.01 * math.sqrt(mu))))
    return R / n


def integrate_radial(nl: Nonlinearity, a: float, mu: float, N: int, R: float,
                     h: float | None = None) -> RadialProfile:
    """RK4 profile of the radial steady-state ODE on [0, R].

    The first step uses the Taylor series at the regular singular point r=0;
    the step is adjusted so that it divides R.
    """
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"center value {a} outside [0, 1]")
    if mu <= 0 or R <= 0 or N < 1:
        raise ValueError("need mu > 0, R > 0, N >= 1")
    if h is None:
        h = default_step(R, mu)
    if h > R / 200 * (1 + 1e-12):
        raise ValueError(f"step {h} exceeds R/200")
    n = max(int(round(R / h)), 200)
    h = R / n
    u, v, status, last = _kernels.integrate_radial(float(a), 1.0 / mu, float(N), h, n,
                                                   nl.as_kernel(), MARGIN_LO, MARGIN_HI)
    if status != _kernels.OK:
        raise BlowUpError(a, last * h)
    return RadialProfile(a=float(a), N=N, mu=mu, R=R, r=np.linspace(0.0, R, n + 1), u=u, v=v)


def _shoot_step(mu: float, h: float | None) -> float:
    return 2e-3 * math.sqrt(mu) if h is None else h


def first_zero_radius(nl: Nonlinearity, a: float, mu: float, N: int,
                      h: float | None = None, r_max: float | None = None) -> float | None:
    """Smallest r > 0 with u(r) = 0, or None if u stays positive up to r_max."""
    if not 0.0 < a < 1.0:
        raise ValueError(f"center value {a} outside (0, 1)")
    h = _shoot_step(mu, h)
    r_max = 100.0 * math.sqrt(mu) if r_max is None else r_max
    rho = _kernels.first_zero(float(a), 1.0 / mu, float(N), h, r_max, nl.as_kernel(), ZERO_XTOL)
    return None if rho < 0 else float(rho)


def _rho_scan(nl: Nonlinearity, avals: np.ndarray, N: int, r_max: float,
              h: float | None = None) -> np.ndarray:
    """Zero radii at mu = 1 for a batch of centers; inf where none."""
    rho = _kernels.first_zero_batch(np.ascontiguousarray(avals, dtype=float), 1.0, float(N),
                                    _shoot_step(1.0, h), r_max, nl.as_kernel(), ZERO_XTOL)
    return np.where(rho < 0, np.inf, rho)


def _scan_centers(nl: Nonlinearity, cls: Classification) -> np.ndarray:
    """Candidate barrier centers: (theta1, 1) for bistable f, (0, 1) otherwise."""
    lo = cls.theta1 if cls.variant is Variant.BISTABLE_F1_POSITIVE else 0.0
    k0 = math.floor(lo / SCAN_STEP) + 1
    a = np.arange(k0, round(1.0 / SCAN_STEP)) * SCAN_STEP
    return a[(a > lo) & (a < 1.0)]


def golden_max(fun, lo: float, hi: float, xtol: float = 1e-10) -> tuple[float, float]:
    """Golden-section search for the maximum of a unimodal function on [lo, hi]."""
    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = fun(x1), fun(x2)
    while hi - lo > xtol:
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN * (hi - lo)
            f2 = fun(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN * (hi - lo)
            f1 = fun(x1)
    x = 0.5 * (lo + hi)
    return x, fun(x)


def _scan_then_golden(fun, lo: float, hi: float, n: int = 400, xtol: float = 1e-10,
                      include_ends: bool = True) -> tuple[float, float]:
    xs = np.linspace(lo, hi, n + 1)
    if not include_ends:
        xs = xs[1:-1]
    vals = np.array([fun(x) for x in xs])
    i = int(np.argmax(vals))
    left = xs[max(i - 1, 0)]
    right = xs[min(i + 1, len(xs) - 1)]
    x, val = golden_max(fun, left, right, xtol)
    if vals[i] > val:
        return float(xs[i]), float(vals[i])
    return float(x), float(val)


# ---------------------------------------------------------------------------
# barriers and the critical diffusivity


def find_barriers(nl: Nonlinearity, mu: float, N: int, R: float,
                  h: float | None = None) -> list[Barrier]:
    """All radial solutions of -mu Lap v = f(v), v(R) = 0, 0 < v < 1 on B_R.

    Found by scanning center values and bisecting rho(a) = R on each
    bracketing pair. Ordered by center value; the first one is minimal.
    """
    cls = classify(nl)
    if cls.variant is Variant.BISTABLE_F1_ZERO:
        return []
    avals = _scan_centers(nl, cls)
    target = R / math.sqrt(mu)  # radius in mu = 1 units
    r_max = target * 1.01 + 0.1
    rho = _rho_scan(nl, avals, N, r_max, h)
    # rho -> inf at a = 1 (u = 1 is constant) and at a = theta1 (zero energy
    # orbit tends to the origin without reaching it)
    avals = np.append(avals, 1.0)
    rho = np.append(rho, np.inf)
    if cls.variant is Variant.BISTABLE_F1_POSITIVE:
        avals = np.insert(avals, 0, cls.theta1)
        rho = np.insert(rho, 0, np.inf)
    excess = rho - target
    roots = []
    for k in range(len(avals) - 1):
        if (excess[k] > 0) != (excess[k + 1] > 0):
            lo, hi = avals[k], avals[k + 1]
            elo = excess[k]
            while hi - lo > 1e-13:
                mid = 0.5 * (lo + hi)
                em = _rho_scan(nl, np.array([mid]), N, r_max, h)[0] - target
                if (em > 0) == (elo > 0):
                    lo, elo = mid, em
                else:
                    hi = mid
            roots.append(0.5 * (lo + hi))
    barriers = []
    for j, a in enumerate(roots):
        prof = integrate_radial(nl, a, mu, N, R)
        if cls.bistable and not prof.u.max() > cls.theta:
            raise RuntimeError(f"barrier at a={a} has max {prof.u.max()} <= theta")
        barriers.append(Barrier(profile=prof, center_value=a, is_minimal=(j == 0)))
    return barriers


def mu_star_numeric(nl: Nonlinearity, N: int, R: float, h: float | None = None) -> float:
    """Largest mu for which a barrier exists on B_R: R^2 / min_a rho_1(a)^2."""
    cls = classify(nl)
    if cls.variant is Variant.BISTABLE_F1_ZERO:
        raise ThresholdUndefinedError("F(1) = 0: no barrier for any mu")
    avals = _scan_centers(nl, cls)
    # only the smallest radius matters: widen the cutoff until one is found
    for r_max in (10.0, 20.0, 50.0, 100.0):
        rho = _rho_scan(nl, avals, N, r_max, h)
        if np.any(np.isfinite(rho)):
            break
    else:
        raise ThresholdUndefinedError("no finite zero radius in the center scan")
    i = int(np.argmin(rho))
    lo = avals[max(i - 1, 0)]
    hi = avals[min(i + 1, len(avals) - 1)]

    def neg_rho(a):
        return -_rho_scan(nl, np.array([a]), N, r_max, h)[0]

    _, best = golden_max(neg_rho, lo, hi, 1e-10)
    rho_min = min(-best, rho[i])
    return R**2 / rho_min**2


@dataclass(frozen=True)
class LowerBound:
    value: float
    delta: float | None
    applicable: bool

    def __float__(self) -> float:
        return self.value


def lower_bound_objective(nl: Nonlinearity, N: int, m: float, delta: float,
                          cls: Classification | None = None) -> float:
    """Right-hand side of the variational sufficient condition for a barrier."""
    cls = cls or classify(nl)
    F1, Ft = cls.F1, cls.Ftheta
    q = (1.0 - delta) ** N
    num = 2.0 * delta**2 * gamma(N / 2 + 1) ** (2.0 / N) * (Ft + q * (F1 - Ft)) * m ** (2.0 / N)
    return num / (math.pi * (1.0 - q))


def mu_star_lower_bound(nl: Nonlinearity, N: int, m: float) -> LowerBound:
    """Variational lower bound for mu* on a domain containing a ball of measure m.

    Uses a plateau test function of height 1 with a linear ramp of relative
    width delta; the bound is maximized over the admissible delta.
    """
    cls = classify(nl)
    if cls.variant is not Variant.BISTABLE_F1_POSITIVE or cls.F1 <= 0:
        return LowerBound(0.0, None, applicable=False)
    ratio = -cls.Ftheta / (cls.F1 - cls.Ftheta)
    dmax = 1.0 - ratio ** (1.0 / N)
    if dmax <= 0:
        return LowerBound(0.0, None, applicable=True)

    def obj(d):
        return lower_bound_objective(nl, N, m, d, cls)

    d, val = _scan_then_golden(obj, 0.0, dmax, n=1000, xtol=1e-12, include_ends=False)
    return LowerBound(max(val, 0.0), d, applicable=True)


def mu_star_upper_bound(nl: Nonlinearity, lambda1: float) -> float:
    """max_{s in (0,1]} f(s)/s divided by the first Dirichlet eigenvalue."""
    if lambda1 <= 0:
        raise ValueError("lambda1 must be positive")

    def ratio(s):
        return float(nl._raw_f(s)) / s

    _, best = _scan_then_golden(ratio, 1e-9, 1.0, n=1000, xtol=1e-12)
    return max(best, ratio(1.0)) / lambda1


def lambda1(domain: Interval | Ball) -> float:
    """First Dirichlet eigenvalue of the Laplacian on an interval or a ball."""
    if isinstance(domain, Interval):
        if domain.length <= 0:
            raise ValueError("interval length must be positive")
        return (math.pi / domain.length) ** 2
    if domain.R <= 0:
        raise ValueError("radius must be positive")
    if domain.N == 1:
        return lambda1(Interval(2.0 * domain.R))
    if domain.N == 2:
        return (J01 / domain.R) ** 2
    if domain.N == 3:
        return (math.pi / domain.R) ** 2
    raise ValueError(f"unsupported dimension N={domain.N}")


def ball_radius(N: int, measure: float) -> float:
    """Radius of the N-ball with the given measure."""
    return (measure * gamma(N / 2 + 1) / math.pi ** (N / 2)) ** (1.0 / N)


def ball_measure(N: int, R: float) -> float:
    return math.pi ** (N / 2) / gamma(N / 2 + 1) * R**N


# ---------------------------------------------------------------------------
# paths of steady states


def _refine(nl: Nonlinearity, centers: list[float], mu: float, N: int, R: float,
            tol: float, h: float | None, max_profiles: int = 100_000) -> SteadyPath:
    profiles = [integrate_radial(nl, a, mu, N, R, h) for a in centers]
    i = 0
    while i < len(profiles) - 1:
        if profiles[i].sup_distance(profiles[i + 1]) <= tol:
            i += 1
            continue
        if len(profiles) >= max_profiles:
            raise PathRefinementError(f"path refinement exceeded {max_profiles} profiles")
        mid = 0.5 * (profiles[i].a + profiles[i + 1].a)
        profiles.insert(i + 1, integrate_radial(nl, mid, mu, N, R, h))
    bound = max((p.sup_distance(q) for p, q in zip(profiles, profiles[1:])), default=0.0)
    return SteadyPath(profiles=profiles, continuity_bound=bound)


def build_path(nl: Nonlinearity, mu: float, N: int, R: float, tol: float = 0.02,
               h: float | None = None) -> SteadyPath:
    """Continuous path of admissible steady states from w = 0 to w = theta.

    Profiles are parameterized by their center value a in [0, theta]; the
    a-grid is bisected until neighbours are within ``tol`` in sup norm.
    """
    cls = classify(nl)
    if not cls.bistable:
        raise PreconditionError("path to theta needs a bistable nonlinearity")
    if not tol > 1e-4:
        raise ValueError("tol must exceed 1e-4")
    return _refine(nl, [0.0, cls.theta], mu, N, R, tol, h)


def path_to_minimal_barrier(nl: Nonlinearity, mu: float, N: int, R: float,
                            tol: float = 0.02, h: float | None = None) -> SteadyPath:
    """Path from w = 0 through w = theta up to the minimal barrier."""
    cls = classify(nl)
    if cls.variant is not Variant.BISTABLE_F1_POSITIVE:
        raise PreconditionError("needs a bistable nonlinearity with F(1) > 0")
    barriers = find_barriers(nl, mu, N, R, h)
    if not barriers:
        raise PreconditionError(f"no barrier at mu={mu} (mu > mu*)")
    a_b = barriers[0].center_value
    return _refine(nl, [0.0, cls.theta, a_b], mu, N, R, tol, h)
