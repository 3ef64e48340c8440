"""Planar travelling fronts U(x - c t) joining 1 (behind) to 0 (ahead).

The profile solves ``mu U'' + c U' + f(U) = 0``. For bistable f the speed is
unique and found by shooting from the saddle at (1, 0); when F(1) = 0 the
front is stationary and its profile follows from the first integral
``U' = -sqrt(-2F(U)/mu)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import _kernels
from .reaction import Nonlinearity, Variant, classify

DEPARTURE = 1e-8
BALL = 1e-5
VMIN = 1e-4


class WaveSearchError(RuntimeError):
    pass


@dataclass(eq=False)
class WaveSolution:
    speed: float
    mu: float
    xi: np.ndarray = field(repr=False)
    U: np.ndarray = field(repr=False)

    def residual(self, nl: Nonlinearity) -> float:
        """Sup norm of mu U'' + c U' + f(U) by centered differences."""
        xi, U = self.xi, self.U
        h = np.diff(xi)
        if not np.allclose(h, h[0], rtol=1e-9, atol=0):
            raise ValueError("residual needs a uniform xi grid")
        h = h[0]
        d2 = (U[2:] - 2 * U[1:-1] + U[:-2]) / h**2
        d1 = (U[2:] - U[:-2]) / (2 * h)
        return float(np.max(np.abs(self.mu * d2 + self.speed * d1 + nl._raw_f(U[1:-1]))))


def _departure(nl: Nonlinearity, c: float, mu: float) -> tuple[float, float]:
    """Point just off (1, 0) on its unstable manifold, heading towards U < 1."""
    fp1 = nl.fprime_extended(1.0)
    lam = 0.5 * (-c / mu + math.sqrt((c / mu) ** 2 - 4.0 * fp1 / mu))
    norm = math.hypot(1.0, lam)
    return 1.0 - DEPARTURE / norm, -DEPARTURE * lam / norm


def _saddle_weights(nl: Nonlinearity, c: float, mu: float) -> tuple[float, float]:
    """Left eigenvector of the unstable direction at the origin (bistable f)."""
    fp0 = nl.fprime_extended(0.0)
    if fp0 >= 0:
        return 0.0, 0.0
    lam = 0.5 * (-c / mu + math.sqrt((c / mu) ** 2 - 4.0 * fp0 / mu))
    return lam + c / mu, 1.0


def _shoot(nl: Nonlinearity, c: float, mu: float, h: float, xi_max: float) -> int:
    U0, V0 = _departure(nl, c, mu)
    w1, w2 = _saddle_weights(nl, c, mu)
    outcome, _ = _kernels.wave_shoot(U0, V0, c, 1.0 / mu, h, xi_max, nl.as_kernel(),
                                     BALL, VMIN, w1, w2)
    return outcome


def wave_speed(nl: Nonlinearity, mu: float, tol: float = 1e-10,
               c_range: tuple[float, float] = (-5.0, 5.0)) -> float:
    """Front speed by bisection on the shooting outcome.

    Too small a speed overshoots (U crosses 0 with V < 0); too large a speed
    undershoots (V turns positive before U reaches 0). For monostable f this
    returns the smallest speed whose orbit stays non-negative.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    monostable = classify(nl).variant is Variant.MONOSTABLE
    h = 1e-3 * math.sqrt(mu)
    xi_max = 200.0 * math.sqrt(mu)
    lo, hi = c_range
    if _shoot(nl, lo, mu, h, xi_max) != _kernels.OVERSHOOT or \
            _shoot(nl, hi, mu, h, xi_max) == _kernels.OVERSHOOT:
        raise WaveSearchError(f"no speed bracket in [{lo}, {hi}]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        out = _shoot(nl, mid, mu, h, xi_max)
        if out == _kernels.OVERSHOOT:
            lo = mid
        elif out == _kernels.UNDERSHOOT or monostable:
            hi = mid
        else:
            return mid
    return 0.5 * (lo + hi)


def wave_profile(nl: Nonlinearity, mu: float, stride: int = 10) -> WaveSolution:
    """Speed and monotone profile of the front, centred so that U(0) = 1/2.

    Samples are every ``stride``-th RK4 node (spacing ``stride * 1e-3 sqrt(mu)``).
    """
    c = wave_speed(nl, mu)
    h = 1e-3 * math.sqrt(mu)
    U0, V0 = _departure(nl, c, mu)
    steps = int(400.0 * math.sqrt(mu) / h)
    Us, Vs = _kernels.wave_orbit(U0, V0, c, 1.0 / mu, h, steps, nl.as_kernel())
    # keep the monotone stretch between the departure and the approach to 0
    stop = np.flatnonzero((Us < 1e-6) | (Vs > 0))
    end = int(stop[0]) if stop.size else len(Us)
    U = Us[:end:stride]
    xi = np.arange(U.size) * (h * stride)
    k = int(np.argmax(U < 0.5))
    x0 = xi[k - 1] + (U[k - 1] - 0.5) / (U[k - 1] - U[k]) * (xi[k] - xi[k - 1])
    return WaveSolution(speed=c, mu=mu, xi=xi - x0, U=np.clip(U, 0.0, 1.0))


def stationary_profile(nl: Nonlinearity, mu: float, n: int = 8001) -> WaveSolution:
    """Stationary front for bistable f with F(1) = 0 via U' = -sqrt(-2F(U)/mu)."""
    cls = classify(nl)
    if cls.variant is not Variant.BISTABLE_F1_ZERO:
        raise ValueError("stationary profile requires a bistable f with F(1) = 0")
    lo, hi = 1e-6, 1.0 - 1e-6

    def rhs(_, y):
        return [-math.sqrt(max(-2.0 * nl._raw_F(y[0]) / mu, 0.0))]

    def hit(level):
        ev = lambda _, y: y[0] - level  # noqa: E731
        ev.terminal = True
        return ev

    fwd = solve_ivp(rhs, (0.0, 1e4), [0.5], method="DOP853", rtol=1e-13, atol=1e-15,
                    events=hit(lo), dense_output=True)
    bwd = solve_ivp(rhs, (0.0, -1e4), [0.5], method="DOP853", rtol=1e-13, atol=1e-15,
                    events=hit(hi), dense_output=True)
    xi_hi = float(fwd.t_events[0][0])
    xi_lo = float(bwd.t_events[0][0])
    xi = np.linspace(xi_lo, xi_hi, n)
    U = np.where(xi >= 0, fwd.sol(np.maximum(xi, 0.0))[0], bwd.sol(np.minimum(xi, 0.0))[0])
    return WaveSolution(speed=0.0, mu=mu, xi=xi, U=U)
