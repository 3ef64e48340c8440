"""Independent reference computations (scipy quadrature / adaptive ODE
solvers), sharing no code with the package's fixed-step kernels."""
from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import minimize_scalar


def cubic_F(s, theta):
    return -theta * s**2 / 2 + (1 + theta) * s**3 / 3 - s**4 / 4


def cubic_f(s, theta):
    return s * (1 - s) * (s - theta)


def rho_1d(a, theta, mu=1.0):
    """First zero of u'' = -f(u)/mu, u(0) = a, u'(0) = 0, by the energy quadrature."""
    Fa = cubic_F(a, theta)
    # substitute u = a - w^2 to remove the inverse square root at u = a
    def integrand(w):
        u = a - w * w
        d = Fa - cubic_F(u, theta)
        return 2 * w / math.sqrt(2 * d / mu)
    val, _ = quad(integrand, 0.0, math.sqrt(a), limit=400, epsabs=1e-13, epsrel=1e-13)
    return val


def rho_radial(a, theta, N, mu=1.0, r_max=200.0):
    """First zero by an adaptive DOP853 integration (series start off r = 0)."""
    r0 = 1e-6
    f0 = cubic_f(a, theta)
    u0 = a - f0 / mu * r0**2 / (2 * N)
    v0 = -f0 / mu * r0 / N

    def rhs(r, y):
        return [y[1], -(N - 1) / r * y[1] - cubic_f(y[0], theta) / mu]

    def hit(r, y):
        return y[0]
    hit.terminal = True
    hit.direction = -1
    sol = solve_ivp(rhs, (r0, r_max), [u0, v0], method="DOP853", rtol=1e-12, atol=1e-14,
                    events=hit)
    return float(sol.t_events[0][0]) if sol.t_events[0].size else math.inf


def mu_star_radial(theta, N, R, bracket):
    res = minimize_scalar(lambda a: rho_radial(a, theta, N), bounds=bracket, method="bounded",
                          options={"xatol": 1e-10})
    return R**2 / res.fun**2, res.x


def lower_bound_grid(theta, N, m, n=2_000_001):
    """Brute-force maximum over a dense delta grid."""
    F1 = cubic_F(1.0, theta)
    Ft = cubic_F(theta, theta)
    d = np.linspace(0, 1, n)[1:-1]
    q = (1 - d) ** N
    val = 2 * d**2 * math.gamma(N / 2 + 1) ** (2 / N) * (Ft + q * (F1 - Ft)) * m ** (2 / N) / (math.pi * (1 - q))
    k = int(np.argmax(val))
    return float(val[k]), float(d[k])
