"""Compiled inner loops: reaction evaluation, radial RK4 shooting, implicit
radial heat steps and tridiagonal solves.

A nonlinearity is handed to the kernels as ``(kind, coef, knots, pc, lo, hi)``:

* ``kind == 0``: polynomial, ``coef`` in increasing degree order;
* ``kind == 1``: piecewise cubic, ``knots`` breakpoints and ``pc`` the
  ``(4, m)`` local power-basis coefficients (scipy ``PPoly`` layout);
* ``kind == 2``: factored cubic ``s(1-s)(s-coef[0])``, exact at its zeros.

Outside ``[lo, hi]`` the function is continued linearly (C^1).
"""
import numpy as np
from numba import njit

BLOWUP = 1
OK = 0


@njit(cache=True)
def _core(s, kind, coef, knots, pc):
    if kind == 2:
        return s * (1.0 - s) * (s - coef[0])
    if kind == 0:
        acc = 0.0
        for j in range(coef.shape[0] - 1, -1, -1):
            acc = acc * s + coef[j]
        return acc
    m = knots.shape[0] - 1
    i = np.searchsorted(knots, s, side="right") - 1
    if i < 0:
        i = 0
    elif i > m - 1:
        i = m - 1
    d = s - knots[i]
    return ((pc[0, i] * d + pc[1, i]) * d + pc[2, i]) * d + pc[3, i]


@njit(cache=True)
def _core_prime(s, kind, coef, knots, pc):
    if kind == 2:
        th = coef[0]
        return (1.0 - s) * (s - th) - s * (s - th) + s * (1.0 - s)
    if kind == 0:
        acc = 0.0
        for j in range(coef.shape[0] - 1, 0, -1):
            acc = acc * s + j * coef[j]
        return acc
    m = knots.shape[0] - 1
    i = np.searchsorted(knots, s, side="right") - 1
    if i < 0:
        i = 0
    elif i > m - 1:
        i = m - 1
    d = s - knots[i]
    return (3.0 * pc[0, i] * d + 2.0 * pc[1, i]) * d + pc[2, i]


@njit(cache=True)
def f_ext(s, nlp):
    kind, coef, knots, pc, lo, hi = nlp
    if s < lo:
        return _core(lo, kind, coef, knots, pc) + _core_prime(lo, kind, coef, knots, pc) * (s - lo)
    if s > hi:
        return _core(hi, kind, coef, knots, pc) + _core_prime(hi, kind, coef, knots, pc) * (s - hi)
    return _core(s, kind, coef, knots, pc)


@njit(cache=True)
def fprime_ext(s, nlp):
    kind, coef, knots, pc, lo, hi = nlp
    if s < lo:
        return _core_prime(lo, kind, coef, knots, pc)
    if s > hi:
        return _core_prime(hi, kind, coef, knots, pc)
    return _core_prime(s, kind, coef, knots, pc)


@njit(cache=True)
def f_vec(x, nlp):
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        out[i] = f_ext(x[i], nlp)
    return out


@njit(cache=True)
def fprime_vec(x, nlp):
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        out[i] = fprime_ext(x[i], nlp)
    return out


# ---------------------------------------------------------------------------
# radial steady-state ODE  u' = v,  v' = -(N-1)/r v - f(u)/mu


@njit(cache=True)
def _rk4(r, u, v, h, nm1, inv_mu, nlp):
    k1u = v
    k1v = -nm1 / r * v - f_ext(u, nlp) * inv_mu
    rm = r + 0.5 * h
    u2 = u + 0.5 * h * k1u
    v2 = v + 0.5 * h * k1v
    k2u = v2
    k2v = -nm1 / rm * v2 - f_ext(u2, nlp) * inv_mu
    u3 = u + 0.5 * h * k2u
    v3 = v + 0.5 * h * k2v
    k3u = v3
    k3v = -nm1 / rm * v3 - f_ext(u3, nlp) * inv_mu
    u4 = u + h * k3u
    v4 = v + h * k3v
    k4u = v4
    k4v = -nm1 / (r + h) * v4 - f_ext(u4, nlp) * inv_mu
    un = u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
    vn = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return un, vn


@njit(cache=True)
def _series(a, s, N, inv_mu, nlp):
    fa = f_ext(a, nlp)
    return a - fa * s * s * inv_mu / (2.0 * N), -fa * s * inv_mu / N


@njit(cache=True)
def integrate_radial(a, inv_mu, N, h, n, nlp, lo, hi):
    """March n steps of size h from r=0. Returns (u, v, status, last_index)."""
    u = np.empty(n + 1)
    v = np.empty(n + 1)
    u[0] = a
    v[0] = 0.0
    if n == 0:
        return u, v, OK, 0
    u[1], v[1] = _series(a, h, N, inv_mu, nlp)
    if u[1] < lo or u[1] > hi:
        return u, v, BLOWUP, 1
    nm1 = N - 1.0
    for k in range(1, n):
        u[k + 1], v[k + 1] = _rk4(k * h, u[k], v[k], h, nm1, inv_mu, nlp)
        if u[k + 1] < lo or u[k + 1] > hi or not np.isfinite(u[k + 1]):
            return u, v, BLOWUP, k + 1
    return u, v, OK, n


@njit(cache=True)
def first_zero(a, inv_mu, N, h, r_max, nlp, xtol):
    """Radius of the first zero of u, or -1.0 if none before r_max."""
    nm1 = N - 1.0
    u1, v1 = _series(a, h, N, inv_mu, nlp)
    if u1 <= 0.0:
        lo_s, hi_s = 0.0, h
        while hi_s - lo_s > xtol:
            mid = 0.5 * (lo_s + hi_s)
            um, _ = _series(a, mid, N, inv_mu, nlp)
            if um > 0.0:
                lo_s = mid
            else:
                hi_s = mid
        return 0.5 * (lo_s + hi_s)
    r = h
    u = u1
    v = v1
    k = 1
    while r < r_max:
        un, vn = _rk4(r, u, v, h, nm1, inv_mu, nlp)
        if un <= 0.0:
            lo_s, hi_s = 0.0, h
            while hi_s - lo_s > xtol:
                mid = 0.5 * (lo_s + hi_s)
                um, _ = _rk4(r, u, v, mid, nm1, inv_mu, nlp)
                if um > 0.0:
                    lo_s = mid
                else:
                    hi_s = mid
            return r + 0.5 * (lo_s + hi_s)
        u = un
        v = vn
        k += 1
        r = k * h
    return -1.0


@njit(cache=True)
def first_zero_batch(avals, inv_mu, N, h, r_max, nlp, xtol):
    out = np.empty(avals.shape[0])
    for i in range(avals.shape[0]):
        out[i] = first_zero(avals[i], inv_mu, N, h, r_max, nlp, xtol)
    return out


# ---------------------------------------------------------------------------
# phase-plane shooting for travelling waves:  U' = V,  V' = -(cV + f(U))/mu

UNDERSHOOT = 1  # V returns to 0 before U reaches 0: speed too large
OVERSHOOT = -1  # U crosses 0 with V < 0: speed too small
CONNECTED = 0


@njit(cache=True)
def _wave_rhs(U, V, c, inv_mu, nlp):
    return V, -(c * V + f_ext(U, nlp)) * inv_mu


@njit(cache=True)
def _wave_rk4(U, V, h, c, inv_mu, nlp):
    k1u, k1v = _wave_rhs(U, V, c, inv_mu, nlp)
    k2u, k2v = _wave_rhs(U + 0.5 * h * k1u, V + 0.5 * h * k1v, c, inv_mu, nlp)
    k3u, k3v = _wave_rhs(U + 0.5 * h * k2u, V + 0.5 * h * k2v, c, inv_mu, nlp)
    k4u, k4v = _wave_rhs(U + h * k3u, V + h * k3v, c, inv_mu, nlp)
    return (U + h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u),
            V + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v))


@njit(cache=True)
def wave_shoot(U0, V0, c, inv_mu, h, xi_max, nlp, ball, vmin, w1, w2):
    """Classify the orbit leaving (U0, V0). Returns (outcome, steps).

    Inside the ball around the origin the side is read from the sign of
    ``w1*U + w2*V``, the component along the unstable direction of the
    saddle at the origin (zero weights: plain connection).
    """
    U = U0
    V = V0
    n = int(xi_max / h)
    for k in range(n):
        U, V = _wave_rk4(U, V, h, c, inv_mu, nlp)
        if U * U + V * V <= ball * ball:
            side = w1 * U + w2 * V
            if side < 0.0:
                return OVERSHOOT, k + 1
            if side > 0.0:
                return UNDERSHOOT, k + 1
            return CONNECTED, k + 1
        if U < 0.0:
            if -V > vmin or w1 != 0.0 or w2 != 0.0:
                return OVERSHOOT, k + 1
            return CONNECTED, k + 1
        if V > 0.0:
            return UNDERSHOOT, k + 1
    # never reached the origin: trapped at an intermediate equilibrium
    return UNDERSHOOT, n


@njit(cache=True)
def wave_orbit(U0, V0, c, inv_mu, h, n, nlp):
    Us = np.empty(n + 1)
    Vs = np.empty(n + 1)
    Us[0] = U0
    Vs[0] = V0
    for k in range(n):
        Us[k + 1], Vs[k + 1] = _wave_rk4(Us[k], Vs[k], h, c, inv_mu, nlp)
    return Us, Vs


# ---------------------------------------------------------------------------
# tridiagonal algebra and the implicit radial step


@njit(cache=True)
def thomas(sub, diag, sup, rhs):
    """Solve a tridiagonal system; sub[0] and sup[-1] are ignored."""
    n = diag.shape[0]
    cp = np.empty(n)
    dp = np.empty(n)
    cp[0] = sup[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        den = diag[i] - sub[i] * cp[i - 1]
        cp[i] = sup[i] / den if i < n - 1 else 0.0
        dp[i] = (rhs[i] - sub[i] * dp[i - 1]) / den
    x = np.empty(n)
    x[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


@njit(cache=True)
def implicit_step(u, a_next, sub, diag, sup, bcoef, dt, nlp, tol, maxit):
    """One backward-Euler step with a fixed point on the reaction.

    ``u`` holds the interior nodes only. Returns (x, sweeps, last_change).
    """
    base = u.copy()
    base[-1] += bcoef * a_next
    x = u.copy()
    change = np.inf
    for it in range(maxit):
        rhs = base + dt * f_vec(x, nlp)
        xn = thomas(sub, diag, sup, rhs)
        change = np.max(np.abs(xn - x))
        x = xn
        if change <= tol:
            return x, it + 1, change
    return x, maxit, change


@njit(cache=True)
def march(u0, avals, sub, diag, sup, bcoef, dt, nlp, tol, maxit):
    """Run len(avals) implicit steps; states include the boundary node.

    Returns (states, failed_step) with failed_step = -1 on success.
    """
    n = u0.shape[0] - 1
    nt = avals.shape[0]
    states = np.empty((nt + 1, n + 1))
    states[0] = u0
    x = u0[:n].copy()
    for k in range(nt):
        x, sweeps, change = implicit_step(x, avals[k], sub, diag, sup, bcoef, dt, nlp, tol, maxit)
        states[k + 1, :n] = x
        states[k + 1, n] = avals[k]
        if change > tol:
            return states, k
    return states, -1


@njit(cache=True)
def march_to_rest(u0, a, sub, diag, sup, bcoef, dt, nlp, tol, maxit, rest_tol, nmax):
    """Constant boundary value until max|du|/dt <= rest_tol or nmax steps.

    Returns (u, steps, rate, failed).
    """
    n = u0.shape[0] - 1
    x = u0[:n].copy()
    rate = np.inf
    for k in range(nmax):
        xn, sweeps, change = implicit_step(x, a, sub, diag, sup, bcoef, dt, nlp, tol, maxit)
        if change > tol:
            out = np.empty(n + 1)
            out[:n] = xn
            out[n] = a
            return out, k + 1, rate, True
        rate = np.max(np.abs(xn - x)) / dt
        x = xn
        if rate <= rest_tol:
            out = np.empty(n + 1)
            out[:n] = x
            out[n] = a
            return out, k + 1, rate, False
    out = np.empty(n + 1)
    out[:n] = x
    out[n] = a
    return out, nmax, rate, False


@njit(cache=True)
def adjoint_sweep(states, sub, diag, sup, bcoef, dt, nlp, p_terminal):
    """Discrete adjoint of ``march``: gradient of a terminal cost with respect
    to the boundary values used by steps 1..nt.

    ``p_terminal`` is dJ/du(T) on all nodes (the boundary node included).
    """
    nt = states.shape[0] - 1
    n = states.shape[1] - 1
    grad = np.zeros(nt)
    if nt == 0:
        return grad
    grad[nt - 1] += p_terminal[n]
    p = p_terminal[:n].copy()
    subT = np.zeros(n)
    supT = np.zeros(n)
    for i in range(1, n):
        subT[i] = sup[i - 1]
    for i in range(n - 1):
        supT[i] = sub[i + 1]
    diagT = np.empty(n)
    for k in range(nt, 0, -1):
        for i in range(n):
            diagT[i] = diag[i] - dt * fprime_ext(states[k, i], nlp)
        lam = thomas(subT, diagT, supT, p)
        grad[k - 1] += bcoef * lam[n - 1]
        p = lam
    return grad
