import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import lower_bound_grid, mu_star_radial, rho_1d, rho_radial
from rdcontrol import Nonlinearity, classify, region_halfwidth
from rdcontrol.steady import (
    Ball,
    BlowUpError,
    Interval,
    PreconditionError,
    ThresholdUndefinedError,
    build_path,
    find_barriers,
    first_zero_radius,
    integrate_radial,
    lambda1,
    mu_star_lower_bound,
    mu_star_numeric,
    mu_star_upper_bound,
    path_to_minimal_barrier,
)

# frozen from the quadrature / DOP853 oracles in oracles.py
MU_STAR_UNIT_INTERVAL = 0.00917941554161459   # N=1, R=1/2
MU_STAR_UNIT_MEASURE_DISK = 0.0037142373276450  # N=2, R=1/sqrt(pi)
MU_STAR_UNIT_BALL_3D = 0.005286103538334946  # N=3, R=1
LOWER_N2_M1 = 0.0012364628389915852
LOWER_1D = (1 / 36) ** 2 / (8 * (1 / 36 + 5 / 972))


def test_integrate_constant_states(cubic):
    p = integrate_radial(cubic, 1 / 3, 1.0, 2, 10.0)
    assert np.all(p.u == 1 / 3) and np.all(p.v == 0)
    z = integrate_radial(cubic, 0.0, 0.3, 3, 4.0)
    assert np.all(z.u == 0) and np.all(z.v == 0)
    assert p.u[0] == 1 / 3 and p.v[0] == 0


def test_integrate_matches_fine_reference(cubic):
    coarse = integrate_radial(cubic, 0.3, 1.0, 2, 10.0)
    fine = integrate_radial(cubic, 0.3, 1.0, 2, 10.0, h=1e-4)
    assert abs(coarse.u[-1] - fine.u[-1]) <= 1e-6
    c = classify(cubic)
    assert coarse.u.min() >= 0 and coarse.u.max() <= c.theta1


def test_integrate_step_guard(cubic):
    with pytest.raises(ValueError):
        integrate_radial(cubic, 0.3, 1.0, 2, 10.0, h=0.1)


def test_blowup_reported(cubic):
    with pytest.raises(BlowUpError) as err:
        integrate_radial(cubic, 0.99, 0.01, 1, 5.0)
    assert 0 < err.value.radius < 5.0


def test_first_zero_examples(cubic):
    assert first_zero_radius(cubic, 0.3, 1.0, 2) is None
    rho9 = first_zero_radius(cubic, 0.9, 1.0, 1)
    assert rho9 == pytest.approx(rho_1d(0.9, 1 / 3), abs=1e-6)
    assert first_zero_radius(cubic, 0.99, 1.0, 1) > rho9


@pytest.mark.parametrize("N", [2, 3])
@pytest.mark.parametrize("a", [0.6, 0.8, 0.95])
def test_first_zero_matches_adaptive_oracle(cubic, N, a):
    ref = rho_radial(a, 1 / 3, N, r_max=100.0)
    got = first_zero_radius(cubic, a, 1.0, N)
    if math.isinf(ref):
        assert got is None
    else:
        assert got == pytest.approx(ref, abs=1e-7)


def test_barriers_examples(cubic, cubic_half):
    assert find_barriers(cubic, 0.02, 1, 0.5) == []
    bars = find_barriers(cubic, 0.001, 1, 0.5)
    assert bars and bars[0].is_minimal
    for b in bars:
        assert b.profile.u.max() > 1 / 3
        assert np.all(b.profile.u[:-1] > 0) and abs(b.profile.u[-1]) < 1e-6
    assert find_barriers(cubic_half, 0.001, 2, 1.0) == []


def test_barrier_counts_pair_below_mu_star(cubic):
    mu = 0.9 * MU_STAR_UNIT_MEASURE_DISK
    bars = find_barriers(cubic, mu, 2, 1 / math.sqrt(math.pi))
    assert len(bars) == 2
    assert bars[0].center_value < bars[1].center_value


def test_mu_star_bracket_unit_interval(cubic):
    val = mu_star_numeric(cubic, 1, 0.5)
    assert val == pytest.approx(MU_STAR_UNIT_INTERVAL, rel=1e-8)
    lo = mu_star_lower_bound(cubic, 1, 1.0).value
    hi = mu_star_upper_bound(cubic, lambda1(Interval(1.0)))
    assert lo <= val <= hi


def test_mu_star_bracket_unit_disk(cubic):
    val = mu_star_numeric(cubic, 2, 1.0)
    lo = mu_star_lower_bound(cubic, 2, math.pi).value
    hi = mu_star_upper_bound(cubic, lambda1(Ball(2, 1.0)))
    assert lo <= val <= hi


def test_mu_star_regressions(cubic):
    R = 1 / math.sqrt(math.pi)
    assert mu_star_numeric(cubic, 2, R) == pytest.approx(MU_STAR_UNIT_MEASURE_DISK, rel=1e-8)
    assert mu_star_numeric(cubic, 3, 1.0) == pytest.approx(MU_STAR_UNIT_BALL_3D, rel=1e-8)


@pytest.mark.slow
@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_mu_star_disk_live_oracle(cubic):
    ref, _ = mu_star_radial(1 / 3, 2, 1 / math.sqrt(math.pi), (0.6, 0.99))
    assert ref == pytest.approx(MU_STAR_UNIT_MEASURE_DISK, rel=1e-8)


@pytest.mark.parametrize("N,R", [(1, 0.5), (2, 1.0), (3, 2.0)])
def test_mu_star_scaling(cubic, N, R):
    assert mu_star_numeric(cubic, N, 2 * R) == pytest.approx(4 * mu_star_numeric(cubic, N, R), rel=1e-8)


def test_mu_star_undefined_for_balanced(cubic_half):
    with pytest.raises(ThresholdUndefinedError):
        mu_star_numeric(cubic_half, 2, 1.0)


def test_lower_bound_examples(cubic, cubic_half):
    lb = mu_star_lower_bound(cubic, 1, 1.0)
    assert lb.value == pytest.approx(LOWER_1D, abs=1e-10)
    assert lb.delta == pytest.approx((1 / 36) / (2 * (1 / 36 + 5 / 972)), abs=1e-6)
    assert mu_star_lower_bound(cubic, 2, 1.0).value == pytest.approx(LOWER_N2_M1, abs=1e-12)
    half = mu_star_lower_bound(cubic_half, 2, 1.0)
    assert half.value == 0 and not half.applicable


@pytest.mark.slow
def test_lower_bound_live_grid_oracle():
    val, _ = lower_bound_grid(1 / 3, 2, 1.0)
    assert val == pytest.approx(LOWER_N2_M1, abs=1e-12)


def test_upper_bound_examples(cubic, logistic):
    assert mu_star_upper_bound(cubic, math.pi**2) == pytest.approx(1 / 9 / math.pi**2, rel=1e-10)
    lam = 3.7
    assert mu_star_upper_bound(logistic, lam) == pytest.approx(1 / lam, rel=1e-8)
    assert mu_star_upper_bound(cubic, lambda1(Ball(2, 1.0))) == pytest.approx(0.0192137, abs=1e-6)


def test_lambda1_examples():
    assert lambda1(Interval(1.0)) == pytest.approx(math.pi**2, rel=1e-15)
    assert lambda1(Ball(2, 1.0)) == pytest.approx(5.7831860, abs=1e-7)
    assert lambda1(Ball(3, 1.0)) == pytest.approx(math.pi**2, rel=1e-15)
    assert lambda1(Ball(1, 0.5)) == lambda1(Interval(1.0))
    with pytest.raises(ValueError):
        lambda1(Ball(4, 1.0))


def test_path_trivial_tolerance(cubic):
    p = build_path(cubic, 1.0, 2, 10.0, tol=1.0)
    assert len(p) == 2
    assert np.all(p.profiles[0].u == 0) and np.allclose(p.profiles[1].u, 1 / 3, atol=1e-10)


def test_path_r10(cubic):
    p = build_path(cubic, 1.0, 2, 10.0)
    assert p.continuity_bound <= 0.02
    assert all(q.u.min() >= 0 and q.u.max() <= 1 for q in p.profiles)
    inner = p.trace[1:-1]
    assert np.all((inner > 0) & (inner < 1))
    d = p.trace - 1 / 3
    assert np.any(d > 0) and np.any(d[1:] < 0)  # crosses theta


def test_path_trace_1d_vs_2d(cubic):
    """N=1 trace oscillation amplitude exceeds N=2 at matched centers."""
    p2 = build_path(cubic, 1.0, 2, 10.0)
    a = p2.centers[1:-1]
    amp1 = max(abs(integrate_radial(cubic, x, 1.0, 1, 10.0).u[-1] - 1 / 3) for x in a)
    amp2 = float(np.max(np.abs(p2.trace[1:-1] - 1 / 3)))
    assert amp1 > amp2


def test_profile_amplitude_1d_vs_2d(cubic):
    # along r, the N=1 orbit keeps its energy while N=2 loses it
    a = 0.3
    u1 = integrate_radial(cubic, a, 1.0, 1, 30.0).u
    u2 = integrate_radial(cubic, a, 1.0, 2, 30.0).u
    tail = slice(len(u1) // 2, None)
    assert np.max(np.abs(u1[tail] - 1 / 3)) > np.max(np.abs(u2[tail] - 1 / 3))


def test_path_to_minimal_barrier(cubic):
    mu = 0.5 * mu_star_numeric(cubic, 2, 10.0)
    p = path_to_minimal_barrier(cubic, mu, 2, 10.0)
    assert abs(p.trace[-1]) <= 1e-6
    assert p.continuity_bound <= 0.02
    assert all(q.u.min() >= -1e-9 and q.u.max() <= 1 for q in p.profiles)
    c = classify(cubic)
    beyond = p.trace[p.centers > c.theta1]
    k = int(np.argmax(beyond))
    assert np.all(np.diff(beyond[k:]) < 0)
    for q in p.profiles:
        if q.a > c.theta1:
            assert q.energy(cubic)[0] > 0


def test_path_to_barrier_needs_barrier(cubic):
    with pytest.raises(PreconditionError):
        path_to_minimal_barrier(cubic, 2.0, 2, 10.0)


# ---- properties ------------------------------------------------------------

@settings(max_examples=200)
@given(a=st.floats(0.0, 0.999), N=st.sampled_from([2, 3]), mu=st.floats(0.05, 2.0))
def test_energy_dissipation(cubic, a, N, mu):
    R = 10 * math.sqrt(mu)
    try:
        p = integrate_radial(cubic, a, mu, N, R)
    except BlowUpError:
        return
    inc = np.diff(p.energy(cubic))
    assert np.sum(np.maximum(inc, 0)) <= 1e-6


@given(a=st.floats(0.0, 0.99))
def test_energy_conservation_1d(cubic, a):
    try:
        p = integrate_radial(cubic, a, 1.0, 1, 8.0)
    except BlowUpError:
        return
    E = p.energy(cubic)
    assert np.max(np.abs(E - E[0])) <= 1e-8


@given(a=st.floats(0.0, 1.0), N=st.sampled_from([1, 2, 3]), mu=st.floats(0.05, 2.0))
def test_invariant_region(cubic, a, N, mu):
    c = classify(cubic)
    a = a * c.theta1
    p = integrate_radial(cubic, a, mu, N, 10 * math.sqrt(mu))
    assert p.u.min() >= -1e-9 and p.u.max() <= c.theta1 + 1e-9
    w = np.array([region_halfwidth(cubic, min(max(x, 0.0), c.theta1), c) for x in p.u])
    assert np.all(np.abs(p.v) <= w / math.sqrt(mu) + 1e-6)


@given(a=st.floats(0.01, 0.999), da=st.floats(-1e-3, 1e-3))
def test_continuous_dependence(cubic, a, da):
    b = min(max(a + da, 0.0), 1.0)
    R = 2.0
    try:
        p, q = integrate_radial(cubic, a, 1.0, 2, R), integrate_radial(cubic, b, 1.0, 2, R)
    except BlowUpError:
        return
    L = cubic.lipschitz
    assert p.sup_distance(q) <= math.exp((1 + L) * R / 2) * abs(a - b) + 1e-12


@given(a=st.floats(0.0, 0.95), mu=st.sampled_from([0.25, 4.0]))
def test_mu_scaling_of_profiles(cubic, a, mu):
    base = integrate_radial(cubic, a, 1.0, 2, 10.0)
    scaled = integrate_radial(cubic, a, mu, 2, 10.0 * math.sqrt(mu))
    assert np.allclose(scaled.r / math.sqrt(mu), base.r, atol=1e-12)
    assert np.max(np.abs(scaled.u - base.u)) <= 1e-8


@settings(max_examples=10)
@given(theta=st.floats(0.1, 0.45))
def test_barrier_maximum_above_theta(theta):
    nl = Nonlinearity.cubic(theta)
    mu = 0.5 * mu_star_numeric(nl, 1, 0.5)
    for b in find_barriers(nl, mu, 1, 0.5):
        assert b.profile.u.max() > theta
