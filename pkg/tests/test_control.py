import math
from dataclasses import replace

import numpy as np
import pytest

from rdcontrol import Nonlinearity
from rdcontrol.control import (
    HorizonError,
    Objective,
    OptimizationProblem,
    adjoint_gradient,
    feasibility_solve,
    min_time_search,
    mismatch,
    quasistatic_optimize,
    staircase_schedule,
)
from rdcontrol.evolve import ControlSchedule, Grid, simulate
from rdcontrol.steady import SteadyPath, integrate_radial

FIG5_R = 1 / math.sqrt(math.pi)


def _fd_gradient(problem, steps, delta=1e-6):
    out = np.empty_like(steps)
    for k in range(steps.size):
        up, dn = steps.copy(), steps.copy()
        up[k] += delta
        dn[k] -= delta
        out[k] = (mismatch(problem, up)[0] - mismatch(problem, dn)[0]) / (2 * delta)
    return out


def _random_instance(nl, seed, nr=60, nt=80, mu=1.0):
    rng = np.random.default_rng(seed)
    g = Grid(N=int(rng.integers(1, 4)), R=float(rng.uniform(1, 5)), nr=nr, dt=0.05, mu=mu,
             fp_tol=1e-15, fp_max=200)
    u0 = rng.uniform(0, 1, nr + 1)
    target = rng.uniform(0, 1, nr + 1)
    p = OptimizationProblem(nl, g, u0, target, eps=0.01, T=nt * 0.05, nt=nt)
    steps = rng.uniform(0.05, 0.95, nt)  # interior, so +-delta stays admissible
    return p, steps


@pytest.mark.parametrize("seed", range(5))
def test_adjoint_matches_finite_differences(cubic, seed):
    p, steps = _random_instance(cubic, seed)
    g = adjoint_gradient(p, ControlSchedule.from_steps(steps, p.timed_grid.dt, p.u0[-1]))
    fd = _fd_gradient(p, steps)
    rel = np.abs(g - fd) / np.abs(fd)
    assert rel.max() <= 1e-5


@pytest.mark.parametrize("seed", range(3))
def test_adjoint_pure_heat(seed):
    s = np.linspace(0, 1, 11)
    heat = Nonlinearity.custom(s, np.zeros_like(s), lipschitz=0.0)
    p, steps = _random_instance(heat, seed)
    g = adjoint_gradient(p, ControlSchedule.from_steps(steps, p.timed_grid.dt, p.u0[-1]))
    fd = _fd_gradient(p, steps)
    assert np.linalg.norm(g - fd) / np.linalg.norm(fd) <= 1e-7


def test_adjoint_zero_horizon(cubic):
    g = Grid(N=2, R=1.0, nr=50)
    p = OptimizationProblem(cubic, g, 0.0, 0.0, eps=0.01, T=0.0)
    assert p.nt == 0
    assert adjoint_gradient(p, ControlSchedule(np.zeros(1), np.zeros(1))).size == 0


@pytest.mark.parametrize("level", [0.0, 1 / 3])
@pytest.mark.parametrize("T", [0.5, 3.0])
def test_feasibility_trivial(cubic, level, T):
    g = Grid(N=2, R=1.0, nr=50)
    p = OptimizationProblem(cubic, g, level, level, eps=0.01, T=T)
    res = feasibility_solve(p)
    assert res.converged and res.iterations == 0
    assert res.objective_value == pytest.approx(0.0, abs=1e-25)


@pytest.fixture(scope="module")
def fig5(cubic):
    g = Grid(N=2, R=FIG5_R, nr=50, dt=0.01, mu=0.0611)
    return OptimizationProblem(cubic, g, 0.0, 1 / 3, eps=0.01, T=1.0)


def test_feasibility_fig5(fig5):
    big = feasibility_solve(fig5.with_horizon(10.0))
    assert big.converged and big.terminal_error <= 0.01
    tiny = feasibility_solve(fig5.with_horizon(0.01))
    assert not tiny.converged and tiny.terminal_error > 0.01


def test_result_resimulation(fig5, cubic):
    p = fig5.with_horizon(2.0)
    res = feasibility_solve(p)
    tr = simulate(cubic, p.timed_grid, p.u0, res.schedule)
    assert abs(tr.terminal_distance(p.target) - res.terminal_error) <= 1e-10
    assert res.schedule.values.min() >= 0 and res.schedule.values.max() <= 1


def test_min_time_inside_tube(cubic):
    g = Grid(N=2, R=1.0, nr=50)
    p = OptimizationProblem(cubic, g, 0.3, 1 / 3, eps=0.05, T=1.0)
    T, res, probes = min_time_search(p)
    assert T == 0.0 and res.converged


def test_min_time_infeasible_horizon(fig5):
    with pytest.raises(HorizonError):
        min_time_search(fig5, T_hi=0.05)


@pytest.mark.parametrize("seed", range(3))
def test_min_time_probe_monotone(cubic, seed):
    rng = np.random.default_rng(seed)
    g = Grid(N=2, R=FIG5_R, nr=50, dt=0.02, mu=0.0611)
    u0 = rng.uniform(0, 0.05, g.nr + 1)
    p = OptimizationProblem(cubic, g, u0, 1 / 3, eps=0.01, T=1.0)
    T, res, probes = min_time_search(p, T_hi=2.0, polish_iter=0)
    feas = sorted(probes, key=lambda q: q.T)
    first = next(i for i, q in enumerate(feas) if q.feasible)
    assert all(q.feasible for q in feas[first:])
    assert feas[first].T == pytest.approx(T)
    assert res.terminal_error <= 0.01


def test_staircase_identical_endpoints(cubic):
    zero = integrate_radial(cubic, 0.0, 1.0, 2, 5.0)
    path = SteadyPath([zero, zero], 0.0)
    g = Grid(N=2, R=5.0, nr=50)
    sched, traj = staircase_schedule(cubic, path, g, 0.0, dwell=1.0, eps=0.01)
    assert sched.nt == 0
    assert traj.terminal_distance(0.0) == 0.0


def test_quasistatic_constant_is_optimal(cubic):
    g = Grid(N=2, R=1.0, nr=50, mu=5.0)
    p = OptimizationProblem(cubic, g, 1 / 3, 1 / 3, eps=0.01, T=2.0, rate_cap=0.5,
                            objective=Objective.CONTROL_SMOOTHNESS)
    res = quasistatic_optimize(p, init=np.full(p.nt, 1 / 3))
    assert res.converged and res.objective_value == pytest.approx(0.0, abs=1e-14)
    assert res.terms["smoothness"] == pytest.approx(0.0, abs=1e-14)


def test_quasistatic_respects_rate_cap(cubic):
    g = Grid(N=2, R=2.0, nr=50, mu=1.0)
    p = OptimizationProblem(cubic, g, 0.0, 1 / 3, eps=0.01, T=20.0, rate_cap=0.1,
                            objective=Objective.CONTROL_SMOOTHNESS)
    res = quasistatic_optimize(p)
    assert res.terminal_error <= 0.01
    a = res.schedule.values
    assert np.max(np.abs(np.diff(a))) / p.timed_grid.dt <= 0.1
    assert a.min() >= 0 and a.max() <= 1
