import math

import numpy as np
import pytest

from contactconf.control.qp import QPInfeasible, QPProblem, solve_qp, objective_value

from oracles import qp_brute_force


def random_pd(rng, n=3):
    m = rng.normal(size=(n, n))
    return m @ m.T + 0.1 * np.eye(n)


def test_unconstrained_matches_normal_equations():
    rng = np.random.default_rng(0)
    H = random_pd(rng)
    g = rng.normal(size=3)
    # rows that are all slack at the optimum
    x_star = np.linalg.solve(H, -g)
    A = rng.normal(size=(4, 3))
    b = A @ x_star + rng.uniform(1.0, 2.0, size=4)
    sol = solve_qp(QPProblem(H, g, A, b))
    assert np.allclose(sol.x, x_star, atol=1e-10)
    assert sol.active == []


def test_single_active_row_lagrange():
    # min 1/2 ||x||^2 s.t. x0 <= -1: optimum at (-1, 0, 0), multiplier 1
    H = np.eye(3)
    g = np.zeros(3)
    A = np.array([[1.0, 0.0, 0.0]])
    b = np.array([-1.0])
    sol = solve_qp(QPProblem(H, g, A, b))
    assert np.allclose(sol.x, [-1.0, 0.0, 0.0], atol=1e-12)
    assert sol.active == [0]
    assert sol.duals[0] == pytest.approx(1.0, abs=1e-12)
    assert sol.max_kkt_residual < 1e-8


def test_two_active_rows():
    # min (x-2)^2 + (y-2)^2 + z^2 with x <= 1, y <= 0.5
    H = 2 * np.eye(3)
    g = np.array([-4.0, -4.0, 0.0])
    A = np.array([[1.0, 0, 0], [0, 1.0, 0]])
    b = np.array([1.0, 0.5])
    sol = solve_qp(QPProblem(H, g, A, b))
    assert np.allclose(sol.x, [1.0, 0.5, 0.0], atol=1e-12)
    assert sorted(sol.active) == [0, 1]


def test_infeasible_reports_rows():
    H = np.eye(3)
    g = np.zeros(3)
    A = np.array([[1.0, 0, 0], [-1.0, 0, 0]])
    b = np.array([-1.0, -1.0])  # x <= -1 and x >= 1
    with pytest.raises(QPInfeasible) as err:
        solve_qp(QPProblem(H, g, A, b, labels=["lo", "hi"]))
    assert err.value.violated_rows


@pytest.mark.parametrize("seed", range(10))
def test_random_feasible_instances_against_oracle(seed):
    rng = np.random.default_rng(seed)
    for _ in range(10):
        H = random_pd(rng)
        g = rng.normal(size=3) * 2
        m = rng.integers(3, 13)
        A = rng.normal(size=(m, 3))
        x0 = rng.normal(size=3) * 0.5
        b = A @ x0 + rng.uniform(0.0, 1.5, size=m)  # x0 feasible
        qp = QPProblem(H, g, A, b)
        sol = solve_qp(qp)
        x_ref, val_ref = qp_brute_force(H, g, A, b)
        assert x_ref is not None
        assert objective_value(qp, sol.x) == pytest.approx(val_ref, abs=1e-6)
        assert sol.max_kkt_residual < 1e-8


def test_degenerate_duplicate_rows():
    H = np.eye(3)
    g = np.array([-1.0, 0.0, 0.0])
    A = np.array([[1.0, 0, 0], [1.0, 0, 0], [1.0, 0, 0]])
    b = np.array([0.5, 0.5, 0.5])
    sol = solve_qp(QPProblem(H, g, A, b))
    assert sol.x[0] == pytest.approx(0.5, abs=1e-10)
    assert sol.max_kkt_residual < 1e-8
