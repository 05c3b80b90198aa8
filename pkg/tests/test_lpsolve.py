import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from oracles import dual_value, random_lp

from gridhull.errors import InputError
from gridhull.lpsolve import FEAS_TOL, LpProblem, Status, feasible, residuals, solve

METHODS = ["simplex", "highs"]


@pytest.mark.parametrize("method", METHODS)
def test_single_active_constraint(method):
    r = solve(LpProblem([1.0], [[1.0]], [5.0]), method)
    assert r.status is Status.OPTIMAL
    assert r.value == pytest.approx(5.0, abs=1e-12)


@pytest.mark.parametrize("method", METHODS)
def test_contradictory_bounds_infeasible(method):
    r = solve(LpProblem([1.0], [[-1.0], [1.0]], [-1.0, 0.0]), method)
    assert r.status is Status.INFEASIBLE
    assert r.point is None


@pytest.mark.parametrize("method", METHODS)
def test_equality_forces_value(method):
    p = LpProblem([1.0, 1.0], [[1, 0], [0, 1]], [2, 3], [[1, 1]], [4])
    r = solve(p, method)
    assert r.value == pytest.approx(4.0, abs=1e-9)
    ineq, eq = residuals(p, r.point)
    assert np.all(ineq <= FEAS_TOL) and np.all(eq <= FEAS_TOL)


@pytest.mark.parametrize("method", METHODS)
def test_unbounded_reported_not_synthetic(method):
    r = solve(LpProblem([1.0, 0.0], [[-1.0, 0.0]], [0.0]), method)
    assert r.status is Status.UNBOUNDED
    assert r.value == np.inf
    r = solve(LpProblem([1.0], [[1.0]], [3.0], maximize=False), method)
    assert r.status is Status.UNBOUNDED and r.value == -np.inf


def test_minimize_sense():
    r = solve(LpProblem([1.0], [[1.0], [-1.0]], [4.0, -2.0], maximize=False))
    assert r.value == pytest.approx(2.0)


def test_feasible_examples():
    assert feasible(LpProblem([0.0], [[1.0], [-1.0]], [1.0, 0.0]))
    assert not feasible(LpProblem([0.0], [[1.0], [-1.0]], [-1.0, 0.0]))


def test_feasible_six_bus_generator_box(six):
    from gridhull.netmodel import generator_polyhedron

    P = generator_polyhedron(six)
    assert feasible(LpProblem(np.zeros(6), P.A, P.b, P.E, P.f))
    # hand-built balanced dispatch: buses 1 and 4 cover the whole deficit
    x = np.array([3000.0, 0, 0, 3000.0, 0, -6000.0])
    assert np.all(P.A @ x <= P.b) and P.E @ x == pytest.approx(P.f)


def test_malformed_dimensions():
    with pytest.raises(InputError):
        LpProblem([1.0, 2.0], [[1.0]], [1.0])
    with pytest.raises(InputError):
        LpProblem([1.0], [[1.0]], [1.0, 2.0])
    with pytest.raises(InputError):
        LpProblem([], None, None)
    with pytest.raises(InputError):
        LpProblem([np.inf])


def test_unknown_method():
    with pytest.raises(InputError):
        solve(LpProblem([1.0], [[1.0]], [1.0]), "ipm")


def test_beale_cycling_example_terminates():
    # Beale's LP cycles under the textbook largest-coefficient rule
    c = np.array([0.75, -150.0, 0.02, -6.0])
    A = np.array([[0.25, -60.0, -0.04, 9.0], [0.5, -90.0, -0.02, 3.0], [0.0, 0.0, 1.0, 0.0]])
    b = np.array([0.0, 0.0, 1.0])
    A_full = np.vstack([A, -np.eye(4)])
    b_full = np.r_[b, np.zeros(4)]
    r = solve(LpProblem(c, A_full, b_full), "simplex")
    assert r.status is Status.OPTIMAL
    assert r.value == pytest.approx(0.05, abs=1e-9)


def test_strong_duality_random_lps():
    rng = np.random.default_rng(7)
    for _ in range(100):
        p = random_lp(rng, int(rng.integers(2, 6)), int(rng.integers(1, 8)))
        r = solve(p, "simplex")
        assert r.status is Status.OPTIMAL
        assert r.value == pytest.approx(dual_value(p), abs=1e-7)
        ineq, eq = residuals(p, r.point)
        assert np.all(ineq <= FEAS_TOL) and np.all(eq <= FEAS_TOL)


def test_determinism_bit_identical():
    rng = np.random.default_rng(3)
    for _ in range(20):
        p = random_lp(rng, 4, 6)
        a, b = solve(p), solve(p)
        assert a.status is b.status
        assert a.value == b.value
        assert np.array_equal(a.point, b.point)


@settings(max_examples=60, deadline=None)
@given(
    st.integers(1, 4).flatmap(
        lambda n: st.tuples(
            st.just(n),
            st.lists(st.floats(-3, 3, allow_nan=False), min_size=n, max_size=n),
            st.lists(st.lists(st.floats(-3, 3, allow_nan=False), min_size=n, max_size=n), min_size=1, max_size=5),
            st.lists(st.floats(-2, 2, allow_nan=False), min_size=5, max_size=5),
        )
    )
)
def test_status_agrees_with_scipy(data):
    n, c, rows, rhs = data
    A = np.vstack([np.array(rows), np.eye(n), -np.eye(n)])
    b = np.r_[rhs[: len(rows)], np.full(2 * n, 10.0)]
    ours = solve(LpProblem(c, A, b), "simplex")
    ref = linprog(-np.asarray(c), A_ub=A, b_ub=b, bounds=[(None, None)] * n, method="highs")
    if ref.status == 2:
        assert ours.status is Status.INFEASIBLE
    else:
        assert ours.status is Status.OPTIMAL
        assert ours.value == pytest.approx(-ref.fun, abs=1e-7)
