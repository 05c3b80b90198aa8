import numpy as np
import pytest
from oracles import oracle_feasible, oracle_fiber, six_probes

from gridhull.errors import InputError, ResourceError, UnboundedError
from gridhull.netmodel import feasible_polyhedron, generator_polyhedron
from gridhull.polytope import Polyhedron, contains, contains_many, support, vertices_2d
from gridhull.project import AggregationMap, ApproxSet, apply_map, gap_estimate, image_approx, image_exact

SQUARE = Polyhedron.box([0, 0], [1, 1])
SUM2 = AggregationMap(2, (0, 0), 1)


@pytest.fixture(scope="module")
def plt_exact(six, six_agg):
    return image_exact(feasible_polyhedron(six, "isf"), six_agg)


@pytest.fixture(scope="module")
def plt_approx(six, six_agg):
    return image_approx(feasible_polyhedron(six, "isf"), six_agg, budget=64, tol=1.0)


def test_apply_map_examples(six_agg):
    x = np.array([1.0, -2.0, 3.0])
    assert np.array_equal(apply_map(AggregationMap(3, (0, 1, 2), 3), x), x)
    assert apply_map(AggregationMap(3, (0, 0, 0), 1), [1.0, -3.0, 2.0]) == pytest.approx([0.0])
    y = apply_map(six_agg, [3000, 0, 0, 3000, 0, -6000])
    assert np.array_equal(y, [3000, 3000, -6000])


def test_aggregation_map_validation():
    with pytest.raises(InputError):
        AggregationMap(3, (0, 0), 1)
    with pytest.raises(InputError):
        AggregationMap(3, (0, 0, 0), 2)  # region 1 empty
    with pytest.raises(InputError):
        AggregationMap(2, (0, 1), 3)
    T = AggregationMap.from_groups([[0], [1, 2, 3, 4], [5]], ["n", "c", "s"])
    assert T.sizes == (1, 4, 1)
    assert T.matrix().sum(axis=0).tolist() == [1.0] * 6


def test_image_exact_identity():
    P = Polyhedron([[1.0, 0], [0, 1], [-1, 0], [0, -1], [1, 1]], [1, 1, 0, 0, 5])
    Q = image_exact(P, AggregationMap(2, (1, 0), 2))  # coordinate swap
    V = vertices_2d(Q)
    assert sorted(map(tuple, np.round(V, 9))) == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_image_exact_sum_is_segment():
    Q = image_exact(SQUARE, SUM2)
    assert support(Q, [1.0])[0] == pytest.approx(2.0)
    assert support(Q, [-1.0])[0] == pytest.approx(0.0)


def test_image_exact_matches_fiber_oracle(six, six_groups, plt_exact):
    Y = six_probes(500, seed=3)
    ours = contains_many(plt_exact, Y, 1e-6)
    for y, inside in zip(Y, ours):
        assert inside == oracle_feasible(six, six_groups, y)


def test_image_exact_resource_cap(six, six_agg, monkeypatch):
    monkeypatch.setenv("GRIDHULL_ROW_CAP", "3")
    with pytest.raises(ResourceError, match="image_approx"):
        image_exact(feasible_polyhedron(six, "isf"), six_agg)


def test_image_exact_bad_cap(six, six_agg, monkeypatch):
    monkeypatch.setenv("GRIDHULL_ROW_CAP", "many")
    with pytest.raises(InputError):
        image_exact(feasible_polyhedron(six, "isf"), six_agg)


def test_balance_heredity(six, six_agg, plt_exact):
    ones = np.ones(3)
    assert support(plt_exact, ones)[0] == pytest.approx(0.0, abs=1e-6)
    assert support(plt_exact, -ones)[0] == pytest.approx(0.0, abs=1e-6)
    PGt = image_exact(generator_polyhedron(six), six_agg)
    assert support(PGt, ones)[0] == pytest.approx(0.0, abs=1e-6)


def test_approx_square_axes():
    a = image_approx(SQUARE, AggregationMap(2, (0, 1), 2), budget=4)
    axes = [d for d in a.directions if np.count_nonzero(np.abs(d) > 1e-12) == 1]
    assert len(axes) == 4
    V = vertices_2d(a.outer)
    assert sorted(map(tuple, np.round(V, 9))) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert a.gap == pytest.approx(0.0, abs=1e-9)


def test_approx_segment():
    a = image_approx(SQUARE, SUM2, budget=2)
    assert len(a.directions) <= 2
    assert support(a.outer, [1.0])[0] == pytest.approx(2.0)
    assert support(a.outer, [-1.0])[0] == pytest.approx(0.0)
    assert sorted(a.inner_vertices.ravel()) == pytest.approx([0.0, 2.0])


def test_approx_six_bus_gap_against_exact(plt_exact, plt_approx):
    assert plt_approx.gap <= 1.0
    # exact vertices lie within 1 MW of the outer bracket, inner vertices inside exact
    Ve = vertices_2d(plt_exact)
    for d, h in zip(plt_approx.outer.A, plt_approx.outer.b):
        he = max(Ve @ d)
        assert he <= h + 1e-6
        assert h - he <= 1.0 * np.linalg.norm(d) + 1e-6
    assert np.all(contains_many(plt_exact, plt_approx.inner_vertices, 1e-6))


def test_approx_inner_vertices_have_fibers(six, six_groups, plt_approx):
    for v in plt_approx.inner_vertices:
        assert oracle_fiber(six, six_groups, v).status == 0


def test_approx_outer_halfspaces_are_supports(six, six_agg, plt_approx):
    P = feasible_polyhedron(six, "isf")
    T = six_agg.matrix()
    for d, h in zip(plt_approx.outer.A, plt_approx.outer.b):
        val, _ = support(P, T.T @ d)
        assert h == pytest.approx(val, abs=1e-6)


def test_approx_consistent_with_exact_on_probes(plt_exact, plt_approx):
    Y = six_probes(1000, seed=9)
    ex = contains_many(plt_exact, Y, 1e-6)
    out = contains_many(plt_approx.outer, Y, 1e-6)
    inn = contains_many(plt_approx.inner, Y, 1e-6)
    assert not np.any(ex & ~out)
    assert not np.any(inn & ~ex)


def test_inner_subset_outer(plt_approx):
    for v in plt_approx.inner_vertices:
        assert contains(plt_approx.outer, v, 1e-6 * max(1.0, np.abs(v).max()))


def test_gap_monotone_in_budget(six, six_agg):
    P = feasible_polyhedron(six, "isf")
    gaps = [image_approx(P, six_agg, budget=b, tol=1e-9).gap for b in (6, 8, 12, 16, 24, 32)]
    assert all(g2 <= g1 + 1e-9 for g1, g2 in zip(gaps, gaps[1:]))


def test_approx_deterministic(six, six_agg):
    P = feasible_polyhedron(six, "isf")
    a = image_approx(P, six_agg, budget=20, seed=5)
    b = image_approx(P, six_agg, budget=20, seed=5)
    assert np.array_equal(a.directions, b.directions)
    assert np.array_equal(a.outer.b, b.outer.b)


def test_approx_unbounded_reports_direction():
    P = Polyhedron([[-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]], [0.0, 1.0, 0.0])
    with pytest.raises(UnboundedError) as e:
        image_approx(P, AggregationMap(2, (0, 1), 2), budget=4)
    assert e.value.direction is not None


def test_gap_estimate_identical_zero():
    V = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    a = ApproxSet(V, SQUARE, SQUARE)
    assert gap_estimate(a) == pytest.approx(0.0, abs=1e-12)


def test_gap_estimate_square_vs_diamond():
    D = np.array([[0.5, 0], [1, 0.5], [0.5, 1], [0, 0.5]])
    inner = Polyhedron([[1, 1], [-1, 1], [-1, -1], [1, -1]], [1.5, 0.5, -0.5, 0.5])
    a = ApproxSet(D, SQUARE, inner)
    # zero along the axes; each square corner sticks out sqrt(2)/4 past a diamond edge
    assert max(D @ [1, 0]) == 1.0
    assert gap_estimate(a) == pytest.approx(np.sqrt(2) / 4, abs=1e-9)
