import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import mc_area

from gridhull.errors import InputError, UnboundedError
from gridhull.polytope import Polyhedron, PolyUnion, check_disjoint, contains, contains_many, polygon_area, vertices_2d
from gridhull.setdiff import region_diff, union_contains, union_contains_many

SQUARE = Polyhedron.box([0, 0], [1, 1])
HOLE = Polyhedron.box([0.25, 0.25], [0.75, 0.75])


def _boundary_band(P, Y, band=1e-6):
    """Probes within ``band`` of some facet of ``P``."""
    A = P.A / np.linalg.norm(P.A, axis=1, keepdims=True)
    b = P.b / np.linalg.norm(P.A, axis=1)
    return np.any(np.abs(Y @ A.T - b) <= band, axis=1)


def test_square_minus_itself_is_empty():
    assert region_diff(SQUARE, [SQUARE]).is_empty


def test_square_minus_left_half():
    U = region_diff(SQUARE, [Polyhedron([[1.0, 0.0]], [0.5])])
    assert len(U) == 1
    V = vertices_2d(U.parts[0])
    assert sorted(map(tuple, np.round(V, 9))) == [(0.5, 0), (0.5, 1), (1, 0), (1, 1)]


def test_square_minus_centered_square_probes():
    U = region_diff(SQUARE, [HOLE])
    assert U.disjoint_interiors and len(U) == 4
    assert check_disjoint(U) == []
    Y = np.random.default_rng(0).uniform(0, 1, size=(10_000, 2))
    band = _boundary_band(HOLE, Y)
    got = union_contains_many(U, Y)
    want = ~contains_many(HOLE, Y, 0.0)
    assert np.count_nonzero((got != want) & ~band) == 0


def test_area_conservation():
    R = [HOLE, Polyhedron([[1.0, 1.0]], [0.4])]
    U = region_diff(SQUARE, R)
    pieces = sum(polygon_area(vertices_2d(P)) for P in U.parts)

    def removed(Y):
        out = np.zeros(len(Y), dtype=bool)
        for Ri in R:
            out |= contains_many(Ri, Y, 0.0)
        return out

    cut = mc_area(removed, [0, 0], [1, 1])
    assert pieces + cut == pytest.approx(1.0, rel=0.02)


def test_empty_r_list_returns_y():
    U = region_diff(SQUARE, [])
    assert len(U) == 1


def test_unbounded_rejected():
    with pytest.raises(UnboundedError):
        region_diff(Polyhedron([[1.0, 0.0]], [1.0]), [HOLE])


def test_dimension_mismatch():
    with pytest.raises(InputError):
        region_diff(SQUARE, [Polyhedron.box([0], [1])])


def test_slivers_dropped():
    # R leaves a 1e-9 wide strip of the square
    U = region_diff(SQUARE, [Polyhedron([[1.0, 0.0]], [1.0 - 1e-9])])
    assert U.is_empty


def test_equality_constrained_pieces():
    # a triangle in the plane sum y = 0 minus a half-plane given with the same equality
    Y = Polyhedron([[-1, 0, 0], [0, -1, 0]], [0, 0], [[1, 1, 1]], [0], dim=3)
    Y = Y.add_rows([[1, 1, 0]], [1])
    R = Polyhedron([[1, 0, 0]], [0.5], [[1, 1, 1]], [0], dim=3)
    U = region_diff(Y, [R])
    assert len(U) == 1
    assert union_contains(U, [0.75, 0.1, -0.85])
    assert not union_contains(U, [0.25, 0.1, -0.35])


def test_union_contains_examples():
    empty = PolyUnion([], dim=2)
    assert not union_contains(empty, [0.5, 0.5])
    single = PolyUnion([SQUARE])
    assert union_contains(single, [0.5, 0.5]) == contains(SQUARE, [0.5, 0.5])
    L = region_diff(SQUARE, [HOLE])
    assert not union_contains(L, [0.5, 0.5])
    assert union_contains(L, [0.1, 0.1])
    with pytest.raises(InputError):
        union_contains(L, [0.1])


def test_complement_idempotence():
    R = [HOLE, Polyhedron([[1.0, -1.0]], [-0.6])]
    U = region_diff(SQUARE, R)
    W = region_diff(SQUARE, U.parts)
    Y = np.random.default_rng(3).uniform(0, 1, size=(2000, 2))
    near = np.zeros(len(Y), dtype=bool)
    for Ri in R:
        near |= _boundary_band(Ri, Y, 1e-6)
    removed = np.zeros(len(Y), dtype=bool)
    for Ri in R:
        removed |= contains_many(Ri, Y, 0.0)
    got = union_contains_many(W, Y)
    assert np.count_nonzero((got != removed) & ~near) == 0


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 0.8), st.floats(0, 0.8), st.floats(0.05, 0.5), st.floats(0.05, 0.5)), min_size=1, max_size=3))
def test_random_boxes_classification(boxes):
    R = [Polyhedron.box([x, y], [x + w, y + h]) for x, y, w, h in boxes]
    U = region_diff(SQUARE, R)
    assert check_disjoint(U) == []
    Y = np.random.default_rng(1).uniform(0, 1, size=(500, 2))
    removed = np.zeros(len(Y), dtype=bool)
    band = np.zeros(len(Y), dtype=bool)
    for Ri in R:
        removed |= contains_many(Ri, Y, 0.0)
        band |= _boundary_band(Ri, Y, 1e-6)
    got = union_contains_many(U, Y)
    assert np.count_nonzero((got == removed) & ~band) == 0
    for P in U.parts:
        V = vertices_2d(P)
        assert np.all(contains_many(SQUARE, V, 1e-9))
