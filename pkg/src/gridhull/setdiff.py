"""Set difference of a polytope minus a union of polytopes.

The result is a family of polytopes with pairwise disjoint interiors whose
union is the closure of ``Y \\ (R_1 u ... u R_k)``.  Each ``R_i`` is removed
in turn by splitting every current piece along the rows of ``R_i``: the
part beyond row 1, then the part inside row 1 but beyond row 2, and so on.
What is left inside all rows is ``piece n R_i`` and is discarded.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError, UnboundedError
from .polytope import (
    PolyUnion,
    Polyhedron,
    _dense,
    affine_hull_parametrization,
    chebyshev_center,
    contains,
    contains_many,
    interiors_overlap,
    intersect,
    is_empty,
    remove_redundancy,
    support,
)

SLIVER_RADIUS = 1e-7


def _check_bounded(Y: Polyhedron):
    for j in range(Y.dim):
        for s in (1.0, -1.0):
            d = np.zeros(Y.dim)
            d[j] = s
            val, _ = support(Y, d)
            if val == np.inf:
                raise UnboundedError("region_diff needs a bounded polytope", direction=d)


def _radius(P: Polyhedron) -> float:
    try:
        return chebyshev_center(P)[1]
    except InputError:
        return -1.0


def _relevant(piece: Polyhedron, R: Polyhedron):
    """``R`` with the equalities implied by ``piece`` dropped, or ``None``
    if ``R`` cannot remove a set of positive measure from ``piece``."""
    if R.n_eq == 0:
        return R
    param = affine_hull_parametrization(piece)
    if param is None:
        return None
    y0, N = param
    E = _dense(R.E)
    for e, g in zip(E, R.f):
        scale = max(1.0, abs(g), np.linalg.norm(e))
        if np.linalg.norm(N.T @ e) > 1e-9 * scale:
            return None  # R is thinner than the piece
        if abs(e @ y0 - g) > 1e-7 * scale:
            return None  # parallel, disjoint hyperplanes
    return Polyhedron(R.A, R.b, dim=R.dim)


def _subtract(piece: Polyhedron, R: Polyhedron) -> list[Polyhedron]:
    Rr = _relevant(piece, R)
    if Rr is None or not interiors_overlap(piece, Rr):
        return [piece]
    out = []
    rest = piece
    A = _dense(Rr.A)
    for a, beta in zip(A, Rr.b):
        if not np.any(a):
            continue
        beyond = rest.add_rows(-a[None, :], [-beta])
        if _radius(beyond) >= SLIVER_RADIUS:
            out.append(remove_redundancy(beyond))
        rest = rest.add_rows(a[None, :], [beta])
        if _radius(rest) < SLIVER_RADIUS:
            break
    return out


def region_diff(Y: Polyhedron, R: list) -> PolyUnion:
    """Non-overlapping polytopes covering ``Y`` minus the union of ``R``.

    Pieces whose Chebyshev radius (within their affine hull) is below
    1e-7 are dropped as measure-zero artifacts.
    """
    for Ri in R:
        if Ri.dim != Y.dim:
            raise InputError(f"dimension mismatch {Ri.dim} vs {Y.dim}")
    if is_empty(Y):
        return PolyUnion([], disjoint_interiors=True, dim=Y.dim)
    _check_bounded(Y)
    pieces = [remove_redundancy(Y)]
    for Ri in R:
        if is_empty(Ri):
            continue
        nxt = []
        for piece in pieces:
            nxt.extend(_subtract(piece, Ri))
        pieces = nxt
        if not pieces:
            break
    return PolyUnion(pieces, disjoint_interiors=True, dim=Y.dim)


def union_contains(U: PolyUnion, y, tol: float = 1e-6) -> bool:
    """True iff some part of ``U`` contains ``y`` (linear scan)."""
    y = np.asarray(y, dtype=float).ravel()
    if U.dim is not None and y.size != U.dim:
        raise InputError(f"point has dimension {y.size}, union {U.dim}")
    return any(contains(P, y, tol) for P in U.parts)


def union_contains_many(U: PolyUnion, Y, tol: float = 1e-6) -> np.ndarray:
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    out = np.zeros(Y.shape[0], dtype=bool)
    for P in U.parts:
        out |= contains_many(P, Y, tol)
    return out
