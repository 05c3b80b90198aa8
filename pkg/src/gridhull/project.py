"""Linear images of polyhedra under bus-to-region aggregation maps.

``image_exact`` computes ``{T x : x in P}`` by Fourier-Motzkin elimination
after a change of coordinates that makes the reduced variables explicit.
``image_approx`` brackets the image between the convex hull of sampled
support maximizers (inner) and the intersection of the corresponding
supporting halfspaces (outer); it only needs LPs over ``P`` and therefore
scales to network-size models.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.spatial import ConvexHull, QhullError
from scipy.stats import norm, qmc

from .errors import InputError, ResourceError, UnboundedError
from .polytope import (
    Polyhedron,
    _dense,
    affine_hull_parametrization,
    is_empty,
    remove_redundancy,
    support,
)

logger = logging.getLogger(__name__)

DEFAULT_ROW_CAP = 100_000
EXACT_MAX_BUS = 12
_ZERO = 1e-12


@dataclass(frozen=True, eq=False)
class AggregationMap:
    """Total assignment of buses (by index) to regions (by index)."""

    n_bus: int
    region_of: tuple
    n_regions: int
    names: tuple = field(default=())

    def __post_init__(self):
        r = tuple(int(v) for v in self.region_of)
        object.__setattr__(self, "region_of", r)
        if len(r) != self.n_bus:
            raise InputError(f"region_of has {len(r)} entries for {self.n_bus} buses")
        if self.n_regions < 1 or self.n_regions > self.n_bus:
            raise InputError(f"need 1 <= n_regions <= n_bus, got {self.n_regions}")
        if any(v < 0 or v >= self.n_regions for v in r):
            raise InputError("region index out of range")
        empty = sorted(set(range(self.n_regions)) - set(r))
        if empty:
            raise InputError(f"regions without buses: {empty}")
        names = tuple(self.names) or tuple(f"R{j + 1}" for j in range(self.n_regions))
        if len(names) != self.n_regions:
            raise InputError("one name per region required")
        object.__setattr__(self, "names", names)

    @classmethod
    def from_groups(cls, groups, names=None):
        """Build from a list of bus-index lists, one per region."""
        n = sum(len(g) for g in groups)
        region_of = [-1] * n
        for j, g in enumerate(groups):
            for i in g:
                region_of[i] = j
        return cls(n, region_of, len(groups), tuple(names or ()))

    @property
    def sizes(self):
        return tuple(int(c) for c in np.bincount(self.region_of, minlength=self.n_regions))

    def groups(self):
        out = [[] for _ in range(self.n_regions)]
        for i, j in enumerate(self.region_of):
            out[j].append(i)
        return out

    def matrix(self, dim: int | None = None, sparse: bool = False):
        """``T`` (n_regions x dim), one 1 per bus column; extra columns are 0."""
        dim = self.n_bus if dim is None else dim
        if dim < self.n_bus:
            raise InputError(f"dim {dim} smaller than n_bus {self.n_bus}")
        T = sp.csr_matrix(
            (np.ones(self.n_bus), (self.region_of, np.arange(self.n_bus))),
            shape=(self.n_regions, dim),
        )
        return T if sparse else T.toarray()


def _map_matrix(T, dim):
    if isinstance(T, AggregationMap):
        return T.matrix(dim)
    M = _dense(T) if sp.issparse(T) else np.atleast_2d(np.asarray(T, dtype=float))
    if M.shape[1] > dim:
        raise InputError(f"map has {M.shape[1]} columns for dimension {dim}")
    if M.shape[1] < dim:
        M = np.hstack([M, np.zeros((M.shape[0], dim - M.shape[1]))])
    return M


def apply_map(T: AggregationMap, x) -> np.ndarray:
    """Region sums ``y = T x``."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != T.n_bus:
        raise InputError(f"injection vector has length {x.size}, expected {T.n_bus}")
    return np.bincount(T.region_of, weights=x, minlength=T.n_regions).astype(float)


# -- exact image by Fourier-Motzkin ------------------------------------------

def row_cap() -> int:
    raw = os.environ.get("GRIDHULL_ROW_CAP")
    if raw is None:
        return DEFAULT_ROW_CAP
    try:
        cap = int(raw)
    except ValueError:
        raise InputError(f"GRIDHULL_ROW_CAP must be an integer, got {raw!r}") from None
    if cap < 1:
        raise InputError("GRIDHULL_ROW_CAP must be positive")
    return cap


def _complement_selector(T):
    """Unit rows ``S`` such that ``[T; S]`` is nonsingular."""
    k, n = T.shape
    basis = [r for r in T]
    rank = np.linalg.matrix_rank(T)
    if rank < k:
        raise InputError("map matrix must have full row rank")
    chosen = []
    for j in range(n):
        if rank == n:
            break
        e = np.zeros(n)
        e[j] = 1.0
        r = np.linalg.matrix_rank(np.vstack(basis + [e]))
        if r > rank:
            basis.append(e)
            chosen.append(j)
            rank = r
    S = np.zeros((len(chosen), n))
    S[np.arange(len(chosen)), chosen] = 1.0
    return S


def _normalize_rows(A, b):
    norms = np.linalg.norm(A, axis=1)
    nz = norms > _ZERO
    if np.any(b[~nz] < -1e-9):
        return None
    return A[nz] / norms[nz, None], b[nz] / norms[nz]


def image_exact(P: Polyhedron, T, cap: int | None = None) -> Polyhedron:
    """Exact image ``{T x : x in P}`` as an irredundant H-representation.

    ``T`` is an :class:`AggregationMap` or a full-row-rank matrix.  Raises
    :class:`ResourceError` if an elimination stage would exceed ``cap`` rows
    (default from ``GRIDHULL_ROW_CAP``, else 10^5).
    """
    cap = row_cap() if cap is None else cap
    Tm = _map_matrix(T, P.dim)
    k, n = Tm.shape
    if n > EXACT_MAX_BUS:
        logger.warning("exact projection of a %d-dimensional set may be slow; consider image_approx", n)
    if is_empty(P):
        return Polyhedron.empty(k)

    P = remove_redundancy(P)
    S = _complement_selector(Tm)
    Minv = np.linalg.inv(np.vstack([Tm, S]))
    A = _dense(P.A) @ Minv
    b = P.b.copy()
    E = _dense(P.E) @ Minv
    f = P.f.copy()
    w = list(range(k, n))  # columns still to eliminate

    # equalities first: each one with a w-coefficient removes a w-variable
    while E.shape[0]:
        coef = np.abs(E[:, w]) if w else np.zeros((E.shape[0], 0))
        scale = np.maximum(np.linalg.norm(E, axis=1), _ZERO)
        rows = np.flatnonzero(coef.max(axis=1, initial=0.0) > 1e-10 * scale) if w else []
        if len(rows) == 0:
            break
        i = rows[0]
        jw = int(np.argmax(coef[i]))
        c = w[jw]
        piv_row, piv_rhs = E[i] / E[i, c], f[i] / E[i, c]
        A, b = A - np.outer(A[:, c], piv_row), b - A[:, c] * piv_rhs
        E, f = E - np.outer(E[:, c], piv_row), f - E[:, c] * piv_rhs
        E, f = np.delete(E, i, axis=0), np.delete(f, i)
        A[:, c] = 0.0
        E[:, c] = 0.0
        w.pop(jw)

    nz = _normalize_rows(A, b)
    if nz is None:
        return Polyhedron.empty(k)
    A, b = nz
    while w:
        pos = [(A[:, c] > _ZERO).sum() for c in w]
        neg = [(A[:, c] < -_ZERO).sum() for c in w]
        jw = int(np.argmin([p * q for p, q in zip(pos, neg)]))
        c = w.pop(jw)
        col = A[:, c]
        P_i = np.flatnonzero(col > _ZERO)
        N_i = np.flatnonzero(col < -_ZERO)
        Z_i = np.flatnonzero(np.abs(col) <= _ZERO)
        n_new = len(Z_i) + len(P_i) * len(N_i)
        if n_new > cap:
            raise ResourceError(
                f"elimination would create {n_new} rows (cap {cap}); use image_approx instead"
            )
        ap = A[P_i] / col[P_i, None]
        bp = b[P_i] / col[P_i]
        an = A[N_i] / -col[N_i, None]
        bn = b[N_i] / -col[N_i]
        newA = (ap[:, None, :] + an[None, :, :]).reshape(-1, A.shape[1])
        newb = (bp[:, None] + bn[None, :]).ravel()
        A = np.vstack([A[Z_i], newA])
        b = np.concatenate([b[Z_i], newb])
        A[:, c] = 0.0
        nz = _normalize_rows(A, b)
        if nz is None:
            return Polyhedron.empty(k)
        A, b = nz
        # prune with the remaining coordinates still free
        Q = remove_redundancy(Polyhedron(A, b, E, f, dim=n))
        if Q.n_ineq == 1 and not np.any(Q.A):
            return Polyhedron.empty(k)
        A, b, E, f = _dense(Q.A), Q.b, _dense(Q.E), Q.f

    Y = Polyhedron(A[:, :k], b, E[:, :k], f, dim=k)
    return remove_redundancy(Y)


# -- inner/outer approximation by support sampling ---------------------------

@dataclass(eq=False)
class ApproxSet:
    """Inner/outer bracketing of a projected set.

    ``inner_vertices`` are images of support maximizers; ``inner`` is their
    hull as a polyhedron when its dimension is at most 3, else ``None``.
    ``outer`` is the intersection of supporting halfspaces.
    """

    inner_vertices: np.ndarray
    outer: Polyhedron
    inner: Polyhedron | None = None
    gap: float = np.inf
    directions: np.ndarray | None = None

    @property
    def dim(self):
        return self.outer.dim


def hull_polyhedron(V, tol: float = 1e-9) -> Polyhedron | None:
    """H-representation of ``conv(V)`` if its affine dimension is <= 3."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    m, k = V.shape
    if m == 0:
        return Polyhedron.empty(k)
    c = V.mean(axis=0)
    D = V - c
    scale = max(1.0, float(np.max(np.abs(V))))
    U, s, Wt = np.linalg.svd(D, full_matrices=True)
    r = int(np.sum(s > tol * scale * max(1, m)))
    if r > 3:
        return None
    basis, comp = Wt[:r].T, Wt[r:].T
    E, f = comp.T, comp.T @ c
    Z = D @ basis
    if r == 0:
        return Polyhedron(None, None, E, f, dim=k)
    if r == 1:
        z = Z[:, 0]
        A = np.vstack([basis[:, 0], -basis[:, 0]])
        return Polyhedron(A, [z.max() + basis[:, 0] @ c, -z.min() - basis[:, 0] @ c], E, f, dim=k)
    try:
        hull = ConvexHull(Z)
    except QhullError:
        return hull_polyhedron(V, tol * 1e3) if tol < 1e-5 else None
    nrm, off = hull.equations[:, :-1], hull.equations[:, -1]
    A = nrm @ basis.T
    b = -off + A @ c
    A, b = _unique_rows(A, b)
    return Polyhedron(A, b, E, f, dim=k)


def _unique_rows(A, b, decimals=9):
    keys = np.round(np.hstack([A, b[:, None] / max(1.0, np.max(np.abs(b)))]), decimals)
    _, idx = np.unique(keys, axis=0, return_index=True)
    idx = np.sort(idx)
    return A[idx], b[idx]


def _sphere_points(count, dim, seed):
    """Scrambled-Sobol points mapped to the unit sphere in ``R^dim``."""
    if count <= 0 or dim == 0:
        return np.zeros((0, dim))
    sob = qmc.Sobol(d=dim, scramble=True, seed=seed)
    m = int(np.ceil(np.log2(max(count, 2))))
    U = sob.random_base2(m)[:count]
    G = norm.ppf(np.clip(U, 1e-12, 1 - 1e-12))
    nrm = np.linalg.norm(G, axis=1)
    nrm[nrm == 0] = 1.0
    return G / nrm[:, None]


class _Prober:
    """Support queries of the image, memoized by direction."""

    def __init__(self, P, Tm, method):
        self.P, self.Tm, self.method = P, Tm, method
        self.dirs, self.values, self.points = [], [], []
        self._seen = {}

    def key(self, d):
        return tuple(np.round(d, 9))

    def seen(self, d):
        return self.key(d) in self._seen

    def __call__(self, d):
        kd = self.key(d)
        if kd in self._seen:
            return self._seen[kd]
        c = self.Tm.T @ d
        val, x = _support(self.P, c, self.method)
        if val == np.inf:
            raise UnboundedError(f"image is unbounded in direction {np.round(d, 6).tolist()}", direction=d)
        if val == -np.inf:
            raise InputError("cannot approximate the image of an empty set")
        y = self.Tm @ x
        out = (float(d @ y), y)
        self._seen[kd] = out
        return out

    def record(self, d):
        val, y = self(d)
        self.dirs.append(d)
        self.values.append(val)
        self.points.append(y)


def _support(P, c, method):
    from . import lpsolve
    from .lpsolve import LpProblem, Status

    res = lpsolve.solve(LpProblem(c, P.A, P.b, P.E, P.f), method=method)
    if res.status is Status.OPTIMAL:
        return res.value, res.point
    if res.status is Status.UNBOUNDED:
        return np.inf, None
    return -np.inf, None


def _unit(d):
    n = np.linalg.norm(d)
    return d / n if n > 1e-9 else None


def image_approx(
    P: Polyhedron,
    T,
    budget: int = 64,
    tol: float = 1.0,
    seed: int = 42,
    method: str = "auto",
) -> ApproxSet:
    """Inner/outer approximation of ``{T x : x in P}`` from at most ``budget`` support LPs.

    Implied equalities of the image along ``(1, ..., 1)`` are detected
    first (two extra LPs, not counted).  Then the +/- coordinate axes are
    probed, followed either by facet normals of the current inner hull
    (image dimension <= 3) or by quasi-random sphere directions.  Stops
    when ``budget`` directions are used or the gap drops to ``tol``.
    """
    if budget < 1:
        raise InputError("budget must be at least 1")
    Tm = _map_matrix(T, P.dim)
    k = Tm.shape[0]
    probe = _Prober(P, Tm, method)

    # implied equality along the all-ones direction
    eq_rows, eq_rhs = [], []
    one = np.ones(k) / np.sqrt(k)
    hi, _ = probe(one)
    lo, _ = probe(-one)
    scale = max(1.0, abs(hi), abs(lo))
    if hi + lo <= 1e-7 * scale:
        eq_rows.append(one)
        eq_rhs.append(0.5 * (hi - lo))
    else:
        # already solved, so kept as free outer halfspaces
        probe.record(one)
        probe.record(-one)
    free = len(probe.dirs)
    E = np.array(eq_rows).reshape(-1, k)
    f = np.array(eq_rhs)
    Q = scipy.linalg.null_space(E) if E.shape[0] else np.eye(k)
    keff = Q.shape[1]

    def outer_poly():
        D = np.array(probe.dirs).reshape(-1, k)
        if not len(D):
            return Polyhedron(None, None, E, f, dim=k)
        V = np.array(probe.points)
        h = np.maximum(np.array(probe.values), np.max(D @ V.T, axis=1))
        return Polyhedron(D, h, E, f, dim=k)

    def current():
        V = np.array(probe.points).reshape(-1, k)
        if not len(V):
            _, y = probe(one)
            V = y[None, :]
        inner = hull_polyhedron(V) if keff <= 3 else None
        return ApproxSet(V, outer_poly(), inner, np.inf, np.array(probe.dirs).reshape(-1, k))

    if keff == 0:
        a = current()
        a.gap = 0.0
        return a

    def budget_left():
        return budget + free - len(probe.dirs)

    axes = []
    for j in range(k):
        for s in (1.0, -1.0):
            e = np.zeros(k)
            e[j] = s
            d = _unit(Q @ (Q.T @ e))
            if d is not None and not any(np.allclose(d, a) for a in axes):
                axes.append(d)
    for d in axes:
        if budget_left() <= 0:
            break
        if not probe.seen(d):
            probe.record(d)

    sphere = Q @ _sphere_points(max(budget, 1) + 64, keff, seed).T
    s_next = 0
    gap = np.inf
    while budget_left() > 0:
        a = current()
        gap = gap_estimate(a)
        if gap <= tol:
            break
        d = None
        if a.inner is not None:
            d = _refine_direction(a, probe, Q)
        while d is None and s_next < sphere.shape[1]:
            cand = _unit(sphere[:, s_next])
            s_next += 1
            if cand is not None and not probe.seen(cand):
                d = cand
        if d is None:
            break
        probe.record(d)

    a = current()
    a.gap = gap_estimate(a)
    return a


def _candidate_normals(a: ApproxSet, Q):
    """Unit facet normals of the inner hull, restricted to the image subspace."""
    cands = []
    inner = a.inner
    rows = [r for r in _dense(inner.A)]
    for r in _dense(inner.E):
        rows += [r, -r]
    for r in rows:
        d = _unit(Q @ (Q.T @ r))
        if d is not None:
            cands.append(d)
    return cands


def _refine_direction(a: ApproxSet, probe, Q):
    """Unprobed inner-facet normal with the largest outer-minus-inner support gap."""
    best, best_gap = None, -np.inf
    V = a.inner_vertices
    for d in _candidate_normals(a, Q):
        if probe.seen(d):
            continue
        ho, _ = support(a.outer, d)
        g = ho - np.max(V @ d)
        if g > best_gap:
            best, best_gap = d, g
    return best


_GAP_DIRECTIONS = {}


def _fixed_directions(k):
    if k not in _GAP_DIRECTIONS:
        _GAP_DIRECTIONS[k] = _sphere_points(64, k, seed=20240611)
    return _GAP_DIRECTIONS[k]


def gap_estimate(a: ApproxSet) -> float:
    """Largest ``support(outer, d) - support(inner, d)`` over outer and inner
    facet normals and a fixed quasi-random set of directions (MW)."""
    V = np.atleast_2d(a.inner_vertices)
    if V.shape[0] == 0:
        raise InputError("gap_estimate needs a nonempty inner approximation")
    k = a.dim
    outer = a.outer
    param = affine_hull_parametrization(outer)
    if param is None:
        raise InputError("outer approximation is empty")
    _, N = param
    dirs = [r for r in _dense(outer.A)]
    if a.inner is not None:
        dirs += [r for r in _dense(a.inner.A)]
        for r in _dense(a.inner.E):
            dirs += [r, -r]
    if N.shape[1]:
        dirs += [N @ u for u in _fixed_directions(N.shape[1])]
    best = 0.0
    for d in dirs:
        d = N @ (N.T @ d)
        nd = np.linalg.norm(d)
        if nd <= 1e-9:
            continue
        d = d / nd
        ho, _ = support(outer, d)
        if ho == np.inf:
            return np.inf
        best = max(best, ho - float(np.max(V @ d)))
    return best
