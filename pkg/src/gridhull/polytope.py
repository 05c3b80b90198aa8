"""H-representation polyhedra and the primitive operations on them.

A :class:`Polyhedron` is ``{y : A y <= b, E y = f}``.  Equalities are kept
explicit and every operation honors them.  Tolerances are always applied to
rows scaled to unit Euclidean norm.  Matrices may be dense ndarrays or scipy
sparse matrices; the LP-backed operations accept both, the geometric ones
(redundancy removal, vertex enumeration) expect small dense systems.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import lpsolve
from .errors import InputError, UnboundedError
from .lpsolve import LpProblem, Status

DEFAULT_TOL = 1e-6
_CHEB_CAP = 1e9


def row_norms(M) -> np.ndarray:
    if M.shape[0] == 0:
        return np.zeros(0)
    if sp.issparse(M):
        return np.sqrt(np.asarray(M.multiply(M).sum(axis=1)).ravel())
    return np.linalg.norm(M, axis=1)


def _mat(M, dim):
    if M is None:
        return np.zeros((0, dim))
    if sp.issparse(M):
        return sp.csr_matrix(M, dtype=float)
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return M.reshape(0, dim)
    return np.atleast_2d(M)


def _dense(M):
    return M.toarray() if sp.issparse(M) else M


@dataclass(frozen=True, eq=False)
class Polyhedron:
    """``{y in R^dim : A y <= b, E y = f}``; may be empty or unbounded."""

    A: object
    b: object
    E: object = None
    f: object = None
    dim: int = field(default=None)

    def __post_init__(self):
        dim = self.dim
        if dim is None:
            for M in (self.A, self.E):
                if M is not None and getattr(M, "ndim", np.ndim(M)) == 2:
                    dim = M.shape[1] if hasattr(M, "shape") else np.shape(M)[1]
                    break
        if dim is None:
            raise InputError("cannot infer polyhedron dimension; pass dim=")
        A = _mat(self.A, dim)
        E = _mat(self.E, dim)
        b = np.zeros(0) if self.b is None else np.asarray(self.b, dtype=float).ravel()
        f = np.zeros(0) if self.f is None else np.asarray(self.f, dtype=float).ravel()
        if A.shape != (b.size, dim) or E.shape != (f.size, dim):
            raise InputError(
                f"inconsistent polyhedron shapes A{A.shape} b{b.shape} E{E.shape} f{f.shape} dim={dim}"
            )
        for name, M in (("A", A), ("b", b), ("E", E), ("f", f)):
            data = M.data if sp.issparse(M) else M
            if not np.all(np.isfinite(data)):
                raise InputError(f"polyhedron {name} has non-finite entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "dim", int(dim))

    # construction helpers
    @classmethod
    def box(cls, lower, upper):
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        n = lower.size
        I = np.eye(n)
        return cls(np.vstack([I, -I]), np.concatenate([upper, -lower]))

    @classmethod
    def universe(cls, dim):
        return cls(None, None, dim=dim)

    @classmethod
    def empty(cls, dim):
        """Canonical empty set: the single row ``0 . y <= -1``."""
        return cls(np.zeros((1, dim)), [-1.0])

    @property
    def n_ineq(self):
        return self.b.size

    @property
    def n_eq(self):
        return self.f.size

    @property
    def is_sparse(self):
        return sp.issparse(self.A) or sp.issparse(self.E)

    def add_rows(self, A=None, b=None, E=None, f=None) -> "Polyhedron":
        return intersect(self, Polyhedron(A, b, E, f, dim=self.dim))

    def lift(self, extra: int) -> "Polyhedron":
        """Embed into ``R^(dim + extra)``; the new coordinates are unconstrained."""
        def pad(M):
            if sp.issparse(M):
                return sp.hstack([M, sp.csr_matrix((M.shape[0], extra))]).tocsr()
            return np.hstack([M, np.zeros((M.shape[0], extra))])
        return Polyhedron(pad(self.A), self.b, pad(self.E), self.f, dim=self.dim + extra)

    def __repr__(self):
        return f"Polyhedron(dim={self.dim}, n_ineq={self.n_ineq}, n_eq={self.n_eq})"


@dataclass(eq=False)
class PolyUnion:
    """Finite union of polyhedra of a common dimension."""

    parts: list
    disjoint_interiors: bool = False
    dim: int | None = None

    def __post_init__(self):
        self.parts = list(self.parts)
        dims = {p.dim for p in self.parts}
        if self.dim is not None:
            dims.add(self.dim)
        if len(dims) > 1:
            raise InputError(f"union parts have mixed dimensions {sorted(dims)}")
        if self.dim is None and dims:
            self.dim = dims.pop()

    def __len__(self):
        return len(self.parts)

    def __iter__(self):
        return iter(self.parts)

    @property
    def is_empty(self):
        return not self.parts


# -- membership and LP-backed primitives ------------------------------------

def _slacks(P: Polyhedron, y):
    """Row-normalized inequality slack violations and equality residuals."""
    y = np.asarray(y, dtype=float).ravel()
    if y.size != P.dim:
        raise InputError(f"point has dimension {y.size}, polyhedron {P.dim}")
    out = []
    for M, r in ((P.A, P.b), (P.E, P.f)):
        if r.size == 0:
            out.append(np.zeros(0))
            continue
        norms = row_norms(M)
        res = M @ y - r
        nz = norms > 0
        res[nz] /= norms[nz]
        out.append(np.asarray(res).ravel())
    return out[0], out[1]


def contains(P: Polyhedron, y, tol: float = DEFAULT_TOL) -> bool:
    ineq, eq = _slacks(P, y)
    return bool(np.all(ineq <= tol) and np.all(np.abs(eq) <= tol))


def contains_many(P: Polyhedron, Y, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Vectorized :func:`contains` over the rows of ``Y``."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    ok = np.ones(Y.shape[0], dtype=bool)
    for M, r, absval in ((P.A, P.b, False), (P.E, P.f, True)):
        if r.size == 0:
            continue
        norms = row_norms(M)
        norms = np.where(norms > 0, norms, 1.0)
        res = (np.asarray(M @ Y.T).T - r) / norms
        ok &= np.all((np.abs(res) if absval else res) <= tol, axis=1)
    return ok


def boundary_distance(P: Polyhedron, y) -> float:
    """Smallest normalized slack over inequality rows (negative outside)."""
    ineq, _ = _slacks(P, y)
    return float(-np.max(ineq)) if ineq.size else np.inf


def _lp(P: Polyhedron, c, maximize=True):
    return LpProblem(c, P.A, P.b, P.E, P.f, maximize=maximize)


def is_empty(P: Polyhedron) -> bool:
    return not lpsolve.feasible(_lp(P, np.zeros(P.dim)))


def intersect(P: Polyhedron, Q: Polyhedron) -> Polyhedron:
    if P.dim != Q.dim:
        raise InputError(f"dimension mismatch {P.dim} vs {Q.dim}")
    if P.is_sparse or Q.is_sparse:
        stack = lambda X, Y: sp.vstack([sp.csr_matrix(X), sp.csr_matrix(Y)]).tocsr()
    else:
        stack = lambda X, Y: np.vstack([X, Y])
    return Polyhedron(
        stack(P.A, Q.A), np.concatenate([P.b, Q.b]),
        stack(P.E, Q.E), np.concatenate([P.f, Q.f]), dim=P.dim,
    )


def support(P: Polyhedron, d) -> tuple[float, np.ndarray | None]:
    """``max d.y`` over ``P``: ``(+inf, None)`` if unbounded, ``(-inf, None)`` if empty."""
    d = np.asarray(d, dtype=float).ravel()
    if d.size != P.dim:
        raise InputError(f"direction has dimension {d.size}, polyhedron {P.dim}")
    res = lpsolve.solve(_lp(P, d))
    if res.status is Status.OPTIMAL:
        return res.value, res.point
    if res.status is Status.UNBOUNDED:
        return np.inf, None
    return -np.inf, None


def _normalize(A, b):
    norms = row_norms(A)
    nz = norms > 1e-14
    return A[nz] / norms[nz, None], b[nz] / norms[nz], A[~nz], b[~nz]


def remove_redundancy(P: Polyhedron, tol: float = 1e-9) -> Polyhedron:
    """Drop every inequality whose removal leaves the set unchanged.

    Rows are tested one at a time against the rows still kept, so the
    result is irredundant: relaxing any remaining row enlarges the set.
    """
    if is_empty(P):
        return Polyhedron.empty(P.dim)
    A, b = _dense(P.A), P.b
    E, f = _dense(P.E), P.f
    A, b, _, _ = _normalize(A, b)  # zero rows are satisfied (P nonempty)
    if E.shape[0]:
        E, f, _, _ = _normalize(E, f)
        E, f = _dedupe_equalities(E, f)
    A, b = _dedupe(A, b)
    m = b.size
    keep = np.ones(m, dtype=bool)
    for i in range(m):
        keep[i] = False
        res = lpsolve.solve(LpProblem(A[i], A[keep], b[keep], E, f))
        if res.status is Status.UNBOUNDED or res.value > b[i] + tol * (1.0 + abs(b[i])):
            keep[i] = True
    return Polyhedron(A[keep], b[keep], E, f, dim=P.dim)


def _dedupe(A, b, decimals=10):
    """Collapse rows with the same (normalized) normal, keeping the tightest."""
    if b.size == 0:
        return A, b
    keys = np.round(A, decimals)
    _, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    best = {}
    for i, g in enumerate(inverse):
        if g not in best or b[i] < b[best[g]]:
            best[g] = i
    idx = np.array(sorted(best.values()), dtype=int)
    return A[idx], b[idx]


def _dedupe_equalities(E, f):
    """Keep a linearly independent subset of equality rows."""
    M = np.hstack([E, f[:, None]])
    keep = []
    for i in range(E.shape[0]):
        trial = keep + [i]
        if np.linalg.matrix_rank(E[trial], tol=1e-9) == len(trial):
            keep = trial
        elif np.linalg.matrix_rank(M[trial], tol=1e-9) > np.linalg.matrix_rank(E[trial], tol=1e-9):
            # inconsistent equality: keep it so emptiness stays visible
            keep = trial
    return E[keep], f[keep]


def affine_hull_parametrization(P: Polyhedron):
    """Return ``(y0, N)`` with ``{E y = f} = {y0 + N z}``, or ``None`` if
    the equalities are inconsistent.  ``N`` has orthonormal columns."""
    if P.n_eq == 0:
        return np.zeros(P.dim), np.eye(P.dim)
    E = _dense(P.E)
    y0, *_ = np.linalg.lstsq(E, P.f, rcond=None)
    scale = 1.0 + np.max(np.abs(P.f))
    if np.max(np.abs(E @ y0 - P.f)) > 1e-9 * scale * max(1.0, np.linalg.norm(E)):
        return None
    N = scipy.linalg.null_space(E)
    return y0, N


def chebyshev_center(P: Polyhedron) -> tuple[np.ndarray, float]:
    """Center and radius of the largest ball in ``P`` within its equality hull.

    Radius is ``inf`` for sets containing arbitrarily large balls.
    """
    param = affine_hull_parametrization(P)
    if param is None:
        raise InputError("chebyshev_center of an empty polyhedron")
    y0, N = param
    A = _dense(P.A)
    k = N.shape[1]
    Az = A @ N
    bz = P.b - A @ y0
    if k == 0:
        if np.all(bz >= -DEFAULT_TOL * (1 + np.abs(P.b))):
            return y0, 0.0
        raise InputError("chebyshev_center of an empty polyhedron")
    full_norms = row_norms(A)
    full_norms[full_norms == 0] = 1.0
    proj = row_norms(Az) / full_norms
    # scale each row by its full norm so tolerances match contains()
    Az_n = Az / full_norms[:, None]
    bz_n = bz / full_norms
    cost = np.zeros(k + 1)
    cost[-1] = 1.0
    G = np.hstack([Az_n, proj[:, None]])
    G = np.vstack([G, np.r_[np.zeros(k), -1.0], np.r_[np.zeros(k), 1.0]])
    h = np.concatenate([bz_n, [0.0, _CHEB_CAP]])
    res = lpsolve.solve(LpProblem(cost, G, h))
    if res.status is not Status.OPTIMAL:
        raise InputError("chebyshev_center of an empty polyhedron")
    z, r = res.point[:k], res.point[k]
    radius = np.inf if r >= _CHEB_CAP * (1 - 1e-9) else max(float(r), 0.0)
    return y0 + N @ z, radius


def interiors_overlap(P: Polyhedron, Q: Polyhedron, tol: float = 1e-7) -> bool:
    """True if ``P`` and ``Q`` share a point strictly inside all their inequalities.

    Maximizes the smallest normalized slack over both systems together.
    """
    R = intersect(P, Q)
    A, b, Z, bz = _normalize(_dense(R.A), R.b)
    if np.any(bz < 0):
        return False
    n = R.dim
    G = np.hstack([A, np.ones((A.shape[0], 1))])
    G = np.vstack([G, np.r_[np.zeros(n), 1.0]])
    h = np.concatenate([b, [1.0]])
    E = np.hstack([_dense(R.E), np.zeros((R.n_eq, 1))])
    c = np.zeros(n + 1)
    c[-1] = 1.0
    res = lpsolve.solve(LpProblem(c, G, h, E, R.f))
    return res.status is Status.OPTIMAL and res.value > tol


def check_disjoint(U: PolyUnion, tol: float = 1e-7) -> list[tuple[int, int]]:
    """Pairs of parts whose interiors intersect (empty list when disjoint)."""
    return [
        (i, j)
        for i, j in combinations(range(len(U.parts)), 2)
        if interiors_overlap(U.parts[i], U.parts[j], tol)
    ]


# -- planar vertex enumeration ---------------------------------------------

def _hull_ccw(pts, tol):
    """Andrew's monotone chain; returns CCW hull without collinear points."""
    if len(pts):
        _, idx = np.unique(np.round(pts / tol), axis=0, return_index=True)
        pts = pts[np.sort(idx)]
    if len(pts) <= 2:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= tol * tol:
            lower.pop()
        lower.append(p)
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= tol * tol:
            upper.pop()
        upper.append(p)
    hull = np.array(lower[:-1] + upper[:-1])
    if len(hull) < 2:
        return pts[[0, -1]]
    return hull


def vertices_2d(P: Polyhedron, tol: float = 1e-9) -> np.ndarray:
    """Vertices of a bounded polyhedron of effective dimension <= 2.

    The equality hull is parametrized by orthonormal coordinates; in the
    2-D case vertices are returned counter-clockwise in those coordinates
    (which are the original axes when there are no equalities).
    """
    param = affine_hull_parametrization(P)
    if param is None:
        return np.zeros((0, P.dim))
    y0, N = param
    k = N.shape[1]
    if k > 2:
        raise InputError(f"effective dimension {k} > 2; project onto two axes first")
    A = _dense(P.A)
    Az = A @ N
    bz = P.b - A @ y0
    scale = 1.0 + np.max(np.abs(bz), initial=0.0)
    norms = row_norms(Az)
    flat = norms <= 1e-12
    if np.any(bz[flat] < -tol * scale):
        return np.zeros((0, P.dim))
    Az = Az[~flat] / norms[~flat, None]
    bz = bz[~flat] / norms[~flat]
    if k == 0:
        return y0[None, :]
    if k == 1:
        a = Az[:, 0]
        if not np.any(a > 0) or not np.any(a < 0):
            raise UnboundedError("polyhedron is unbounded")
        hi = np.min(bz[a > 0] / a[a > 0])
        lo = np.max(bz[a < 0] / a[a < 0])
        if lo > hi + tol * scale:
            return np.zeros((0, P.dim))
        pts = [lo] if abs(hi - lo) <= 1e-8 * scale else [lo, hi]
        return np.array([y0 + N[:, 0] * t for t in pts])

    Q = Polyhedron(Az, bz)
    for d in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        val, _ = support(Q, d)
        if val == np.inf:
            raise UnboundedError("polyhedron is unbounded", direction=N @ np.asarray(d, float))
        if val == -np.inf:
            return np.zeros((0, P.dim))
    pts = []
    for i, j in combinations(range(Az.shape[0]), 2):
        M = Az[[i, j]]
        det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        if abs(det) < 1e-12:
            continue
        z = np.linalg.solve(M, bz[[i, j]])
        if np.all(Az @ z <= bz + tol * scale):
            pts.append(z)
    if not pts:
        return np.zeros((0, P.dim))
    hull = _hull_ccw(np.array(pts), 1e-9 * scale)
    return y0 + hull @ N.T


def polygon_area(V) -> float:
    """Shoelace area of an ordered planar vertex list."""
    V = np.asarray(V, dtype=float)
    if len(V) < 3:
        return 0.0
    x, y = V[:, 0], V[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
