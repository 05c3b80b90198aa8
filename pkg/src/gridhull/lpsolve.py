"""Deterministic linear programming.

Problems are stated over free variables::

    maximize (or minimize)  c . x
    subject to              A x <= b,   E x = f

Small dense problems go through a two-phase tableau simplex that uses
Bland's rule for both the entering and the leaving variable, so it cannot
cycle.  Large or sparse problems are handed to HiGHS through scipy; that
route exists for network-scale models (thousands of buses) where a dense
tableau is out of the question.

All rows are scaled to unit Euclidean norm before solving, and the
right-hand side is scaled by its magnitude so that a single feasibility
tolerance serves data in MW and in p.u. alike.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InputError, SolverError

logger = logging.getLogger(__name__)

FEAS_TOL = 1e-9
_PIVOT_TOL = 1e-9
_COST_TOL = 1e-10
_DENSE_LIMIT = 60_000  # n * (m + p) above which "auto" picks HiGHS


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


def _as_matrix(M, n, name):
    if M is None:
        return np.zeros((0, n))
    if sp.issparse(M):
        M = sp.csr_matrix(M, dtype=float)
    else:
        M = np.asarray(M, dtype=float)
        if M.ndim == 1 and M.size == 0:
            M = M.reshape(0, n)
        if M.ndim == 1:
            M = M.reshape(1, -1)
    if M.ndim != 2 or M.shape[1] != n:
        raise InputError(f"{name} has shape {M.shape}, expected (*, {n})")
    return M


def _as_vector(v, m, name):
    v = np.zeros(0) if v is None else np.asarray(v, dtype=float).ravel()
    if v.size != m:
        raise InputError(f"{name} has length {v.size}, expected {m}")
    return v


def _all_finite(M):
    data = M.data if sp.issparse(M) else M
    return bool(np.all(np.isfinite(data)))


@dataclass(frozen=True, eq=False)
class LpProblem:
    """Linear program over free variables.  ``maximize`` selects the sense."""

    objective: np.ndarray
    A: object = None
    b: object = None
    E: object = None
    f: object = None
    maximize: bool = True

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).ravel()
        if c.size < 1:
            raise InputError("LP needs at least one variable")
        n = c.size
        A = _as_matrix(self.A, n, "A")
        E = _as_matrix(self.E, n, "E")
        b = _as_vector(self.b, A.shape[0], "b")
        f = _as_vector(self.f, E.shape[0], "f")
        for name, M in (("objective", c), ("A", A), ("b", b), ("E", E), ("f", f)):
            if not _all_finite(M):
                raise InputError(f"{name} contains non-finite entries")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "f", f)

    @property
    def n(self):
        return self.objective.size

    @property
    def is_sparse(self):
        return sp.issparse(self.A) or sp.issparse(self.E)


@dataclass(frozen=True, eq=False)
class LpResult:
    status: Status
    value: float
    point: np.ndarray | None = None

    @property
    def optimal(self):
        return self.status is Status.OPTIMAL


def solve(p: LpProblem, method: str = "auto") -> LpResult:
    """Solve ``p``; ``method`` is ``"simplex"``, ``"highs"`` or ``"auto"``."""
    if method == "auto":
        size = p.n * (p.A.shape[0] + p.E.shape[0])
        method = "highs" if p.is_sparse or size > _DENSE_LIMIT else "simplex"
    if method == "simplex":
        A = p.A.toarray() if sp.issparse(p.A) else p.A
        E = p.E.toarray() if sp.issparse(p.E) else p.E
        c = p.objective if p.maximize else -p.objective
        status, x = _simplex(c, A, p.b, E, p.f)
    elif method == "highs":
        status, x = _highs(p)
    else:
        raise InputError(f"unknown LP method {method!r}")

    if status is Status.OPTIMAL:
        return LpResult(status, float(p.objective @ x), x)
    if status is Status.UNBOUNDED:
        return LpResult(status, np.inf if p.maximize else -np.inf)
    return LpResult(status, np.nan)


def feasible(p: LpProblem, method: str = "auto") -> bool:
    """True iff the constraint set of ``p`` is nonempty (objective ignored)."""
    q = LpProblem(np.zeros(p.n), p.A, p.b, p.E, p.f)
    return solve(q, method).status is not Status.INFEASIBLE


def residuals(p: LpProblem, x) -> tuple[np.ndarray, np.ndarray]:
    """Row-normalized residuals ``(A x - b, |E x - f|)`` of a candidate point."""
    x = np.asarray(x, dtype=float)
    out = []
    for M, r, absval in ((p.A, p.b, False), (p.E, p.f, True)):
        if M.shape[0] == 0:
            out.append(np.zeros(0))
            continue
        norms = _row_norms(M)
        norms[norms == 0] = 1.0
        res = (M @ x - r) / norms
        out.append(np.abs(res) if absval else res)
    return out[0], out[1]


def _row_norms(M):
    if sp.issparse(M):
        return np.sqrt(np.asarray(M.multiply(M).sum(axis=1)).ravel())
    return np.linalg.norm(M, axis=1)


def _normalized(M, r, equality, tol):
    """Scale rows to unit norm, dropping zero rows.  Returns None if a zero
    row is violated (trivially infeasible)."""
    if M.shape[0] == 0:
        return M, r
    norms = _row_norms(M)
    zero = norms <= 1e-14
    if equality:
        if np.any(np.abs(r[zero]) > tol):
            return None
    elif np.any(r[zero] < -tol):
        return None
    keep = ~zero
    scale = 1.0 / norms[keep]
    if sp.issparse(M):
        return sp.diags(scale) @ M[keep], r[keep] * scale
    return M[keep] * scale[:, None], r[keep] * scale


# -- dense tableau simplex -------------------------------------------------

def _pivot(T, r, j):
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _bland(T, basis, eligible, max_iter):
    """Run Bland-rule pivots on tableau ``T`` (last row = reduced costs,
    last column = rhs) until optimal.  Returns False if unbounded."""
    R = T.shape[0] - 1
    for _ in range(max_iter):
        d = T[R, :-1]
        cand = np.flatnonzero((d < -_COST_TOL) & eligible)
        if cand.size == 0:
            return True
        j = cand[0]
        col = T[:R, j]
        pos = np.flatnonzero(col > _PIVOT_TOL)
        if pos.size == 0:
            return False
        rhs = np.maximum(T[pos, -1], 0.0)
        ratios = rhs / col[pos]
        rmin = ratios.min()
        ties = pos[ratios <= rmin + 1e-12 * (1.0 + rmin)]
        r = ties[np.argmin(basis[ties])]
        _pivot(T, r, j)
        basis[r] = j
    raise RuntimeError("simplex iteration limit reached")


def _simplex(c, A, b, E, f):
    """maximize c.x s.t. A x <= b, E x = f with x free."""
    n = c.size
    scale = max(1.0, float(np.max(np.abs(b), initial=0.0)), float(np.max(np.abs(f), initial=0.0)))
    tol = FEAS_TOL
    # zero rows are judged on the unscaled right-hand side
    na = _normalized(A, b, False, tol)
    ne = _normalized(E, f, True, tol)
    if na is None or ne is None:
        return Status.INFEASIBLE, None
    A, b = na[0], na[1] / scale
    E, f = ne[0], ne[1] / scale
    m, p = A.shape[0], E.shape[0]
    R = m + p
    nstd = 2 * n + m

    M = np.zeros((R, nstd))
    M[:m, :n] = A
    M[:m, n:2 * n] = -A
    M[:m, 2 * n:] = np.eye(m)
    M[m:, :n] = E
    M[m:, n:2 * n] = -E
    rhs = np.concatenate([b, f])
    flip = rhs < 0
    M[flip] *= -1.0
    rhs[flip] *= -1.0

    basis = np.empty(R, dtype=int)
    need_art = np.ones(R, dtype=bool)
    ineq = np.arange(m)
    ok = ~flip[:m]
    basis[ineq[ok]] = 2 * n + ineq[ok]
    need_art[ineq[ok]] = False
    art_rows = np.flatnonzero(need_art)
    na_cols = art_rows.size
    ncols = nstd + na_cols

    T = np.zeros((R + 1, ncols + 1))
    T[:R, :nstd] = M
    T[art_rows, nstd + np.arange(na_cols)] = 1.0
    T[:R, -1] = rhs
    basis[art_rows] = nstd + np.arange(na_cols)
    max_iter = 50 * (R + ncols) + 1000

    if na_cols:
        T[R, nstd:ncols] = 1.0
        T[R] -= T[art_rows].sum(axis=0)
        _bland(T, basis, np.ones(ncols, dtype=bool), max_iter)
        if -T[R, -1] > tol * max(1, na_cols):
            return Status.INFEASIBLE, None
        # drive remaining artificials out of the basis, or drop their rows
        drop = []
        for i in range(R):
            if basis[i] < nstd:
                continue
            nz = np.flatnonzero(np.abs(T[i, :nstd]) > _PIVOT_TOL)
            if nz.size:
                _pivot(T, i, nz[0])
                basis[i] = nz[0]
            else:
                drop.append(i)
        if drop:
            keep = np.setdiff1d(np.arange(R + 1), drop)
            T = T[keep]
            basis = np.delete(basis, drop)
            M = np.delete(M, drop, axis=0)
            rhs = np.delete(rhs, drop)
            R = T.shape[0] - 1
        T = np.hstack([T[:, :nstd], T[:, -1:]])

    cost = np.concatenate([-c, c, np.zeros(m)])
    cnorm = np.max(np.abs(cost), initial=0.0)
    if cnorm > 0:
        cost = cost / cnorm
    T[R, :nstd] = cost
    T[R, -1] = 0.0
    T[R] -= cost[basis] @ T[:R]
    if not _bland(T, basis, np.ones(nstd, dtype=bool), max_iter):
        return Status.UNBOUNDED, None

    z = np.zeros(nstd)
    z[basis] = T[:R, -1]
    # recompute the basic solution from the original data
    try:
        zb = np.linalg.solve(M[:, basis], rhs)
        if np.all(np.isfinite(zb)) and np.max(np.abs(zb - z[basis]), initial=0.0) < 1e-6:
            z[basis] = zb
    except np.linalg.LinAlgError:
        pass
    x = (z[:n] - z[n:2 * n]) * scale
    return Status.OPTIMAL, x


# -- HiGHS route ------------------------------------------------------------

def _highs(p: LpProblem):
    from scipy.optimize import linprog

    scale = max(1.0, float(np.max(np.abs(p.b), initial=0.0)), float(np.max(np.abs(p.f), initial=0.0)))
    na = _normalized(p.A, p.b, False, FEAS_TOL * scale)
    ne = _normalized(p.E, p.f, True, FEAS_TOL * scale)
    if na is None or ne is None:
        return Status.INFEASIBLE, None
    A, b = na
    E, f = ne
    c = -p.objective if p.maximize else p.objective
    # numerically hard instances: retry with looser tolerances, then interior point
    attempts = (("highs", 1e-9), ("highs-ds", 1e-7), ("highs-ipm", 1e-7))
    for method, tol in attempts:
        res = linprog(
            c,
            A_ub=A if A.shape[0] else None,
            b_ub=b if A.shape[0] else None,
            A_eq=E if E.shape[0] else None,
            b_eq=f if E.shape[0] else None,
            bounds=(None, None),
            method=method,
            options={"primal_feasibility_tolerance": tol, "dual_feasibility_tolerance": tol},
        )
        if res.status == 0:
            return Status.OPTIMAL, np.asarray(res.x, dtype=float)
        if res.status == 2:
            return Status.INFEASIBLE, None
        if res.status == 3:
            return Status.UNBOUNDED, None
        logger.info("HiGHS (%s, tol %g) gave no answer: %s", method, tol, res.message)
    raise SolverError(f"HiGHS failed: {res.message}")
