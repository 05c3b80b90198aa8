"""DC network model, injection-shift-factor matrix and constraint polyhedra.

Everything is in MW.  The state is the vector ``x`` of net injections
(generation minus demand) per bus, ordered as ``net.buses``.  Line flows
are ``isf_matrix(net) @ x`` for balanced ``x``.

Two polyhedral formulations of the line constraints are available:

``"isf"``
    dense rows ``+/- H x <= limit`` in the injection space (``dim = n_bus``);
``"angle"``
    sparse rows over the lifted vector ``(x, theta)`` with the DC equations
    ``B theta = x`` and ``theta_ref = 0`` as equalities (``dim = 2 n_bus``).
    This is what makes networks with thousands of buses tractable; the
    first ``n_bus`` coordinates are still the injections.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import DisconnectedNetworkError, InputError
from .polytope import Polyhedron, contains, intersect

logger = logging.getLogger(__name__)

BALANCE_TOL = 1e-6  # MW
ISF_DENSE_MAX_BUS = 2000


@dataclass(frozen=True)
class Bus:
    id: int
    demand: float  # MW
    gen_max: float  # MW

    def __post_init__(self):
        if not (np.isfinite(self.demand) and np.isfinite(self.gen_max)):
            raise InputError(f"bus {self.id}: non-finite demand or generation limit")
        if self.gen_max < 0:
            raise InputError(f"bus {self.id}: negative generation limit {self.gen_max}")


@dataclass(frozen=True)
class Line:
    id: int
    from_bus: int
    to_bus: int
    susceptance: float  # p.u.
    limit: float  # MW
    unrated: bool = False  # limit is a substitute cap for "no rating"

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise InputError(f"line {self.id}: both ends at bus {self.from_bus}")
        if not np.isfinite(self.susceptance) or self.susceptance == 0:
            raise InputError(f"line {self.id}: susceptance must be finite and nonzero")
        if not np.isfinite(self.limit) or self.limit <= 0:
            raise InputError(f"line {self.id}: limit must be positive, got {self.limit}")


@dataclass(frozen=True, eq=True)
class NetworkModel:
    """Buses and lines of a DC network.  Immutable; derived matrices are cached."""

    base_mva: float
    buses: tuple
    lines: tuple
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "lines", tuple(self.lines))
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise InputError(f"duplicate bus ids: {dup[:10]}")
        known = set(ids)
        lids = [l.id for l in self.lines]
        if len(set(lids)) != len(lids):
            raise InputError("duplicate line ids")
        bad = [l.id for l in self.lines if l.from_bus not in known or l.to_bus not in known]
        if bad:
            raise InputError(f"lines reference unknown buses: {bad[:10]}")
        neg = [l.id for l in self.lines if l.susceptance < 0]
        if neg:
            logger.warning("%d lines have negative susceptance (series compensation)", len(neg))

    @property
    def n_bus(self):
        return len(self.buses)

    @property
    def n_line(self):
        return len(self.lines)

    @cached_property
    def bus_index(self) -> dict:
        return {b.id: i for i, b in enumerate(self.buses)}

    @cached_property
    def line_index(self) -> dict:
        return {l.id: k for k, l in enumerate(self.lines)}

    @cached_property
    def demand(self) -> np.ndarray:
        return np.array([b.demand for b in self.buses], dtype=float)

    @cached_property
    def gen_max(self) -> np.ndarray:
        return np.array([b.gen_max for b in self.buses], dtype=float)

    @cached_property
    def limits(self) -> np.ndarray:
        return np.array([l.limit for l in self.lines], dtype=float)

    @cached_property
    def incidence(self) -> sp.csr_matrix:
        """Line-by-bus incidence (+1 at the from end, -1 at the to end)."""
        L = self.n_line
        f = [self.bus_index[l.from_bus] for l in self.lines]
        t = [self.bus_index[l.to_bus] for l in self.lines]
        rows = np.r_[np.arange(L), np.arange(L)]
        return sp.csr_matrix((np.r_[np.ones(L), -np.ones(L)], (rows, np.r_[f, t])), shape=(L, self.n_bus))

    @cached_property
    def branch_matrix(self) -> sp.csr_matrix:
        """``Bf``: flow = ``Bf @ theta`` (MW per unit angle in the MW system)."""
        b = np.array([l.susceptance for l in self.lines])
        return (sp.diags(b) @ self.incidence).tocsr()

    @cached_property
    def bus_matrix(self) -> sp.csr_matrix:
        """Nodal susceptance (Laplacian) ``B = C^T diag(b) C``."""
        return (self.incidence.T @ self.branch_matrix).tocsr()

    def components(self) -> list[list[int]]:
        n = self.n_bus
        C = self.incidence
        adj = (C.T @ C) if C.shape[0] else sp.csr_matrix((n, n))
        k, labels = connected_components(adj, directed=False)
        ids = np.array([b.id for b in self.buses])
        return [ids[labels == c].tolist() for c in range(k)]

    def check_connected(self):
        comps = self.components()
        if len(comps) > 1:
            raise DisconnectedNetworkError(comps)

    def with_limits(self, limits: dict) -> "NetworkModel":
        """Copy with the thermal limits of the given line ids replaced."""
        lines = [
            Line(l.id, l.from_bus, l.to_bus, l.susceptance, limits[l.id]) if l.id in limits else l
            for l in self.lines
        ]
        return NetworkModel(self.base_mva, self.buses, lines, self.name)

    @cached_property
    def _isf(self) -> np.ndarray:
        return _isf(self, 0)


def isf_matrix(net: NetworkModel, ref: int | None = None) -> np.ndarray:
    """Dense injection-shift-factor matrix (n_line x n_bus).

    The angle system is solved with ``ref`` (bus index, default 0) as the
    angle reference and the result is projected onto balanced injections,
    so rows sum to zero and the matrix does not depend on ``ref``.
    """
    if ref is None:
        return net._isf
    return _isf(net, ref)


def _isf(net, ref):
    net.check_connected()
    n = net.n_bus
    if n > ISF_DENSE_MAX_BUS:
        raise InputError(f"dense ISF for {n} buses; use the angle formulation")
    ref = int(ref)
    if not 0 <= ref < n:
        raise InputError(f"reference bus index {ref} out of range")
    keep = np.r_[0:ref, ref + 1:n]
    B = net.bus_matrix.toarray()
    X = np.zeros((n, n))
    X[np.ix_(keep, keep)] = np.linalg.inv(B[np.ix_(keep, keep)])
    H = net.branch_matrix.toarray() @ X
    return H - H.mean(axis=1, keepdims=True)


def _check_balanced(x, n):
    x = np.asarray(x, dtype=float).ravel()
    if x.size != n:
        raise InputError(f"injection vector has length {x.size}, expected {n}")
    imbalance = float(x.sum())
    if abs(imbalance) > BALANCE_TOL:
        raise InputError(f"injections are unbalanced by {imbalance:.6g} MW")
    return x


def dc_flows(net: NetworkModel, x) -> np.ndarray:
    """Line flows (MW) for a balanced injection vector."""
    x = _check_balanced(x, net.n_bus)
    if net.n_bus <= ISF_DENSE_MAX_BUS:
        return isf_matrix(net) @ x
    from scipy.sparse.linalg import spsolve

    net.check_connected()
    B = net.bus_matrix.tocsc()[1:, 1:]
    theta = np.r_[0.0, spsolve(B, x[1:])]
    return net.branch_matrix @ theta


def generator_polyhedron(net: NetworkModel, sparse: bool = False) -> Polyhedron:
    """``PG``: ``-demand <= x <= gen_max - demand`` and ``sum x = 0``."""
    n = net.n_bus
    I = sp.identity(n, format="csr") if sparse else np.eye(n)
    A = sp.vstack([-I, I]).tocsr() if sparse else np.vstack([-I, I])
    b = np.concatenate([net.demand, net.gen_max - net.demand])
    E = sp.csr_matrix(np.ones((1, n))) if sparse else np.ones((1, n))
    return Polyhedron(A, b, E, [0.0], dim=n)


def line_polyhedron(net: NetworkModel, formulation: str = "isf") -> Polyhedron:
    """``PL``: ``|flow_l| <= limit_l`` for every line, plus balance.

    Rows ``0..L-1`` bound the forward flow, rows ``L..2L-1`` the reverse flow.
    """
    n, L = net.n_bus, net.n_line
    lim = net.limits
    if formulation == "isf":
        H = isf_matrix(net)
        return Polyhedron(np.vstack([H, -H]), np.concatenate([lim, lim]), np.ones((1, n)), [0.0])
    if formulation == "angle":
        net.check_connected()
        Bf = net.branch_matrix
        zero = sp.csr_matrix((L, n))
        A = sp.vstack([sp.hstack([zero, Bf]), sp.hstack([zero, -Bf])]).tocsr()
        # B theta - x = 0 implies sum x = 0; theta_0 = 0 fixes the angle reference
        ref_row = sp.csr_matrix(([1.0], ([0], [n])), shape=(1, 2 * n))
        E = sp.vstack([sp.hstack([-sp.identity(n), net.bus_matrix]), ref_row]).tocsr()
        return Polyhedron(A, np.concatenate([lim, lim]), E, np.zeros(n + 1), dim=2 * n)
    raise InputError(f"unknown formulation {formulation!r}")


def default_formulation(net: NetworkModel) -> str:
    return "isf" if net.n_bus <= 200 else "angle"


def feasible_polyhedron(net: NetworkModel, formulation: str | None = None) -> Polyhedron:
    """``PG ∩ PL``; in the angle formulation the angles follow the injections."""
    formulation = formulation or default_formulation(net)
    PL = line_polyhedron(net, formulation)
    if formulation == "isf":
        return intersect(generator_polyhedron(net), PL)
    PG = generator_polyhedron(net, sparse=True).lift(net.n_bus)
    return intersect(PG, PL)


def line_rows(net: NetworkModel, formulation: str | None = None):
    """Signed line-constraint rows ``(A, b, labels)`` in the chosen space.

    ``labels[k] = (line_id, sign)`` with sign +1 for the forward limit.
    """
    formulation = formulation or default_formulation(net)
    P = line_polyhedron(net, formulation)
    labels = [(l.id, +1) for l in net.lines] + [(l.id, -1) for l in net.lines]
    return P.A, P.b, labels


def is_feasible(net: NetworkModel, x, tol: float = 1e-6) -> bool:
    """True iff ``x`` lies in ``PG`` and ``PL`` (normalized tolerance ``tol`` MW)."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != net.n_bus:
        raise InputError(f"injection vector has length {x.size}, expected {net.n_bus}")
    if not contains(generator_polyhedron(net), x, tol):
        return False
    flows = dc_flows(net, x - x.mean())
    return bool(np.all(np.abs(flows) <= net.limits + tol))
