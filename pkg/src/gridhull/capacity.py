"""Transfer-capacity sets: NTC scaling, flow-based and strongly feasible sets.

Injections live either in the bus space (``"isf"`` formulation, flows
``H x``) or in the lifted ``(x, theta)`` space (``"angle"`` formulation,
flows ``Bf theta``); every LP here is written against a flow matrix ``F``
so both work.  Corridors are one-sided: a bidirectional border is two
corridors with opposite signs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import lpsolve
from .errors import InputError, NtcDataError
from .lpsolve import LpProblem, Status
from .netmodel import (
    BALANCE_TOL,
    NetworkModel,
    default_formulation,
    generator_polyhedron,
    isf_matrix,
    line_polyhedron,
)
from .polytope import Polyhedron, intersect
from .project import EXACT_MAX_BUS, AggregationMap, image_approx, image_exact
from .setdiff import region_diff

logger = logging.getLogger(__name__)

EPS_STRICT = 1e-6  # MW


@dataclass(frozen=True)
class Corridor:
    """Signed sum of line flows, e.g. all tie-lines from one region to another."""

    name: str
    terms: tuple  # ((line_id, +1 | -1), ...)

    def __post_init__(self):
        terms = tuple((int(l), int(c)) for l, c in self.terms)
        if not terms:
            raise InputError(f"corridor {self.name!r} has no lines")
        bad = [c for _, c in terms if c not in (1, -1)]
        if bad:
            raise InputError(f"corridor {self.name!r}: coefficients must be +1 or -1")
        object.__setattr__(self, "terms", terms)


@dataclass(frozen=True, eq=False)
class NtcSpec:
    corridors: tuple
    bounds: np.ndarray | None = None  # MW per corridor
    direction: np.ndarray | None = None  # nominal direction n >= 0
    weights: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "corridors", tuple(self.corridors))
        c = len(self.corridors)
        for name in ("bounds", "direction", "weights"):
            v = getattr(self, name)
            if v is None:
                continue
            v = np.asarray(v, dtype=float).ravel()
            if v.size != c:
                raise InputError(f"{name} has {v.size} entries for {c} corridors")
            if not np.all(np.isfinite(v)):
                raise InputError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        n = self.direction
        if n is not None and c and (np.any(n < 0) or not np.any(n > 0)):
            raise InputError("nominal direction must be nonnegative with a positive entry")

    @property
    def names(self):
        return [k.name for k in self.corridors]

    def with_bounds(self, bounds) -> "NtcSpec":
        return NtcSpec(self.corridors, bounds, self.direction, self.weights)

    def with_direction(self, direction) -> "NtcSpec":
        return NtcSpec(self.corridors, self.bounds, direction, self.weights)

    def corridor_matrix(self, net: NetworkModel) -> sp.csr_matrix:
        """``T_line``: corridors x lines, entries +/-1."""
        rows, cols, vals = [], [], []
        for r, k in enumerate(self.corridors):
            for lid, coef in k.terms:
                if lid not in net.line_index:
                    raise InputError(f"corridor {k.name!r} references unknown line {lid}")
                rows.append(r)
                cols.append(net.line_index[lid])
                vals.append(coef)
        return sp.csr_matrix((vals, (rows, cols)), shape=(len(self.corridors), net.n_line))


# -- the injection space -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class _Space:
    PG: Polyhedron  # generator box + balance (+ DC equations when lifted)
    F: object  # line flows = F @ z
    n_bus: int


def _space(net: NetworkModel, formulation: str | None = None) -> _Space:
    formulation = formulation or default_formulation(net)
    if formulation == "isf":
        return _Space(generator_polyhedron(net), isf_matrix(net), net.n_bus)
    if formulation == "angle":
        PL = line_polyhedron(net, "angle")
        PG = generator_polyhedron(net, sparse=True).lift(net.n_bus)
        PG = Polyhedron(PG.A, PG.b, sp.vstack([PG.E, PL.E]).tocsr(), np.r_[PG.f, PL.f], dim=PG.dim)
        F = PL.A[: net.n_line]
        return _Space(PG, F, net.n_bus)
    raise InputError(f"unknown formulation {formulation!r}")


def _row(F, i):
    r = F[i]
    return r.toarray().ravel() if sp.issparse(r) else np.asarray(r, dtype=float).ravel()


def _vstack(blocks):
    if any(sp.issparse(b) for b in blocks):
        return sp.vstack([sp.csr_matrix(b) for b in blocks]).tocsr()
    return np.vstack(blocks)


def _hstack(blocks):
    if any(sp.issparse(b) for b in blocks):
        return sp.hstack([sp.csr_matrix(b) for b in blocks]).tocsr()
    return np.hstack(blocks)


def _ntc_rows(net, spec, S: _Space):
    Tl = spec.corridor_matrix(net)
    A = Tl @ S.F
    return A.toarray() if sp.issparse(A) and not sp.issparse(S.F) else A


def ntc_polyhedron(net: NetworkModel, spec: NtcSpec, bounds=None, formulation: str | None = None) -> Polyhedron:
    """``PNTC``: corridor flows <= bounds, generator box and balance."""
    S = _space(net, formulation)
    if not spec.corridors:
        return S.PG
    b = spec.bounds if bounds is None else np.asarray(bounds, dtype=float).ravel()
    if b is None:
        raise InputError("NTC bounds are required")
    A = _ntc_rows(net, spec, S)
    return intersect(S.PG, Polyhedron(A, b, dim=S.PG.dim))


def flow_polyhedron(net: NetworkModel, formulation: str | None = None) -> Polyhedron:
    """``PG n PL`` in the chosen space."""
    S = _space(net, formulation)
    lim = net.limits
    return intersect(S.PG, Polyhedron(_vstack([S.F, -S.F]), np.r_[lim, lim], dim=S.PG.dim))


# -- optimal NTC scaling -----------------------------------------------------

def _scaling_lp(net, spec, S, i, sign, Antc):
    """min k s.t. Antc z - n k <= 0, z in PG, sign * flow_i >= limit_i."""
    n = spec.direction
    dim = S.PG.dim
    c = np.zeros(dim + 1)
    c[-1] = 1.0
    zc = np.zeros((S.PG.n_ineq, 1))
    fi = _row(S.F, i)
    A = _vstack([
        _hstack([Antc, -n[:, None]]),
        _hstack([S.PG.A, zc]),
        np.r_[-sign * fi, 0.0][None, :],
    ])
    b = np.r_[np.zeros(len(n)), S.PG.b, -net.limits[i]]
    E = _hstack([S.PG.E, np.zeros((S.PG.n_eq, 1))])
    return LpProblem(c, A, b, E, S.PG.f, maximize=False)


def ntc_line_scaling(
    net: NetworkModel, spec: NtcSpec, line: int, sign: int, formulation: str | None = None
) -> float:
    """Smallest scaling ``k`` along ``spec.direction`` at which line ``line``
    (index) can reach its limit in direction ``sign``; ``inf`` if it never can,
    ``-inf`` if the corridors cannot protect it at all."""
    if spec.direction is None:
        raise InputError("nominal direction required")
    S = _space(net, formulation)
    return _line_scaling(net, spec, S, _ntc_rows(net, spec, S), line, sign)


def _line_scaling(net, spec, S, Antc, i, sign):
    res = lpsolve.solve(_scaling_lp(net, spec, S, i, sign, Antc))
    if res.status is Status.INFEASIBLE:
        return math.inf
    if res.status is Status.UNBOUNDED:
        return -math.inf
    return float(res.value)


@dataclass(frozen=True, eq=False)
class NtcScaling:
    k_star: float
    table: dict  # (line_id, sign) -> k_i (inf allowed)
    binding: tuple | None  # (line_id, sign) attaining k_star
    direction: np.ndarray
    bounds: np.ndarray  # k_star * direction

    @property
    def finite(self):
        return math.isfinite(self.k_star)


def _scaling(net, spec, S, Antc) -> NtcScaling:
    table = {}
    for i, line in enumerate(net.lines):
        for sign in (1, -1):
            table[(line.id, sign)] = _line_scaling(net, spec, S, Antc, i, sign)
    bad = [key for key, k in table.items() if k == -math.inf]
    if bad:
        raise NtcDataError(f"NTC corridors cannot protect lines {bad[:10]}: violation possible at any scaling")
    binding = min(table, key=lambda key: (table[key], net.line_index[key[0]], -key[1]))
    k_star = table[binding]
    if k_star == math.inf:
        logger.warning("no line can reach its limit under PG; NTC is unconstrained by lines")
        return NtcScaling(k_star, table, None, spec.direction.copy(), np.full(len(spec.direction), np.inf))
    _check_threshold(net, spec, S, Antc, table, k_star)
    return NtcScaling(k_star, table, binding, spec.direction.copy(), k_star * spec.direction)


def _check_threshold(net, spec, S, Antc, table, k_star):
    """Lines whose ``k_i`` equals ``k*`` may already be beyond their limit
    at ``k*`` when ``k*`` is the smallest scaling with a nonempty PNTC.
    Such lines cannot be protected along this direction."""
    tol = 1e-9 * max(1.0, abs(k_star))
    P = intersect(S.PG, Polyhedron(Antc, k_star * spec.direction, dim=S.PG.dim))
    bad = []
    for (lid, sign), k in table.items():
        if k > k_star + tol:
            continue
        i = net.line_index[lid]
        res = lpsolve.solve(LpProblem(sign * _row(S.F, i), P.A, P.b, P.E, P.f))
        if res.status is Status.OPTIMAL and res.value > net.limits[i] + EPS_STRICT:
            bad.append((lid, sign))
    if bad:
        raise NtcDataError(
            f"NTC corridors cannot protect lines {bad[:10]}: limit already exceeded at the "
            f"smallest scaling {k_star:.6g} with a nonempty NTC set"
        )


def ntc_max_scaling(net: NetworkModel, spec: NtcSpec, formulation: str | None = None) -> NtcScaling:
    """``k* = min_i k_i`` over all lines and both signs; ``b_ntc = k* n``."""
    if spec.direction is None:
        raise InputError("nominal direction required")
    S = _space(net, formulation)
    return _scaling(net, spec, S, _ntc_rows(net, spec, S))


@dataclass(frozen=True, eq=False)
class NtcSearchResult:
    spec: NtcSpec  # best direction with its effective bounds
    scaling: NtcScaling
    objective: float
    index: int
    objectives: np.ndarray  # -inf for directions without a safe finite scaling


def sample_directions(count: int, n_corridors: int, seed: int = 42) -> np.ndarray:
    """Nonnegative unit vectors, |gaussian| normalized; reproducible for a seed."""
    rng = np.random.default_rng(seed)
    G = np.abs(rng.standard_normal((count, n_corridors)))
    nrm = np.linalg.norm(G, axis=1)
    nrm[nrm == 0] = 1.0
    return G / nrm[:, None]


def corridor_capacity(net: NetworkModel, spec: NtcSpec, formulation: str | None = None) -> np.ndarray:
    """Largest flow each corridor can carry over ``PG`` (bounds above it are inactive)."""
    S = _space(net, formulation)
    A = _ntc_rows(net, spec, S)
    P = S.PG
    out = np.empty(len(spec.corridors))
    for c in range(len(spec.corridors)):
        row = A[c].toarray().ravel() if sp.issparse(A) else A[c]
        res = lpsolve.solve(LpProblem(row, P.A, P.b, P.E, P.f))
        out[c] = res.value if res.status is Status.OPTIMAL else np.inf
    return out


def effective_bounds(bounds, capacity) -> np.ndarray:
    """Bounds clipped to the corridor capacity; the NTC set is unchanged."""
    return np.minimum(np.asarray(bounds, dtype=float), capacity)


def ntc_direction_search(
    net: NetworkModel,
    corridors,
    sample_count: int,
    weights=None,
    seed: int = 42,
    formulation: str | None = None,
) -> NtcSearchResult:
    """Best ``k* n`` over random nonnegative directions, by ``w . b_eff``.

    ``b_eff`` clips each bound to what the corridor can carry under PG, so
    inactive bounds do not inflate the objective.  Ties keep the earliest
    sample.  Directions without a finite, protectable scaling are skipped.
    """
    if sample_count < 1:
        raise InputError("sample_count must be at least 1")
    corridors = tuple(corridors)
    w = np.ones(len(corridors)) if weights is None else np.asarray(weights, dtype=float).ravel()
    if w.size != len(corridors):
        raise InputError("one weight per corridor required")
    dirs = sample_directions(sample_count, len(corridors), seed)
    S = _space(net, formulation)
    base = NtcSpec(corridors, weights=w)
    Antc = _ntc_rows(net, base, S)
    cap = corridor_capacity(net, base, formulation)
    best = None
    objectives = np.full(sample_count, -np.inf)
    for s, d in enumerate(dirs):
        try:
            sc = _scaling(net, base.with_direction(d), S, Antc)
        except NtcDataError:
            continue
        if not sc.finite:
            continue
        objectives[s] = float(w @ effective_bounds(sc.bounds, cap))
        if best is None or objectives[s] > objectives[best[0]]:
            best = (s, sc)
    if best is None:
        raise NtcDataError("no sampled direction gives a finite, protectable NTC scaling")
    s, sc = best
    spec = base.with_direction(sc.direction).with_bounds(effective_bounds(sc.bounds, cap))
    return NtcSearchResult(spec, sc, float(objectives[s]), s, objectives)


@dataclass(frozen=True, eq=False)
class NtcVerification:
    ok: bool
    violations: list  # [(line_id, sign)]
    max_flows: np.ndarray  # (L, 2): largest forward / reverse flow over PNTC


def verify_ntc(
    net: NetworkModel, spec: NtcSpec, eps: float = EPS_STRICT, formulation: str | None = None
) -> NtcVerification:
    """Can any line exceed its limit by more than ``eps`` inside PNTC?

    Each line and sign is checked by maximizing the signed flow over PNTC;
    the bound holds iff ``{flow >= limit + eps}`` is infeasible.
    """
    P = ntc_polyhedron(net, spec, formulation=formulation)
    flows = max_line_flows(P, net, formulation)
    violations = [
        (line.id, sign)
        for i, line in enumerate(net.lines)
        for j, sign in enumerate((1, -1))
        if flows[i, j] >= net.limits[i] + eps
    ]
    return NtcVerification(not violations, violations, flows)


def max_line_flows(P: Polyhedron, net: NetworkModel, formulation: str | None = None) -> np.ndarray:
    """``(L, 2)`` array of the largest forward and reverse flow of every line over ``P``."""
    S = _space(net, formulation)
    out = np.empty((net.n_line, 2))
    for i in range(net.n_line):
        fi = _row(S.F, i)
        for j, sign in enumerate((1, -1)):
            res = lpsolve.solve(LpProblem(sign * fi, P.A, P.b, P.E, P.f))
            out[i, j] = res.value if res.status is not Status.INFEASIBLE else -np.inf
    return out


# -- mapped sets -------------------------------------------------------------

@dataclass(eq=False)
class MappedSets:
    PGt: object
    PLt: object
    PNTCt: object = None
    exact: bool = True


def _image(P, agg, exact, budget, tol, seed):
    return image_exact(P, agg) if exact else image_approx(P, agg, budget=budget, tol=tol, seed=seed)


def mapped_sets(
    net: NetworkModel,
    agg: AggregationMap,
    spec: NtcSpec | None = None,
    method: str = "auto",
    budget: int = 64,
    tol: float = 1.0,
    seed: int = 42,
    formulation: str | None = None,
) -> MappedSets:
    """Images of ``PG``, ``PG n PL`` and (if ``spec`` has bounds) ``PNTC``."""
    if agg.n_bus != net.n_bus:
        raise InputError(f"aggregation covers {agg.n_bus} buses, network has {net.n_bus}")
    exact = {"auto": net.n_bus <= EXACT_MAX_BUS, "exact": True, "approx": False}.get(method)
    if exact is None:
        raise InputError(f"unknown projection method {method!r}")
    S = _space(net, formulation)
    PGt = _image(S.PG, agg, exact, budget, tol, seed)
    PLt = _image(flow_polyhedron(net, formulation), agg, exact, budget, tol, seed)
    PNTCt = None
    if spec is not None and spec.bounds is not None:
        PNTCt = _image(ntc_polyhedron(net, spec, formulation=formulation), agg, exact, budget, tol, seed)
    return MappedSets(PGt, PLt, PNTCt, exact)


def violation_sets(net: NetworkModel, agg: AggregationMap) -> list[Polyhedron]:
    """Images of ``PG n {sign * flow_i >= limit_i}`` for every line and sign
    (empty ones dropped), in line order, forward before reverse."""
    S = _space(net, "isf")
    out = []
    for i in range(net.n_line):
        fi = _row(S.F, i)
        for sign in (1, -1):
            V = image_exact(S.PG.add_rows(-sign * fi[None, :], [-net.limits[i]]), agg)
            if not (V.n_ineq == 1 and not np.any(V.A) and V.b[0] < 0):
                out.append(V)
    return out


def strong_feasible_set(net: NetworkModel, agg: AggregationMap):
    """``PFt = PGt`` minus the images of all line-violation sets."""
    PGt = image_exact(generator_polyhedron(net), agg)
    return region_diff(PGt, violation_sets(net, agg))


# -- point checks ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FeasibilityReport:
    feasible: bool
    strongly_feasible: bool
    witness: np.ndarray | None = None
    worst_line: tuple | None = None  # (line_id, max flow MW, limit MW)


def _fiber(S: _Space, agg: AggregationMap, y, P: Polyhedron) -> Polyhedron:
    Tm = agg.matrix(P.dim, sparse=P.is_sparse)
    return P.add_rows(E=Tm, f=y)


def fiber_feasible(net: NetworkModel, agg: AggregationMap, y, formulation: str | None = None):
    """Witness ``x in PG n PL`` with ``T x = y``, or ``None``."""
    y = _check_y(agg, y)
    S = _space(net, formulation)
    Q = _fiber(S, agg, y, flow_polyhedron(net, formulation))
    res = lpsolve.solve(LpProblem(np.zeros(Q.dim), Q.A, Q.b, Q.E, Q.f))
    return res.point[: net.n_bus] if res.status is Status.OPTIMAL else None


def _check_y(agg, y):
    y = np.asarray(y, dtype=float).ravel()
    if y.size != agg.n_regions:
        raise InputError(f"reduced state has length {y.size}, expected {agg.n_regions}")
    if abs(y.sum()) > BALANCE_TOL:
        raise InputError(f"reduced state is unbalanced by {y.sum():.6g} MW")
    return y


def check_feasible(
    net: NetworkModel, agg: AggregationMap, y, tol: float = 1e-6, formulation: str | None = None
) -> FeasibilityReport:
    """Feasibility (some fiber point is admissible) and strong feasibility
    (every generator-admissible fiber point respects all line limits)."""
    y = _check_y(agg, y)
    S = _space(net, formulation)
    witness = fiber_feasible(net, agg, y, formulation)
    G = _fiber(S, agg, y, S.PG)
    if not lpsolve.feasible(LpProblem(np.zeros(G.dim), G.A, G.b, G.E, G.f)):
        return FeasibilityReport(False, False)
    flows = max_line_flows(G, net, formulation)
    excess = flows - net.limits[:, None]
    i, j = np.unravel_index(np.argmax(excess), excess.shape)
    strong = bool(excess[i, j] <= tol)
    worst = None if strong else (net.lines[i].id, float(flows[i, j] * (1 if j == 0 else -1)), float(net.limits[i]))
    return FeasibilityReport(witness is not None, strong and witness is not None, witness, worst)


# -- accounting --------------------------------------------------------------

@dataclass(frozen=True)
class CapacityAccount:
    ttc: float
    trm: float = 0.0
    ltc: float = 0.0
    aac: float = 0.0

    def __post_init__(self):
        for name in ("ttc", "trm", "ltc", "aac"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise InputError(f"{name} must be a finite nonnegative value, got {v}")


@dataclass(frozen=True)
class AccountResult:
    ntc: float
    atc: float
    clamped: bool = False
    warnings: tuple = field(default=())


def capacity_account(a: CapacityAccount) -> AccountResult:
    """``ntc = ttc - trm - ltc`` and ``atc = ntc - aac``, negatives clamped to 0."""
    warnings = []
    ntc = a.ttc - a.trm - a.ltc
    if ntc < 0:
        warnings.append(f"TRM + LTC exceed TTC by {-ntc:g} MW; NTC set to 0")
        ntc = 0.0
    atc = ntc - a.aac
    if atc < 0:
        warnings.append(f"AAC exceeds NTC by {-atc:g} MW; ATC set to 0")
        atc = 0.0
    for w in warnings:
        logger.warning(w)
    return AccountResult(ntc, atc, bool(warnings), tuple(warnings))


def exchange_box_corners(y0, hub: int, partners, bounds) -> np.ndarray:
    """Corners of the reduced states reachable from ``y0`` by bilateral
    exchanges ``|e_j| <= bounds[j]`` between region ``hub`` and each partner."""
    y0 = np.asarray(y0, dtype=float).ravel()
    partners = list(partners)
    bounds = np.asarray(bounds, dtype=float).ravel()
    if len(partners) != bounds.size:
        raise InputError("one bound per partner region required")
    corners = []
    for signs in np.ndindex(*(2,) * len(partners)):
        y = y0.copy()
        for j, s in zip(partners, signs):
            e = bounds[partners.index(j)] * (1 if s == 0 else -1)
            y[hub] += e
            y[j] -= e
        corners.append(y)
    return np.array(corners)
