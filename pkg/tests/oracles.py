"""Independent oracles and probe generators for the test suite.

Flows come from a dense pseudo-inverse of the nodal susceptance matrix and
fiber feasibility is decided by ``scipy.optimize.linprog`` on the plain
bus-space model, so neither touches the package's LP or polytope code.
"""

from pathlib import Path

import numpy as np
from scipy.optimize import linprog
from scipy.stats import qmc

from gridhull import casefmt
from gridhull.lpsolve import LpProblem
from gridhull.netmodel import Bus, Line, NetworkModel

DATA = Path(__file__).resolve().parent / "data"


def load_fixture(name):
    return casefmt.load_network(casefmt.data_file(name))


def two_bus(limit=6.0):
    return NetworkModel(100.0, [Bus(1, 0.0, 10.0), Bus(2, 8.0, 10.0)], [Line(1, 1, 2, 10.0, limit)])


def ring3():
    buses = [Bus(i, 0.0, 0.0) for i in (1, 2, 3)]
    lines = [Line(1, 1, 2, 5.0, 100.0), Line(2, 1, 3, 5.0, 100.0), Line(3, 3, 2, 5.0, 100.0)]
    return NetworkModel(100.0, buses, lines)


# -- oracles --------------------------------------------------------------

def oracle_isf(net):
    """Flows per unit balanced injection via the Laplacian pseudo-inverse."""
    n = net.n_bus
    b = np.array([l.susceptance for l in net.lines])
    C = np.zeros((net.n_line, n))
    for k, l in enumerate(net.lines):
        C[k, net.bus_index[l.from_bus]] = 1.0
        C[k, net.bus_index[l.to_bus]] = -1.0
    B = C.T @ np.diag(b) @ C
    return np.diag(b) @ C @ np.linalg.pinv(B)


def oracle_fiber(net, groups, y, limits=True, objective=None):
    """``linprog`` over ``{x : box, sum x = 0, T x = y, |H x| <= lim}``.

    Returns the OptimizeResult (status 0 optimal, 2 infeasible).
    """
    n = net.n_bus
    H = oracle_isf(net)
    lo = -net.demand
    hi = net.gen_max - net.demand
    T = np.zeros((len(groups), n))
    for j, g in enumerate(groups):
        T[j, g] = 1.0
    A_eq = np.vstack([np.ones((1, n)), T])
    b_eq = np.r_[0.0, y]
    A_ub = np.vstack([H, -H]) if limits else None
    b_ub = np.r_[net.limits, net.limits] if limits else None
    c = np.zeros(n) if objective is None else -np.asarray(objective)
    return linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=list(zip(lo, hi)), method="highs")


def oracle_feasible(net, groups, y):
    return oracle_fiber(net, groups, y).status == 0


def oracle_fiber_max_flows(net, groups, y):
    """Largest signed flow per line and sign over ``{x in PG : T x = y}``, or None."""
    H = oracle_isf(net)
    out = np.empty((net.n_line, 2))
    for i in range(net.n_line):
        for j, s in enumerate((1, -1)):
            r = oracle_fiber(net, groups, y, limits=False, objective=s * H[i])
            if r.status != 0:
                return None
            out[i, j] = -r.fun
    return out


def sobol(n, lo, hi, seed=0):
    s = qmc.Sobol(d=len(lo), scramble=True, seed=seed)
    return qmc.scale(s.random(n), lo, hi)


def simplex_probes(n, lo, hi, seed=0):
    """Quasi-random balanced 3-region points: first two coordinates free, third closes the balance."""
    P = sobol(n, lo, hi, seed)
    return np.column_stack([P[:, 0], P[:, 1], -P[:, 0] - P[:, 1]])


def mc_area(member, lo, hi, n=100_000, seed=1):
    """Monte-Carlo area of a planar set given a vectorized membership function."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(lo, hi, size=(n, 2))
    frac = member(pts).mean()
    return frac * np.prod(np.asarray(hi) - np.asarray(lo))


def six_probes(n, seed=0, margin=500.0):
    """Quasi-random balanced six-bus reduced states (north, center, south).

    North and south are drawn around their generator ranges
    ([-3, 7] GW and [-6, -3] GW); the center closes the balance.
    """
    P = sobol(n, [-3000 - margin, -6000 - margin], [7000 + margin, -3000 + margin], seed)
    return np.column_stack([P[:, 0], -P[:, 0] - P[:, 1], P[:, 1]])


# -- random LPs -------------------------------------------------------------

def random_lp(rng, n, m):
    # bounded by a box, feasible at the origin
    A = rng.normal(size=(m, n))
    b = rng.uniform(0.1, 2.0, size=m)
    A = np.vstack([A, np.eye(n), -np.eye(n)])
    b = np.r_[b, np.full(2 * n, 5.0)]
    p = rng.integers(0, 2)
    E = rng.normal(size=(p, n))
    return LpProblem(rng.normal(size=n), A, b, E, np.zeros(p))  # origin stays feasible


def dual_value(p):
    """min b.u + f.v  s.t.  A^T u + E^T v = c, u >= 0 (dual of max c.x)."""
    m, q = p.A.shape[0], p.E.shape[0]
    obj = np.r_[p.b, p.f]
    A_eq = np.hstack([p.A.T, p.E.T])
    bounds = [(0, None)] * m + [(None, None)] * q
    r = linprog(obj, A_eq=A_eq, b_eq=p.objective, bounds=bounds, method="highs")
    assert r.status == 0
    return r.fun
