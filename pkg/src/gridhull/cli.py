"""Command-line front end: ``gridhull project | ntc | strong | check | account | plot``.

Values given on or printed to the terminal are GW; files store MW.

Exit codes: 0 success, 1 other library error, 2 parse or input error,
3 infeasible or empty constraint set, 4 resource cap exceeded.
``check`` returns 0 (strongly feasible), 10 (feasible only) or 11 (infeasible).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import casefmt
from .capacity import (
    CapacityAccount,
    capacity_account,
    check_feasible,
    flow_polyhedron,
    mapped_sets,
    ntc_direction_search,
    ntc_max_scaling,
    strong_feasible_set,
    verify_ntc,
)
from .errors import GridhullError, InputError, NtcDataError, ParseError, ResourceError
from .polytope import PolyUnion, Polyhedron, affine_hull_parametrization, is_empty, vertices_2d
from .project import ApproxSet, image_exact

logger = logging.getLogger("gridhull")

EXIT_OK, EXIT_ERROR, EXIT_PARSE, EXIT_EMPTY, EXIT_RESOURCE = 0, 1, 2, 3, 4
EXIT_FEASIBLE_ONLY, EXIT_INFEASIBLE = 10, 11

GW = 1000.0


class _Empty(GridhullError):
    pass


def _gw(x) -> str:
    return "inf" if not math.isfinite(x) else f"{x / GW:.3f}"


def _floats(text: str, what: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.split(",") if t.strip()], dtype=float)
    except ValueError:
        raise InputError(f"{what}: expected comma-separated numbers, got {text!r}") from None


def _dump(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1) + "\n", encoding="utf-8")


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _require(path, flag):
    if path is None:
        raise InputError(f"{flag} is required")
    p = Path(path)
    if not p.exists():
        raise InputError(f"{flag}: no such file {p}")
    return p


def _load(args, need_agg=True, need_ntc=False):
    net = casefmt.load_network(_require(args.net, "--net"))
    agg = None
    if need_agg:
        agg = casefmt.parse_aggregation(casefmt.read_text(_require(args.agg, "--agg")), net)
    spec = None
    if need_ntc or getattr(args, "ntc", None):
        spec = casefmt.parse_ntc(casefmt.read_text(_require(args.ntc, "--ntc")))
    return net, agg, spec


# -- project -------------------------------------------------------------------

def cmd_project(args) -> int:
    net, agg, spec = _load(args)
    if args.budget < 1 or args.tol_mw <= 0:
        raise InputError("--budget must be >= 1 and --tol-mw > 0")
    if is_empty(flow_polyhedron(net)):
        raise _Empty("generator and line constraints have no common point")
    method = args.method or "auto"
    sets = mapped_sets(net, agg, spec, method=method, budget=args.budget, tol=args.tol_mw, seed=args.seed)
    out = Path(args.out)
    coords = list(agg.names) or None
    files = {"PGt": sets.PGt, "PLt": sets.PLt}
    if sets.PNTCt is not None:
        files["PNTCt"] = sets.PNTCt
    for name, obj in files.items():
        (out / f"{name}.json").parent.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.json").write_text(casefmt.write_polytope_json(obj, coords), encoding="utf-8")
    print(f"method: {'exact' if sets.exact else 'approx'}")
    if not sets.exact:
        report = {name: {"gap_mw": _num(a.gap), "directions": int(len(a.directions)),
                         "inner_vertices": int(len(a.inner_vertices))} for name, a in files.items()}
        _dump(out / "gap.json", report)
        for name, r in report.items():
            print(f"{name}: {r['directions']} directions, gap {_gw(files[name].gap)} GW")
    else:
        for name, P in files.items():
            print(f"{name}: {P.n_ineq} inequalities, {P.n_eq} equalities")
    return EXIT_OK


# -- ntc -----------------------------------------------------------------------

def _scaling_json(sc):
    return {
        "k_star_mw": _num(sc.k_star),
        "binding": None if sc.binding is None else {"line": sc.binding[0], "sign": sc.binding[1]},
        "direction": [float(v) for v in sc.direction],
        "bounds_mw": [_num(v) for v in sc.bounds],
        "table": [{"line": l, "sign": s, "k_mw": _num(k)} for (l, s), k in sc.table.items()],
    }


def cmd_ntc(args) -> int:
    net, _, spec = _load(args, need_agg=False, need_ntc=True)
    if args.weights:
        spec = spec.__class__(spec.corridors, spec.bounds, spec.direction, _floats(args.weights, "--weights"))
    result = {"corridors": spec.names}
    if args.bounds:
        spec = spec.with_bounds(_floats(args.bounds, "--bounds") * GW)
    if args.verify:
        if spec.bounds is None:
            raise InputError("--verify needs bounds (in the NTC file or via --bounds)")
        v = verify_ntc(net, spec)
        result["verification"] = {
            "bounds_mw": [float(b) for b in spec.bounds],
            "ok": v.ok,
            "violations": [{"line": l, "sign": s} for l, s in v.violations],
        }
        print(f"bounds (GW): {', '.join(_gw(b) for b in spec.bounds)}")
        print(f"safe: {'yes' if v.ok else 'no'}")
        for l, s in v.violations:
            print(f"  line {l} ({'+' if s > 0 else '-'}) can exceed its limit")
    elif args.search:
        r = ntc_direction_search(net, spec.corridors, args.search, weights=spec.weights, seed=args.seed)
        result.update(_scaling_json(r.scaling))
        result["search"] = {"samples": args.search, "seed": args.seed, "index": r.index,
                            "objective_mw": r.objective}
        result["b_ntc_mw"] = [float(b) for b in r.spec.bounds]
        _print_scaling(r.scaling, r.spec.names)
        print(f"best sample {r.index} of {args.search}, objective {_gw(r.objective)} GW")
        print(f"b_ntc (GW): {', '.join(_gw(b) for b in r.spec.bounds)}")
    else:
        if spec.direction is None:
            spec = spec.with_direction(np.ones(len(spec.corridors)))
        sc = ntc_max_scaling(net, spec)
        result.update(_scaling_json(sc))
        result["b_ntc_mw"] = [_num(b) for b in sc.bounds]
        _print_scaling(sc, spec.names)
        print(f"b_ntc (GW): {', '.join(_gw(b) for b in sc.bounds)}")
    _dump(Path(args.out) / "ntc_result.json", result)
    return EXIT_OK


def _print_scaling(sc, names):
    print(f"k_star: {_gw(sc.k_star)} GW")
    if sc.binding is not None:
        print(f"binding line: {sc.binding[0]} ({'+' if sc.binding[1] > 0 else '-'})")
    for (l, s), k in sc.table.items():
        print(f"  line {l:>4} {'+' if s > 0 else '-'}  k = {_gw(k)} GW")


# -- strong --------------------------------------------------------------------

def cmd_strong(args) -> int:
    net, agg, _ = _load(args)
    U = strong_feasible_set(net, agg)
    out = Path(args.out) / "pft.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(casefmt.write_polytope_json(U, list(agg.names) or None), encoding="utf-8")
    print(f"strongly feasible set: {len(U)} parts{' (empty)' if U.is_empty else ''}")
    return EXIT_OK


# -- check ---------------------------------------------------------------------

def cmd_check(args) -> int:
    net, agg, _ = _load(args)
    y = _floats(args.y, "--y") * GW
    r = check_feasible(net, agg, y, tol=args.eps_mw)
    print(f"feasible: {'yes' if r.feasible else 'no'}")
    print(f"strongly feasible: {'yes' if r.strongly_feasible else 'no'}")
    if r.worst_line is not None:
        lid, flow, lim = r.worst_line
        print(f"worst_line: {lid} flow {_gw(flow)} GW limit {_gw(lim)} GW")
    if r.strongly_feasible:
        return EXIT_OK
    return EXIT_FEASIBLE_ONLY if r.feasible else EXIT_INFEASIBLE


# -- account -------------------------------------------------------------------

def cmd_account(args) -> int:
    a = CapacityAccount(args.ttc * GW, args.trm * GW, args.ltc * GW, args.aac * GW)
    r = capacity_account(a)
    print(f"ntc: {_gw(r.ntc)} GW")
    print(f"atc: {_gw(r.atc)} GW")
    for w in r.warnings:
        print(f"warning: {w}")
    return EXIT_OK


# -- plot ----------------------------------------------------------------------

PALETTE = ["#e41a1c", "#ffd92f", "#4daf4a", "#377eb8", "#984ea3", "#ff7f00", "#a65628", "#f781bf"]
WIDTH, HEIGHT, MARGIN = 800, 600, 60
LEGEND_W = 160


def _axis_map(dim, coords, axes):
    """2 x dim selection matrix for the chosen axes (names or 0-based indices)."""
    if axes is None:
        if dim != 2:
            raise InputError(f"set has dimension {dim}; choose two axes with --axes")
        return None
    idx = []
    for a in axes:
        if coords and a in coords:
            idx.append(coords.index(a))
        else:
            try:
                idx.append(int(a))
            except ValueError:
                raise InputError(f"unknown axis {a!r}; available: {coords}") from None
    if len(idx) != 2 or not all(0 <= i < dim for i in idx) or idx[0] == idx[1]:
        raise InputError(f"need two distinct axes in 0..{dim - 1}")
    M = np.zeros((2, dim))
    M[0, idx[0]] = M[1, idx[1]] = 1.0
    return M


def _polygon(P: Polyhedron, M) -> np.ndarray:
    if M is not None:
        P = image_exact(P, M)
    param = affine_hull_parametrization(P)
    if param is not None and param[1].shape[1] > 2:
        raise InputError("set is more than 2-dimensional; choose two axes with --axes")
    return vertices_2d(P)


def polygons(obj, coords=None, axes=None) -> list[np.ndarray]:
    """Vertex lists (MW) of the 2-D polygons that draw ``obj``."""
    M = _axis_map(obj.dim, coords, axes)
    if isinstance(obj, ApproxSet):
        return [_polygon(obj.outer, M)]  # the outer bracket
    parts = obj.parts if isinstance(obj, PolyUnion) else [obj]
    return [V for V in (_polygon(P, M) for P in parts) if len(V)]


def render_svg(layers, axis_names=("y1", "y2")) -> str:
    """SVG (800 x 600) of layered polygon lists; ``layers = [(label, [V, ...]), ...]`` in MW."""
    pts = [V for _, polys in layers for V in polys if len(V)]
    allv = np.vstack(pts) / GW if pts else np.zeros((1, 2))
    lo, hi = allv.min(axis=0), allv.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    lo, hi = lo - 0.05 * span, hi + 0.05 * span
    pw, ph = WIDTH - 2 * MARGIN - LEGEND_W, HEIGHT - 2 * MARGIN

    def px(v):
        x = MARGIN + (v[0] - lo[0]) / (hi[0] - lo[0]) * pw
        y = HEIGHT - MARGIN - (v[1] - lo[1]) / (hi[1] - lo[1]) * ph
        return f"{x:.2f},{y:.2f}"

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    for k, (label, polys) in enumerate(layers):
        color = PALETTE[k % len(PALETTE)]
        out.append(f'<g id="layer{k}" fill="{color}" fill-opacity="0.6" stroke="black" stroke-width="1">')
        for V in polys:
            V = np.asarray(V) / GW
            if len(V) >= 3:
                out.append(f'<polygon points="{" ".join(px(v) for v in V)}"/>')
            elif len(V) == 2:
                out.append(f'<polyline points="{px(V[0])} {px(V[1])}" stroke="{color}" stroke-width="3"/>')
            elif len(V) == 1:
                x, y = px(V[0]).split(",")
                out.append(f'<circle cx="{x}" cy="{y}" r="3"/>')
        out.append("</g>")
    # axes and ticks
    x0, y0 = MARGIN, HEIGHT - MARGIN
    out.append(f'<g stroke="black" fill="none"><rect x="{x0}" y="{MARGIN}" width="{pw}" height="{ph}"/></g>')
    out.append('<g font-family="sans-serif" font-size="12" fill="black">')
    for t in np.linspace(0, 1, 5):
        vx = lo[0] + t * (hi[0] - lo[0])
        vy = lo[1] + t * (hi[1] - lo[1])
        out.append(f'<text x="{x0 + t * pw:.2f}" y="{y0 + 18}" text-anchor="middle">{vx:.3f}</text>')
        out.append(f'<text x="{x0 - 6}" y="{y0 - t * ph + 4:.2f}" text-anchor="end">{vy:.3f}</text>')
    out.append(f'<text x="{x0 + pw / 2:.2f}" y="{HEIGHT - 15}" text-anchor="middle">'
               f"{_esc(axis_names[0])} (GW)</text>")
    out.append(f'<text x="15" y="{MARGIN + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 15 {MARGIN + ph / 2:.2f})">{_esc(axis_names[1])} (GW)</text>')
    lx = WIDTH - LEGEND_W - MARGIN / 2 + 20
    for k, (label, _) in enumerate(layers):
        ly = MARGIN + 20 * k
        out.append(f'<rect x="{lx:.2f}" y="{ly}" width="14" height="14" fill="{PALETTE[k % len(PALETTE)]}" '
                   'fill-opacity="0.6" stroke="black"/>')
        out.append(f'<text x="{lx + 20:.2f}" y="{ly + 12}">{_esc(label)}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def cmd_plot(args) -> int:
    axes = args.axes.split(",") if args.axes else None
    layers = []
    names = None
    for path in args.files:
        text = casefmt.read_text(_require(path, "plot input"))
        obj = casefmt.parse_polytope_json(text)
        coords = casefmt.polytope_coords(text)
        layers.append((Path(path).stem, polygons(obj, coords, axes)))
        if names is None:
            names = tuple(axes) if axes else tuple(coords or ("y1", "y2"))[:2]
    out = Path(args.out)
    if out.suffix != ".svg":
        out = out / "plot.svg"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(render_svg(layers, names), encoding="utf-8")
    print(f"wrote {out}")
    return EXIT_OK


# -- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gridhull", description="Zonal transfer-capacity feasible sets.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp_, agg=True):
        sp_.add_argument("--net", help="network (.json or MATPOWER .m/.m.gz)")
        if agg:
            sp_.add_argument("--agg", help="aggregation JSON")
        sp_.add_argument("--seed", type=int, default=42)
        sp_.add_argument("--budget", type=int, default=64)
        sp_.add_argument("--tol-mw", type=float, default=1.0)
        sp_.add_argument("--out", default=".")

    s = sub.add_parser("project", help="images of generator, line and NTC constraints")
    common(s)
    s.add_argument("--ntc", help="NTC spec with bounds (optional)")
    s.add_argument("--method", choices=["exact", "approx"])
    s.set_defaults(func=cmd_project)

    s = sub.add_parser("ntc", help="largest safe NTC bounds along a direction")
    common(s, agg=False)
    s.add_argument("--ntc", help="NTC spec")
    s.add_argument("--weights", help="comma-separated corridor weights")
    s.add_argument("--search", type=int, default=0, help="number of random directions")
    s.add_argument("--bounds", help="comma-separated bounds in GW (overrides the file)")
    s.add_argument("--verify", action="store_true", help="check the given bounds instead")
    s.set_defaults(func=cmd_ntc)

    s = sub.add_parser("strong", help="strongly feasible reduced states")
    common(s)
    s.set_defaults(func=cmd_strong)

    s = sub.add_parser("check", help="classify one reduced state")
    common(s)
    s.add_argument("--y", required=True, help="comma-separated region injections in GW")
    s.add_argument("--eps-mw", type=float, default=1e-6)
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("account", help="NTC/ATC from TTC and margins (GW)")
    s.add_argument("--ttc", type=float, required=True)
    s.add_argument("--trm", type=float, default=0.0)
    s.add_argument("--ltc", type=float, default=0.0)
    s.add_argument("--aac", type=float, default=0.0)
    s.set_defaults(func=cmd_account)

    s = sub.add_parser("plot", help="SVG of 2-D sets from polytope files")
    s.add_argument("files", nargs="+")
    s.add_argument("--axes", help="two axis names or indices, comma-separated")
    s.add_argument("--out", default="plot.svg")
    s.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ParseError, InputError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except (_Empty, NtcDataError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_EMPTY
    except ResourceError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    except GridhullError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
