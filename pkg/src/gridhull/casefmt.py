"""File formats: MATPOWER-style case files, network/aggregation/NTC JSON,
and polytope output files.

All quantities in files are MW.  Floats are written with Python's shortest
round-trip representation, so parsing a written file restores every number
exactly.
"""

from __future__ import annotations

import gzip
import json
import logging
import math
import re
from pathlib import Path

import jsonschema
import numpy as np

from .capacity import Corridor, NtcSpec
from .errors import InputError, ParseError
from .netmodel import Bus, Line, NetworkModel
from .polytope import PolyUnion, Polyhedron, _dense
from .project import AggregationMap, ApproxSet

logger = logging.getLogger(__name__)

UNRATED_CAP_MW = 99999.0

# MATPOWER column indices (0-based)
_BUS_I, _PD = 0, 2
_GEN_BUS, _GEN_STATUS, _PMAX, _PMIN = 0, 7, 8, 9
_F_BUS, _T_BUS, _BR_X, _RATE_A, _BR_STATUS = 0, 1, 3, 5, 10
_MIN_COLS = {"bus": 13, "gen": 10, "branch": 13}


# -- MATPOWER subset -----------------------------------------------------------

_ASSIGN = re.compile(r"^\s*mpc\.(\w+)\s*=\s*(.*)$")
_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def _strip_comment(line: str) -> str:
    # '%' inside a quoted string does not start a comment
    out, quoted = [], False
    for ch in line:
        if ch == "'":
            quoted = not quoted
        elif ch == "%" and not quoted:
            break
        out.append(ch)
    return "".join(out)


def _parse_number(tok: str, lineno: int) -> float:
    if not _NUMBER.match(tok) and tok.lower() not in ("inf", "-inf", "+inf", "nan"):
        raise ParseError(f"not a number: {tok!r}", line=lineno)
    return float(tok)


def read_matpower_tables(text: str) -> tuple[float, dict]:
    """``(base_mva, {name: (rows, line_numbers)})`` for every numeric matrix."""
    base_mva = None
    tables = {}
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        lineno = i + 1
        body = _strip_comment(lines[i]).strip()
        i += 1
        m = _ASSIGN.match(body)
        if not m:
            continue
        name, rhs = m.group(1), m.group(2).strip()
        if rhs.startswith("["):
            rows, nums = [], []
            rest, row_line = rhs[1:], lineno
            while True:
                closed = "]" in rest
                chunk = rest.split("]", 1)[0]
                pieces = chunk.split(";")
                for k, piece in enumerate(pieces):
                    toks = piece.replace(",", " ").split()
                    if toks:
                        if not rows or rows[-1][1] is not None:
                            rows.append(([], None))
                        rows[-1][0].extend(_parse_number(t, row_line) for t in toks)
                        nums.append(row_line)
                    if k < len(pieces) - 1 and rows and rows[-1][1] is None:
                        rows[-1] = (rows[-1][0], row_line)  # row terminated by ';'
                if closed:
                    break
                if rows and rows[-1][1] is None:
                    rows[-1] = (rows[-1][0], row_line)  # newline also ends a row
                if i >= len(lines):
                    raise ParseError(f"unterminated matrix mpc.{name}", line=lineno)
                rest = _strip_comment(lines[i])
                row_line = i + 1
                i += 1
            if rows and rows[-1][1] is None:
                rows[-1] = (rows[-1][0], row_line)
            tables[name] = ([r for r, _ in rows], [ln for _, ln in rows])
        elif name == "baseMVA":
            val = rhs.rstrip(";").strip()
            base_mva = _parse_number(val, lineno)
        elif rhs.startswith("{"):
            # cell arrays (bus names etc.) are not used; skip to the closing brace
            depth = rhs.count("{") - rhs.count("}")
            while depth > 0 and i < len(lines):
                seg = _strip_comment(lines[i])
                depth += seg.count("{") - seg.count("}")
                i += 1
    if base_mva is None:
        raise ParseError("missing mpc.baseMVA")
    return base_mva, tables


def _table(tables, name):
    if name not in tables:
        raise ParseError(f"missing table mpc.{name}")
    rows, linenos = tables[name]
    if not rows:
        return np.zeros((0, _MIN_COLS[name])), []
    width = len(rows[0])
    for r, ln in zip(rows, linenos):
        if len(r) != width:
            raise ParseError(f"mpc.{name}: row has {len(r)} columns, expected {width}", line=ln)
    if width < _MIN_COLS[name]:
        raise ParseError(f"mpc.{name} needs at least {_MIN_COLS[name]} columns, has {width}", line=linenos[0])
    return np.array(rows, dtype=float), linenos


def parse_matpower(text: str, unrated_cap: float = UNRATED_CAP_MW, name: str = "") -> NetworkModel:
    """Network model from a case file in the ``mpc.<table> = [...]`` dialect.

    Lines get the 1-based row number of their branch-table row as id.
    Branches with ``rateA = 0`` get limit ``unrated_cap`` and are flagged
    ``unrated``.  Generator lower limits are ignored (taken as 0).
    """
    base_mva, tables = read_matpower_tables(text)
    bus, bus_ln = _table(tables, "bus")
    gen, gen_ln = _table(tables, "gen")
    branch, br_ln = _table(tables, "branch")

    ids = bus[:, _BUS_I]
    if np.any(ids != np.round(ids)):
        raise ParseError("non-integer bus id", line=bus_ln[int(np.argmax(ids != np.round(ids)))])
    ids = ids.astype(int)
    index = {}
    for k, (b, ln) in enumerate(zip(ids, bus_ln)):
        if b in index:
            raise ParseError(f"duplicate bus id {b}", line=ln)
        index[b] = k

    gen_max = np.zeros(len(ids))
    n_pmin = 0
    for row, ln in zip(gen, gen_ln):
        b = int(row[_GEN_BUS])
        if b not in index:
            raise ParseError(f"generator at unknown bus {b}", line=ln)
        if row[_GEN_STATUS] <= 0:
            continue
        gen_max[index[b]] += row[_PMAX]
        n_pmin += row[_PMIN] > 0
    if n_pmin:
        logger.warning("%d generators have Pmin > 0; lower limits are taken as 0", n_pmin)
    neg = gen_max < 0
    if np.any(neg):
        logger.warning("%d buses have negative total Pmax; set to 0", int(neg.sum()))
        gen_max[neg] = 0.0

    buses = [Bus(int(b), float(d), float(g)) for b, d, g in zip(ids, bus[:, _PD], gen_max)]
    lines = []
    n_unrated = 0
    for k, (row, ln) in enumerate(zip(branch, br_ln), start=1):
        if row[_BR_STATUS] <= 0:
            continue
        f, t = int(row[_F_BUS]), int(row[_T_BUS])
        for b in (f, t):
            if b not in index:
                raise ParseError(f"branch references unknown bus {b}", line=ln)
        x = row[_BR_X]
        if x == 0:
            raise ParseError("branch has zero reactance", line=ln)
        rate = row[_RATE_A]
        unrated = rate <= 0
        n_unrated += unrated
        try:
            lines.append(Line(k, f, t, 1.0 / x, unrated_cap if unrated else float(rate), bool(unrated)))
        except InputError as e:
            raise ParseError(str(e), line=ln) from None
    if n_unrated:
        logger.info("%d branches without rating capped at %g MW", n_unrated, unrated_cap)
    return NetworkModel(float(base_mva), buses, lines, name)


# -- JSON formats ---------------------------------------------------------------

_NUM = {"type": "number"}
_INT = {"type": "integer"}

NETWORK_SCHEMA = {
    "type": "object",
    "required": ["base_mva", "buses", "lines"],
    "properties": {
        "name": {"type": "string"},
        "base_mva": {"type": "number", "exclusiveMinimum": 0},
        "buses": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "demand_mw", "gen_max_mw"],
                "properties": {"id": _INT, "demand_mw": _NUM, "gen_max_mw": {"type": "number", "minimum": 0}},
                "additionalProperties": False,
            },
        },
        "lines": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "from", "to", "susceptance_pu", "limit_mw"],
                "properties": {
                    "id": _INT,
                    "from": _INT,
                    "to": _INT,
                    "susceptance_pu": _NUM,
                    "limit_mw": {"type": "number", "exclusiveMinimum": 0},
                    "unrated": {"type": "boolean"},
                },
                "additionalProperties": False,
            },
        },
    },
}

AGGREGATION_SCHEMA = {
    "type": "object",
    "required": ["regions"],
    "properties": {
        "regions": {"type": "object", "additionalProperties": {"type": "array", "items": _INT}},
        "note": {"type": "string"},
    },
}

NTC_SCHEMA = {
    "type": "object",
    "required": ["corridors"],
    "properties": {
        "corridors": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "lines"],
                "properties": {
                    "name": {"type": "string"},
                    "lines": {
                        "type": "array",
                        "minItems": 1,
                        "items": {"type": "array", "prefixItems": [_INT, {"enum": [1, -1]}],
                                  "items": [_INT, {"enum": [1, -1]}], "minItems": 2, "maxItems": 2},
                    },
                },
            },
        },
        "bounds": {"type": "array", "items": _NUM},
        "direction": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "weights": {"type": "array", "items": _NUM},
        "note": {"type": "string"},
    },
}

_MATRIX = {"type": "array", "items": {"type": "array", "items": _NUM}}
POLYHEDRON_SCHEMA = {
    "type": "object",
    "required": ["dim", "ineq", "eq"],
    "properties": {
        "dim": {"type": "integer", "minimum": 0},
        "ineq": {"type": "object", "required": ["A", "b"], "properties": {"A": _MATRIX, "b": {"type": "array"}}},
        "eq": {"type": "object", "required": ["E", "f"], "properties": {"E": _MATRIX, "f": {"type": "array"}}},
        "coords": {"type": "array", "items": {"type": "string"}},
    },
}


def _json_path(err) -> str:
    path = "$"
    for p in err.absolute_path:
        path += f"[{p}]" if isinstance(p, int) else f".{p}"
    return path


def _load_json(text: str, schema: dict, what: str):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON in {what}: {e.msg}", line=e.lineno) from None
    err = jsonschema.exceptions.best_match(jsonschema.Draft202012Validator(schema).iter_errors(data))
    if err is not None:
        raise ParseError(f"{what}: {err.message}", path=_json_path(err))
    return data


def parse_network_json(text: str) -> NetworkModel:
    d = _load_json(text, NETWORK_SCHEMA, "network")
    try:
        buses = [Bus(b["id"], float(b["demand_mw"]), float(b["gen_max_mw"])) for b in d["buses"]]
        lines = [
            Line(l["id"], l["from"], l["to"], float(l["susceptance_pu"]), float(l["limit_mw"]),
                 bool(l.get("unrated", False)))
            for l in d["lines"]
        ]
        return NetworkModel(float(d["base_mva"]), buses, lines, d.get("name", ""))
    except InputError as e:
        raise ParseError(str(e), path="$") from None


def write_network_json(net: NetworkModel) -> str:
    lines = []
    for l in net.lines:
        rec = {"id": l.id, "from": l.from_bus, "to": l.to_bus, "susceptance_pu": l.susceptance, "limit_mw": l.limit}
        if l.unrated:
            rec["unrated"] = True
        lines.append(rec)
    d = {
        "name": net.name,
        "base_mva": net.base_mva,
        "buses": [{"id": b.id, "demand_mw": b.demand, "gen_max_mw": b.gen_max} for b in net.buses],
        "lines": lines,
    }
    return json.dumps(d, indent=1) + "\n"


def parse_aggregation(text: str, net: NetworkModel, strict: bool = True) -> AggregationMap:
    """Region partition of the buses of ``net`` (region order = file order).

    With ``strict`` the map must reduce the system (fewer regions than buses).
    """
    d = _load_json(text, AGGREGATION_SCHEMA, "aggregation")
    regions = d["regions"]
    names = list(regions)
    seen = {}
    doubles, unknown, empty = set(), set(), []
    groups = []
    for name in names:
        ids = regions[name]
        if not ids:
            empty.append(name)
        g = []
        for b in ids:
            if b not in net.bus_index:
                unknown.add(b)
                continue
            if b in seen:
                doubles.add(b)
            seen[b] = name
            g.append(net.bus_index[b])
        groups.append(g)
    missing = [b.id for b in net.buses if b.id not in seen]
    problems = []
    if empty:
        problems.append(f"empty regions: {empty}")
    if unknown:
        problems.append(f"unknown buses: {sorted(unknown)[:20]}")
    if doubles:
        problems.append(f"buses in more than one region: {sorted(doubles)[:20]}")
    if missing:
        problems.append(f"unassigned buses ({len(missing)}): {missing[:20]}")
    if problems:
        raise ParseError("; ".join(problems), path="$.regions")
    if strict and len(names) >= net.n_bus:
        raise ParseError(f"aggregation must have fewer regions than buses ({len(names)} >= {net.n_bus})",
                         path="$.regions")
    region_of = [0] * net.n_bus
    for j, g in enumerate(groups):
        for i in g:
            region_of[i] = j
    return AggregationMap(net.n_bus, region_of, len(names), tuple(names))


def write_aggregation(agg: AggregationMap, net: NetworkModel) -> str:
    regions = {name: [net.buses[i].id for i in g] for name, g in zip(agg.names, agg.groups())}
    return json.dumps({"regions": regions}, indent=1) + "\n"


def parse_ntc(text: str) -> NtcSpec:
    d = _load_json(text, NTC_SCHEMA, "NTC spec")
    corridors = [Corridor(c["name"], tuple(tuple(t) for t in c["lines"])) for c in d["corridors"]]
    try:
        return NtcSpec(corridors, d.get("bounds"), d.get("direction"), d.get("weights"))
    except InputError as e:
        raise ParseError(str(e), path="$") from None


def write_ntc(spec: NtcSpec) -> str:
    d = {"corridors": [{"name": c.name, "lines": [list(t) for t in c.terms]} for c in spec.corridors]}
    for key in ("bounds", "direction", "weights"):
        v = getattr(spec, key)
        if v is not None:
            d[key] = [float(x) for x in v]
    return json.dumps(d, indent=1) + "\n"


# -- polytope files -------------------------------------------------------------

def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _poly_dict(P: Polyhedron, coords=None) -> dict:
    d = {
        "type": "polyhedron",
        "dim": P.dim,
        "ineq": {"A": _dense(P.A).tolist(), "b": P.b.tolist()},
        "eq": {"E": _dense(P.E).tolist(), "f": P.f.tolist()},
    }
    if coords:
        d["coords"] = list(coords)
    return d


def _poly_from(d: dict, where: str) -> Polyhedron:
    err = jsonschema.exceptions.best_match(jsonschema.Draft202012Validator(POLYHEDRON_SCHEMA).iter_errors(d))
    if err is not None:
        raise ParseError(err.message, path=where + _json_path(err)[1:])
    dim = d["dim"]
    A = np.array(d["ineq"]["A"], dtype=float).reshape(-1, dim)
    E = np.array(d["eq"]["E"], dtype=float).reshape(-1, dim)
    try:
        return Polyhedron(A, d["ineq"]["b"], E, d["eq"]["f"], dim=dim)
    except InputError as e:
        raise ParseError(str(e), path=where) from None


def to_jsonable(obj, coords=None) -> dict:
    if isinstance(obj, Polyhedron):
        return _poly_dict(obj, coords)
    if isinstance(obj, PolyUnion):
        d = {
            "type": "union",
            "dim": obj.dim,
            "empty": obj.is_empty,
            "disjoint_interiors": obj.disjoint_interiors,
            "parts": [_poly_dict(p) for p in obj.parts],
        }
        if coords:
            d["coords"] = list(coords)
        return d
    if isinstance(obj, ApproxSet):
        d = {
            "type": "approx",
            "dim": obj.dim,
            "gap": _num(obj.gap),
            "inner_vertices": np.asarray(obj.inner_vertices).tolist(),
            "inner": None if obj.inner is None else _poly_dict(obj.inner),
            "outer": _poly_dict(obj.outer),
            "directions": None if obj.directions is None else np.asarray(obj.directions).tolist(),
        }
        if coords:
            d["coords"] = list(coords)
        return d
    raise InputError(f"cannot serialize {type(obj).__name__}")


def write_polytope_json(obj, coords=None) -> str:
    """Serialize a Polyhedron, PolyUnion or ApproxSet (MW)."""
    return json.dumps(to_jsonable(obj, coords), indent=1) + "\n"


def from_jsonable(d):
    kind = d.get("type", "polyhedron") if isinstance(d, dict) else None
    if kind == "polyhedron":
        return _poly_from(d, "$")
    if kind == "union":
        if not isinstance(d.get("parts"), list):
            raise ParseError("union needs a 'parts' list", path="$.parts")
        parts = [_poly_from(p, f"$.parts[{k}]") for k, p in enumerate(d["parts"])]
        return PolyUnion(parts, bool(d.get("disjoint_interiors", False)), dim=d.get("dim"))
    if kind == "approx":
        outer = _poly_from(d["outer"], "$.outer")
        inner = None if d.get("inner") is None else _poly_from(d["inner"], "$.inner")
        V = np.array(d["inner_vertices"], dtype=float).reshape(-1, outer.dim)
        gap = np.inf if d.get("gap") is None else float(d["gap"])
        D = None if d.get("directions") is None else np.array(d["directions"], dtype=float).reshape(-1, outer.dim)
        return ApproxSet(V, outer, inner, gap, D)
    raise ParseError(f"unknown polytope file type {kind!r}", path="$.type")


def parse_polytope_json(text: str):
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", line=e.lineno) from None
    return from_jsonable(d)


def polytope_coords(text: str):
    """The optional ``coords`` (axis names) of a polytope file."""
    d = json.loads(text)
    return d.get("coords") if isinstance(d, dict) else None


# -- file helpers -----------------------------------------------------------------

def read_text(path) -> str:
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "rt", encoding="utf-8") as fh:
            return fh.read()
    return path.read_text(encoding="utf-8")


def load_network(path) -> NetworkModel:
    """Network from a ``.json`` file or a (possibly gzipped) ``.m`` case file."""
    path = Path(path)
    text = read_text(path)
    stem = path.name[:-3] if path.name.endswith(".gz") else path.name
    if stem.endswith(".m"):
        return parse_matpower(text, name=stem[:-2])
    return parse_network_json(text)


def data_file(name: str) -> Path:
    """Path of a bundled fixture (e.g. ``"six_bus.json"``)."""
    return Path(__file__).resolve().parent / "data" / name
