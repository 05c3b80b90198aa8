"""Regenerate the aggregation configs for the 9241-bus case.

Zone 1 of the case file contains the tie nodes through which every
inter-zone branch passes.  Each of its buses is assigned to the nearest
other zone by breadth-first search (ties: smallest zone id), leaving 23
geographic zones.  The 4-region grouping keeps zones 8, 3 and 2 (zone 8
adjoins zones 2 and 3) and merges the rest.  Zone identities are guesses;
the configs are not authoritative.
"""

import collections
import json
import sys
from pathlib import Path

import numpy as np

from gridhull.casefmt import read_matpower_tables, read_text

HERE = Path(__file__).resolve().parent.parent / "tests" / "data"
TIE_ZONE = 1
FOUR = {"z8": [8], "z3": [3], "z2": [2]}


def zone_assignment(path):
    _, t = read_matpower_tables(read_text(path))
    bus = np.array(t["bus"][0])
    br = np.array(t["branch"][0])
    ids = bus[:, 0].astype(int)
    zone = dict(zip(ids, bus[:, 10].astype(int)))
    adj = collections.defaultdict(set)
    for r in br:
        if r[10] > 0:
            a, b = int(r[0]), int(r[1])
            adj[a].add(b)
            adj[b].add(a)
    # multi-source BFS from all non-tie buses, processed in (distance, zone) order
    owner = {b: z for b, z in zone.items() if z != TIE_ZONE}
    frontier = sorted(owner, key=lambda b: (owner[b], b))
    while frontier:
        claims = {}
        for b in frontier:
            for n in sorted(adj[b]):
                if n not in owner and (n not in claims or owner[b] < claims[n]):
                    claims[n] = owner[b]
        owner.update(claims)
        frontier = sorted(claims, key=lambda b: (claims[b], b))
    missing = [b for b in ids if b not in owner]
    if missing:
        sys.exit(f"unreachable tie buses: {missing[:10]}")
    return ids, owner


def main():
    ids, owner = zone_assignment(HERE / "case9241pegase.m.gz")
    zones = sorted(set(owner.values()))
    regions = {f"z{z}": [int(b) for b in ids if owner[b] == z] for z in zones}
    note = "best-effort zone assignment, not authoritative; tie-zone buses merged into nearest zone"
    (HERE / "pegase_zones.json").write_text(json.dumps({"note": note, "regions": regions}) + "\n")
    four = {name: [int(b) for b in ids if owner[b] in zs] for name, zs in FOUR.items()}
    taken = {z for zs in FOUR.values() for z in zs}
    four["rest"] = [int(b) for b in ids if owner[b] not in taken]
    (HERE / "pegase_4regions.json").write_text(json.dumps({"note": note, "regions": four}) + "\n")
    print(len(regions), {k: len(v) for k, v in four.items()})


if __name__ == "__main__":
    main()
