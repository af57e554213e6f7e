"""Brute-force reference for knowledge-graph construction.

Plain Python loops over every candidate threshold; shares no code with the
package's vectorized implementation.
"""

from itertools import combinations


def tally(houses, objects, regions):
    count = {(o, r): 0 for o in objects for r in regions}
    for rooms in houses:
        for region, names in rooms:
            for n in names:
                count[(n, region)] += 1
    rel = {}
    for r in regions:
        peak = max(count[(o, r)] for o in objects)
        for o in objects:
            rel[(o, r)] = count[(o, r)] / peak if peak else 0.0
    return count, rel


def _max_threshold(candidates, edges_at, nodes):
    start = edges_at(min(candidates))
    constrained = {v for v in nodes if any(v in e for e in edges_at(0.0))}
    for t in sorted(candidates, reverse=True):
        e = edges_at(t)
        if all(any(v in pair for pair in e) for v in constrained):
            return t, e
    return min(candidates), start


def oracle(houses, objects, regions):
    count, rel = tally(houses, objects, regions)

    def oo_at(t):
        out = set()
        for a, b in combinations(objects, 2):
            for r in regions:
                if count[(a, r)] > 0 and count[(b, r)] > 0 and rel[(a, r)] >= t and rel[(b, r)] >= t:
                    out.add(frozenset((a, b)))
                    break
        return out

    values = {rel[k] for k in rel if count[k] > 0} | {0.0}
    theta_oo, oo = _max_threshold(values, oo_at, objects)
    if not oo:
        theta_oo = 0.0

    orr = set()
    for o in objects:
        for r in regions:
            if any(o in e and count[(next(iter(e - {o})), r)] > 0 for e in oo):
                orr.add((o, r))

    if not oo:
        return oo, theta_oo, orr, set(), 0.0
    w = {}
    for r1, r2 in combinations(regions, 2):
        full = 0
        for e in oo:
            a, b = tuple(e)
            if all(count[(x, r)] > 0 for x in (a, b) for r in (r1, r2)):
                full += 1
        w[frozenset((r1, r2))] = full / len(oo)
    positive = {v for v in w.values() if v > 0}
    if not positive:
        return oo, theta_oo, orr, set(), 0.0

    def rr_at(t):
        return {k for k, v in w.items() if v > 0 and v >= t}

    theta_rr, rr = _max_threshold(positive, rr_at, regions)
    return oo, theta_oo, orr, rr, theta_rr
