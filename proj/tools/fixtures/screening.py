"""Python replica of the engine's screening and sweep order, used to curate
fixture limits so the stopped sweep provably finds the same violations as an
exhaustive N-1 sweep."""

import numpy as np

import pf


def region_partition(case, partition):
    region_of = {int(b): r for b, r in partition["regions"].items()}
    links = set(partition["links"])
    regions = {}
    for b in case.buses:
        regions.setdefault(region_of[b], {"buses": [], "branches": []})
        regions[region_of[b]]["buses"].append(b)
    boundary = {}
    for brc in case.branches:
        rf, rt = region_of[brc["f"]], region_of[brc["t"]]
        if brc["id"] in links:
            assert rf != rt
            boundary.setdefault(rf, set()).add(brc["f"])
            boundary.setdefault(rt, set()).add(brc["t"])
        else:
            assert rf == rt
            regions[rf]["branches"].append(brc)
    for r in regions:
        regions[r]["buses"].sort()
        regions[r]["boundary"] = sorted(boundary.get(r, set()))
        regions[r]["slack"] = int(partition["region_slacks"][str(r)])
    return regions, region_of, links


def impedance_matrix(case, region):
    ids = region["buses"]
    idx = {b: i for i, b in enumerate(ids)}
    n = len(ids)
    Y = np.zeros((n, n), dtype=complex)
    for brc in region["branches"]:
        y = 1.0 / complex(brc["r"], brc["x"])
        ysh = 1j * brc["b"] / 2.0
        t = brc["tap"]
        f, k = idx[brc["f"]], idx[brc["t"]]
        Y[f, f] += (y + ysh) / (t * t)
        Y[f, k] += -y / t
        Y[k, f] += -y / t
        Y[k, k] += y + ysh
    for b in ids:
        Y[idx[b], idx[b]] += complex(case.buses[b]["gs"], case.buses[b]["bs"])
    keep = [idx[b] for b in ids if b != region["slack"]]
    z = np.linalg.inv(Y[np.ix_(keep, keep)])
    node_ids = [b for b in ids if b != region["slack"]]
    zidx = {b: i for i, b in enumerate(node_ids)}
    return z, zidx


def distance(z, zidx, slack, i, j):
    if i == j:
        return 0.0
    if i == slack:
        return abs(z[zidx[j], zidx[j]])
    if j == slack:
        return abs(z[zidx[i], zidx[i]])
    a, b = zidx[i], zidx[j]
    return abs(z[a, a] + z[b, b] - 2.0 * z[a, b])


def rank_and_group(case, region):
    z, zidx = impedance_matrix(case, region)
    slack = region["slack"]
    entries = []
    for b in region["buses"]:
        d = min(distance(z, zidx, slack, b, j) for j in region["boundary"])
        entries.append((b, d))
    entries.sort(key=lambda e: (e[1], e[0]))
    incident = {}
    for brc in region["branches"]:
        incident.setdefault(brc["f"], []).append(brc["id"])
        incident.setdefault(brc["t"], []).append(brc["id"])
    claimed = set()
    groups = []
    for node, d in entries:
        members = sorted(m for m in incident.get(node, []) if m not in claimed)
        claimed.update(members)
        if members:
            groups.append({"anchor": node, "distance": d, "members": members,
                           "region": None})
    return entries, groups


def islands(case, regions, region_of, links, branch_id):
    """True when the outage disconnects a region internally (engine rule)."""
    if branch_id in links:
        return False
    brc = next(b for b in case.branches if b["id"] == branch_id)
    r = region_of[brc["f"]]
    adj = {b: set() for b in regions[r]["buses"]}
    for b2 in regions[r]["branches"]:
        if b2["id"] == branch_id:
            continue
        adj[b2["f"]].add(b2["t"])
        adj[b2["t"]].add(b2["f"])
    seen = {regions[r]["slack"]}
    stack = [regions[r]["slack"]]
    while stack:
        for v in adj[stack.pop()]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) != len(adj)


def sweep_order(groups_by_region):
    """Round-robin group order over regions ascending, as the engine runs it."""
    order = []
    max_g = max(len(g) for g in groups_by_region.values())
    for k in range(max_g):
        for r in sorted(groups_by_region):
            if k < len(groups_by_region[r]):
                order.append((r, groups_by_region[r][k]))
    return order


def simulate_stop(order, violations_of_group, k_stop=2):
    """Returns per-region processed group counts and the row pattern
    (new_violations, stop) the engine would report."""
    cumulative = set()
    counter = {}
    stopped = {}
    rows = []
    for r, group in order:
        if stopped.get(r):
            continue
        new = 0
        for key in violations_of_group(r, group):
            if key not in cumulative:
                cumulative.add(key)
                new += 1
        counter[r] = 0 if new else counter.get(r, 0) + 1
        stop = counter[r] >= k_stop
        if stop:
            stopped[r] = True
        rows.append((r, group["anchor"], new, stop))
    return rows, cumulative, stopped
