"""Generates the shipped fixtures.

For the IEEE-14/30-style cases this script also curates branch flow limits:
one monitored branch per region whose limit is exceeded only by outages in
that region's first screening group. That construction makes the stopped
sweep's cumulative violation set provably equal to the exhaustive N-1 set,
and reproduces the violation / none / none+stop row pattern.
"""

import json
import math
import os
import sys

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import cases
import pf
import screening

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "..", "fixtures")


def solve_all_outages(case, regions, region_of, links):
    base = pf.solve(case)
    assert base["converged"], "base case did not converge"
    sols = {None: base}
    skipped = []
    for brc in case.branches:
        bid = brc["id"]
        if screening.islands(case, regions, region_of, links, bid):
            skipped.append(bid)
            continue
        sol = pf.solve(case, skip_branch=bid)
        assert sol["converged"], f"outage {bid} did not converge"
        sols[bid] = sol
    return sols, skipped


def flow_table(case, sols):
    # flows[e][o] = max(|P_from|, |P_to|) of branch e under outage o
    flows = {brc["id"]: {} for brc in case.branches}
    for o, sol in sols.items():
        for e, (pfm, pto) in pf.branch_flows(case, sol, skip_branch=o).items():
            flows[e][o] = max(abs(pfm), abs(pto))
    return flows


def curate_limits(case, doc, partition):
    regions, region_of, links = screening.region_partition(case, partition)
    groups_by_region = {}
    for r in regions:
        _, groups = screening.rank_and_group(case, regions[r])
        for g in groups:
            g["region"] = r
        groups_by_region[r] = groups

    sols, skipped = solve_all_outages(case, regions, region_of, links)
    flows = flow_table(case, sols)
    all_outages = [o for o in sols if o is not None]

    def branch_region(e):
        if e in links:
            return 0
        brc = next(b for b in case.branches if b["id"] == e)
        return region_of[brc["f"]]

    limits = {}
    for r in sorted(regions):
        picked = None
        for g_idx in range(min(2, len(groups_by_region[r]))):
            members = [m for m in groups_by_region[r][g_idx]["members"]
                       if m not in skipped]
            if not members:
                continue
            best = None
            for e in flows:
                if e in limits:
                    continue
                in_group = [flows[e][o] for o in members if o in flows[e]]
                others = [flows[e][o] for o in all_outages + [None]
                          if o not in members and o in flows[e]]
                if not in_group or not others:
                    continue
                hi, lo = max(in_group), max(others)
                if hi > 1.08 * lo and hi > 0.05:
                    score = hi / max(lo, 1e-9)
                    if best is None or score > best[0]:
                        best = (score, e, hi, lo)
            if best:
                _, e, hi, lo = best
                limit = math.sqrt(hi * lo)
                assert lo < limit < hi
                limits[e] = limit
                picked = (g_idx, e, limit, hi, lo)
                break
        assert picked, f"region {r}: no separable monitored branch found"
        print(f"  region {r}: group {picked[0] + 1} violation on branch "
              f"{picked[1]}  limit {picked[2]:.4f} (peak {picked[3]:.4f}, "
              f"runner-up {picked[4]:.4f})")

    # voltage envelope over base + every outage, wide enough that no voltage
    # violation can occur in either the distributed or centralized solve
    vmin = {b: 2.0 for b in case.buses}
    vmax = {b: 0.0 for b in case.buses}
    for sol in sols.values():
        for b, i in sol["idx"].items():
            vmin[b] = min(vmin[b], sol["v"][i])
            vmax[b] = max(vmax[b], sol["v"][i])

    for jb in doc["buses"]:
        jb["v_min"] = round(vmin[jb["id"]] - 0.03, 4)
        jb["v_max"] = round(vmax[jb["id"]] + 0.03, 4)
    for jb in doc["branches"]:
        if jb["id"] in limits:
            jb["p_max_mw"] = round(limits[jb["id"]] * doc["base_mva"], 2)

    # exhaustive violation set with the curated limits
    exhaustive = set()
    for o in all_outages:
        for e, lim in limits.items():
            if o in flows[e] and flows[e][o] * doc["base_mva"] > \
                    next(j["p_max_mw"] for j in doc["branches"] if j["id"] == e):
                exhaustive.add(("BranchActiveFlow", e, branch_region(e)))

    # simulate the engine's stopped sweep and confirm it finds the same set
    def violations_of_group(r, group):
        found = set()
        for o in group["members"]:
            if o in skipped:
                continue
            for e, lim in limits.items():
                if o in flows[e] and flows[e][o] * doc["base_mva"] > \
                        next(j["p_max_mw"] for j in doc["branches"]
                             if j["id"] == e):
                    found.add(("BranchActiveFlow", e, branch_region(e)))
        return found

    order = screening.sweep_order(groups_by_region)
    rows, cumulative, stopped = screening.simulate_stop(order, violations_of_group)
    for r in regions:
        assert stopped.get(r), f"region {r} never reached its stop marker"
    # link branches run last, unconditionally; they add nothing by construction
    for o in links:
        if o in sols:
            for e in limits:
                assert flows[e][o] * doc["base_mva"] <= \
                    next(j["p_max_mw"] for j in doc["branches"] if j["id"] == e)
    assert cumulative == exhaustive, (cumulative, exhaustive)
    assert exhaustive, "curated fixture found no violations at all"
    print(f"  sweep rows: {rows}")
    print(f"  violation set: {sorted(exhaustive)}")


def reference_solution(case):
    sol = pf.solve(case)
    assert sol["converged"]
    return {
        "buses": {
            str(b): {"v_mag": sol["v"][i], "v_ang_rad": sol["th"][i]}
            for b, i in sol["idx"].items()
        },
        "iterations": sol["iterations"],
    }


def write(path, doc):
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")
    print(f"wrote {path}")


def main():
    os.makedirs(OUT, exist_ok=True)

    write(os.path.join(OUT, "case2.json"), cases.case2())

    for name, builder, curate in (("14", cases.case14, True),
                                  ("30", cases.case30, True),
                                  ("118", cases.case118, False)):
        doc, partition = builder()
        case = pf.case_from_json(doc)
        print(f"case{name}:")
        if curate:
            curate_limits(case, doc, partition)
        else:
            base = pf.solve(case)
            assert base["converged"], "base case did not converge"
            regions, region_of, links = screening.region_partition(case, partition)
            n_island = sum(
                1 for brc in case.branches
                if screening.islands(case, regions, region_of, links, brc["id"]))
            print(f"  {len(case.branches)} branches, {n_island} islanding outages")
        write(os.path.join(OUT, f"case{name}.json"), doc)
        write(os.path.join(OUT, f"partition{name}.json"), partition)
        # reference solution re-solved on the final (limit-annotated) case
        write(os.path.join(OUT, f"solution{name}.json"),
              reference_solution(pf.case_from_json(doc)))


if __name__ == "__main__":
    main()
