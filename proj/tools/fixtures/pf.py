"""Independent power-flow reference implementation used to build fixtures.

Kept deliberately separate from the C++ engine: same physics (pi-model,
tap on the from side, polar Newton-Raphson) implemented from scratch with
numpy so fixture solutions are an independent oracle.
"""

import math

import numpy as np

PQ, PV, SLACK = "PQ", "PV", "Slack"


class Case:
    def __init__(self, name, base_mva, buses, branches):
        # buses: dict id -> {kind, v_mag, v_ang, p, q, gs, bs, ...} (per-unit)
        self.name = name
        self.base_mva = base_mva
        self.buses = buses
        self.branches = branches  # list of dicts id, f, t, r, x, b, tap, circuit

    def bus_ids(self):
        return sorted(self.buses)


def case_from_json(doc):
    base = doc["base_mva"]
    buses = {}
    for jb in doc["buses"]:
        buses[jb["id"]] = dict(
            kind=jb["kind"],
            v_mag=jb.get("v_mag", 1.0),
            v_ang=math.radians(jb.get("v_ang_deg", 0.0)),
            p=jb.get("p_mw", 0.0) / base,
            q=jb.get("q_mvar", 0.0) / base,
            gs=jb.get("g_shunt_mw", 0.0) / base,
            bs=jb.get("b_shunt_mvar", 0.0) / base,
        )
    branches = [
        dict(
            id=jb["id"], f=jb["from"], t=jb["to"], r=jb.get("r_pu", 0.0),
            x=jb["x_pu"], b=jb.get("b_pu", 0.0), tap=jb.get("tap", 1.0) or 1.0,
            circuit=jb.get("circuit", 1),
        )
        for jb in doc["branches"]
    ]
    return Case(doc.get("name", ""), base, buses, branches)


def ybus(case, skip_branch=None):
    ids = case.bus_ids()
    idx = {b: i for i, b in enumerate(ids)}
    n = len(ids)
    Y = np.zeros((n, n), dtype=complex)
    for br in case.branches:
        if skip_branch is not None and br["id"] == skip_branch:
            continue
        y = 1.0 / complex(br["r"], br["x"])
        ysh = 1j * br["b"] / 2.0
        t = br["tap"]
        f, k = idx[br["f"]], idx[br["t"]]
        Y[f, f] += (y + ysh) / (t * t)
        Y[f, k] += -y / t
        Y[k, f] += -y / t
        Y[k, k] += y + ysh
    for b, d in case.buses.items():
        Y[idx[b], idx[b]] += complex(d["gs"], d["bs"])
    return Y, ids, idx


def connected_without(case, skip_branch):
    """Bus ids unreachable from the slack when skip_branch is outaged."""
    adj = {b: set() for b in case.buses}
    for br in case.branches:
        if br["id"] == skip_branch:
            continue
        adj[br["f"]].add(br["t"])
        adj[br["t"]].add(br["f"])
    slack = next(b for b, d in case.buses.items() if d["kind"] == SLACK)
    seen = {slack}
    stack = [slack]
    while stack:
        for v in adj[stack.pop()]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return [b for b in case.buses if b not in seen]


def solve(case, skip_branch=None, tol=1e-10, max_iter=40):
    Y, ids, idx = ybus(case, skip_branch)
    n = len(ids)
    kinds = [case.buses[b]["kind"] for b in ids]
    v = np.array([1.0 if k == PQ else case.buses[b]["v_mag"] for b, k in zip(ids, kinds)])
    th = np.array([case.buses[b]["v_ang"] if k == SLACK else 0.0
                   for b, k in zip(ids, kinds)])
    psched = np.array([case.buses[b]["p"] for b in ids])
    qsched = np.array([case.buses[b]["q"] for b in ids])

    ang_pos = [i for i in range(n) if kinds[i] != SLACK]
    mag_pos = [i for i in range(n) if kinds[i] == PQ]

    for it in range(max_iter + 1):
        U = v * np.exp(1j * th)
        S = U * np.conj(Y @ U)
        dp = psched - S.real
        dq = qsched - S.imag
        mism = np.concatenate([dp[ang_pos], dq[mag_pos]])
        if np.max(np.abs(mism)) <= tol:
            return dict(converged=True, ids=ids, v=v.copy(), th=th.copy(),
                        iterations=it, Y=Y, idx=idx)
        if it == max_iter:
            return dict(converged=False, ids=ids, v=v.copy(), th=th.copy(),
                        iterations=it, Y=Y, idx=idx)
        J = jacobian(Y, v, th, S, ang_pos, mag_pos)
        dx = np.linalg.solve(J, mism)
        na = len(ang_pos)
        th[ang_pos] += dx[:na]
        v[mag_pos] += dx[na:]


def jacobian(Y, v, th, S, ang_pos, mag_pos):
    n = len(v)
    na, nm = len(ang_pos), len(mag_pos)
    apos = {b: i for i, b in enumerate(ang_pos)}
    mpos = {b: i for i, b in enumerate(mag_pos)}
    J = np.zeros((na + nm, na + nm))
    G, B = Y.real, Y.imag
    for i in range(n):
        for j in range(n):
            if Y[i, j] == 0 and i != j:
                continue
            if i == j:
                dPdt = -S.imag[i] - B[i, i] * v[i] ** 2
                dPdv = S.real[i] / v[i] + G[i, i] * v[i]
                dQdt = S.real[i] - G[i, i] * v[i] ** 2
                dQdv = S.imag[i] / v[i] - B[i, i] * v[i]
            else:
                d = th[i] - th[j]
                c, s = math.cos(d), math.sin(d)
                dPdt = v[i] * v[j] * (G[i, j] * s - B[i, j] * c)
                dPdv = v[i] * (G[i, j] * c + B[i, j] * s)
                dQdt = -v[i] * v[j] * (G[i, j] * c + B[i, j] * s)
                dQdv = v[i] * (G[i, j] * s - B[i, j] * c)
            if i in apos and j in apos:
                J[apos[i], apos[j]] += dPdt
            if i in apos and j in mpos:
                J[apos[i], na + mpos[j]] += dPdv
            if i in mpos and j in apos:
                J[na + mpos[i], apos[j]] += dQdt
            if i in mpos and j in mpos:
                J[na + mpos[i], na + mpos[j]] += dQdv
    return J


def branch_flows(case, sol, skip_branch=None):
    """Per branch id: (P_from, P_to) in per-unit at the solved state."""
    idx = sol["idx"]
    U = sol["v"] * np.exp(1j * sol["th"])
    flows = {}
    for br in case.branches:
        if skip_branch is not None and br["id"] == skip_branch:
            continue
        y = 1.0 / complex(br["r"], br["x"])
        ysh = 1j * br["b"] / 2.0
        t = br["tap"]
        uf, ut = U[idx[br["f"]]], U[idx[br["t"]]]
        i_f = (y + ysh) / (t * t) * uf + (-y / t) * ut
        i_t = (-y / t) * uf + (y + ysh) * ut
        flows[br["id"]] = ((uf * np.conj(i_f)).real, (ut * np.conj(i_t)).real)
    return flows
