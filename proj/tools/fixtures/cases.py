"""Fixture case definitions (IEEE-14/30-style plus a synthetic 118-bus grid).

Boundary buses must be PQ in the case itself: the distributed formulation
treats them as PQ during region solves, so a PV boundary bus would make the
distributed and centralized problems differ.
"""


def bus(id, kind, v_mag=1.0, p=0.0, q=0.0, bsh=0.0, name=""):
    return {
        "id": id, "name": name or f"bus{id}", "kind": kind, "base_kv": 132.0,
        "v_mag": v_mag, "v_ang_deg": 0.0, "p_mw": p, "q_mvar": q,
        "v_min": 0.0, "v_max": 2.0, "g_shunt_mw": 0.0, "b_shunt_mvar": bsh,
    }


def br(id, f, t, r, x, b=0.0, tap=1.0, circuit=1):
    return {"id": id, "from": f, "to": t, "r_pu": r, "x_pu": x, "b_pu": b,
            "tap": tap, "p_max_mw": None, "circuit": circuit}


def case2():
    return {
        "name": "two-bus",
        "base_mva": 100.0,
        "buses": [bus(1, "Slack", 1.0), bus(2, "PQ", p=-10.0, q=-5.0)],
        "branches": [br(1, 1, 2, 0.0, 0.1)],
    }


def case14():
    buses = [
        bus(1, "Slack", 1.060),
        bus(2, "PV", 1.045, p=18.3),
        bus(3, "PV", 1.010, p=-94.2),
        bus(4, "PQ", p=-47.8, q=3.9),
        bus(5, "PQ", p=-7.6, q=-1.6),
        bus(6, "PQ", p=-11.2, q=0.0),   # PQ: boundary bus of region 2
        bus(7, "PQ"),
        bus(8, "PV", 1.090, p=0.0),
        bus(9, "PQ", p=-29.5, q=-16.6, bsh=19.0),
        bus(10, "PQ", p=-9.0, q=-5.8),
        bus(11, "PQ", p=-3.5, q=-1.8),
        bus(12, "PQ", p=-6.1, q=-1.6),
        bus(13, "PQ", p=-13.5, q=-5.8),
        bus(14, "PQ", p=-14.9, q=-5.0),
    ]
    branches = [
        br(1, 1, 2, 0.01938, 0.05917, 0.0528),
        br(2, 1, 5, 0.05403, 0.22304, 0.0492),
        br(3, 2, 3, 0.04699, 0.19797, 0.0438),
        br(4, 2, 4, 0.05811, 0.17632, 0.0340),
        br(5, 2, 5, 0.05695, 0.17388, 0.0346),
        br(6, 3, 4, 0.06701, 0.17103, 0.0128),
        br(7, 4, 5, 0.01335, 0.04211, 0.0),
        br(8, 4, 7, 0.0, 0.20912, 0.0, tap=0.978),   # link
        br(9, 4, 9, 0.0, 0.55618, 0.0, tap=0.969),   # link
        br(10, 5, 6, 0.0, 0.25202, 0.0, tap=0.932),  # link
        br(11, 6, 11, 0.09498, 0.19890),
        br(12, 6, 12, 0.12291, 0.25581),
        br(13, 6, 13, 0.06615, 0.13027),
        br(14, 7, 8, 0.0, 0.17615),
        br(15, 7, 9, 0.0, 0.11001),
        br(16, 9, 10, 0.03181, 0.08450),
        br(17, 9, 14, 0.12711, 0.27038),
        br(18, 10, 11, 0.08205, 0.19207),
        br(19, 12, 13, 0.22092, 0.19988),
        br(20, 13, 14, 0.17093, 0.34802),
    ]
    case = {"name": "ieee14-style", "base_mva": 100.0, "buses": buses,
            "branches": branches}
    partition = {
        "regions": {str(i): (1 if i <= 5 else 2) for i in range(1, 15)},
        "links": [8, 9, 10],
        "dominant_slack": 1,
        "region_slacks": {"1": 1, "2": 8},
    }
    return case, partition


def case30():
    buses = [
        bus(1, "Slack", 1.060),
        bus(2, "PV", 1.043, p=18.3),
        bus(3, "PQ", p=-2.4, q=-1.2),
        bus(4, "PQ", p=-7.6, q=-1.6),
        bus(5, "PV", 1.010, p=-94.2),
        bus(6, "PQ"),
        bus(7, "PQ", p=-22.8, q=-10.9),
        bus(8, "PV", 1.010, p=-30.0),
        bus(9, "PQ"),
        bus(10, "PQ", p=-5.8, q=-2.0, bsh=19.0),
        bus(11, "PV", 1.082, p=0.0),
        bus(12, "PQ", p=-11.2, q=-7.5),
        bus(13, "PV", 1.071, p=0.0),
        bus(14, "PQ", p=-6.2, q=-1.6),
        bus(15, "PQ", p=-8.2, q=-2.5),
        bus(16, "PQ", p=-3.5, q=-1.8),
        bus(17, "PQ", p=-9.0, q=-5.8),
        bus(18, "PQ", p=-3.2, q=-0.9),
        bus(19, "PQ", p=-9.5, q=-3.4),
        bus(20, "PQ", p=-2.2, q=-0.7),
        bus(21, "PQ", p=-17.5, q=-11.2),
        bus(22, "PQ"),
        bus(23, "PQ", p=-3.2, q=-1.6),
        bus(24, "PQ", p=-8.7, q=-6.7, bsh=4.3),
        bus(25, "PQ"),
        bus(26, "PQ", p=-3.5, q=-2.3),
        bus(27, "PQ"),
        bus(28, "PQ"),
        bus(29, "PQ", p=-2.4, q=-0.9),
        bus(30, "PQ", p=-10.6, q=-1.9),
    ]
    # corridors 6-10 (link) and 10-21 (internal) are double circuit: two
    # parallel branches with doubled impedance each
    branches = [
        br(1, 1, 2, 0.0192, 0.0575, 0.0528),
        br(2, 1, 3, 0.0452, 0.1652, 0.0408),
        br(3, 2, 4, 0.0570, 0.1737, 0.0368),
        br(4, 3, 4, 0.0132, 0.0379, 0.0084),
        br(5, 2, 5, 0.0472, 0.1983, 0.0418),
        br(6, 2, 6, 0.0581, 0.1763, 0.0374),
        br(7, 4, 6, 0.0119, 0.0414, 0.0090),
        br(8, 5, 7, 0.0460, 0.1160, 0.0204),
        br(9, 6, 7, 0.0267, 0.0820, 0.0170),
        br(10, 6, 8, 0.0120, 0.0420, 0.0090),
        br(11, 6, 9, 0.0, 0.2080, 0.0, tap=0.978),               # link
        br(12, 6, 10, 0.0, 1.1120, 0.0, tap=0.969, circuit=1),   # link
        br(13, 9, 11, 0.0, 0.2080),
        br(14, 9, 10, 0.0, 0.1100),
        br(15, 4, 12, 0.0, 0.2560, 0.0, tap=0.932),              # link
        br(16, 12, 13, 0.0, 0.1400),
        br(17, 12, 14, 0.1231, 0.2559),
        br(18, 12, 15, 0.0662, 0.1304),
        br(19, 12, 16, 0.0945, 0.1987),
        br(20, 14, 15, 0.2210, 0.1997),
        br(21, 16, 17, 0.0524, 0.1923),
        br(22, 15, 18, 0.1073, 0.2185),
        br(23, 18, 19, 0.0639, 0.1292),
        br(24, 19, 20, 0.0340, 0.0680),
        br(25, 10, 20, 0.0936, 0.2090),
        br(26, 10, 17, 0.0324, 0.0845),
        br(27, 10, 21, 0.0696, 0.1498, circuit=1),
        br(28, 10, 22, 0.0727, 0.1499),
        br(29, 21, 22, 0.0116, 0.0236),
        br(30, 15, 23, 0.1000, 0.2020),
        br(31, 22, 24, 0.1150, 0.1790),
        br(32, 23, 24, 0.1320, 0.2700),
        br(33, 24, 25, 0.1885, 0.3292),
        br(34, 25, 26, 0.2544, 0.3800),
        br(35, 25, 27, 0.1093, 0.2087),
        br(36, 28, 27, 0.0, 0.3960, 0.0, tap=0.968),             # link
        br(37, 27, 29, 0.2198, 0.4153),
        br(38, 27, 30, 0.3202, 0.6027),
        br(39, 29, 30, 0.2399, 0.4533),
        br(40, 8, 28, 0.0636, 0.2000, 0.0428),
        br(41, 6, 28, 0.0169, 0.0599, 0.0130),
        br(42, 6, 10, 0.0, 1.1120, 0.0, tap=0.969, circuit=2),   # link
        br(43, 10, 21, 0.0696, 0.1498, circuit=2),
    ]
    region1 = {1, 2, 3, 4, 5, 6, 7, 8, 28}
    case = {"name": "ieee30-style", "base_mva": 100.0, "buses": buses,
            "branches": branches}
    partition = {
        "regions": {str(i): (1 if i in region1 else 2) for i in range(1, 31)},
        "links": [11, 12, 15, 36, 42],
        "dominant_slack": 1,
        "region_slacks": {"1": 1, "2": 13},
    }
    return case, partition


def case118():
    pv = {10, 25, 40, 52, 70, 85, 100, 112}
    buses = []
    for i in range(1, 119):
        load_p = 8.0 + (i % 7)
        load_q = 2.0 + (i % 5)
        if i == 1:
            buses.append(bus(1, "Slack", 1.05))
        elif i in pv:
            buses.append(bus(i, "PV", 1.03, p=150.0 - load_p))
        else:
            buses.append(bus(i, "PQ", p=-load_p, q=-load_q))

    branches = []
    bid = 0
    seen = set()

    def add(f, t, r, x, b):
        nonlocal bid
        bid += 1
        assert (f, t) not in seen and (t, f) not in seen, (f, t)
        seen.add((f, t))
        branches.append(br(bid, f, t, r, x, b))

    for i in range(1, 118):
        add(i, i + 1, 0.01, 0.04, 0.02)          # ring path; 59-60 is a link
    add(2, 118, 0.01, 0.05, 0.02)                # link
    add(50, 69, 0.01, 0.05, 0.02)                # link
    add(55, 64, 0.01, 0.05, 0.02)                # link
    chords = (
        [(i, i + 9) for i in (2, 13, 24, 35, 46)]
        + [(i, i + 6) for i in (2, 7, 12, 17, 22, 27, 32, 37, 42, 47, 52)]
        + [(i, i + 3) for i in (3, 9, 15, 21, 27, 33, 39, 45, 51, 56)]
        + [(i, i + 12) for i in (4, 16, 28, 40)]
        + [(i, i + 9) for i in (62, 73, 84, 95, 106)]
        + [(i, i + 6) for i in (61, 66, 71, 76, 81, 86, 91, 96, 101, 106, 111)]
        + [(i, i + 3) for i in (63, 69, 75, 81, 87, 93, 99, 105, 111, 115)]
        + [(i, i + 12) for i in (61, 76, 91, 103)]
    )
    for f, t in chords:
        assert (f <= 59) == (t <= 59), (f, t)    # chords never cross regions
        add(f, t, 0.02, 0.08, 0.01)

    case = {"name": "ring118", "base_mva": 100.0, "buses": buses,
            "branches": branches}
    partition = {
        "regions": {str(i): (1 if i <= 59 else 2) for i in range(1, 119)},
        "links": [59, 118, 119, 120],
        "dominant_slack": 1,
        "region_slacks": {"1": 1, "2": 85},
    }
    return case, partition
