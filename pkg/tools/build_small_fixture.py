"""Regenerate the bundled 38-station / 64-Skyway fixture.

Topology is fixed by hand; coordinates come from a least-squares layout that
honours the known Skyway lengths and bearings, the first itinerary's
per-segment times at 82.8 km/h and the two itinerary totals.

    python tools/build_small_fixture.py src/daas/data
"""
import math
import sys
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

# id, source, destination, distance, bearing
KNOWN_SKYWAYS = [
    (1, "F", "DS_30", 8.19, 6),
    (2, "DS_30", "DS_31", 8.03, 2),
    (3, "DS_32", "DS_33", 11.20, 42),
    (4, "DS_13", "DS_16", 10.57, 170),
    (5, "A", "DS_20", 18.92, 224),
    (6, "DS_27", "DS_29", 14.21, 242),
    (7, "DS_32", "DS_38", 16.21, 96),
    (8, "DS_24", "DS_25", 9.93, 268),
    (9, "DS_15", "DS_16", 3.69, 71),
    (10, "DS_11", "DS_12", 9.05, 233),
]
ITIN_1 = "E DS_36 DS_37 DS_38 DS_32 DS_31 DS_27 DS_29 DS_26 DS_25 DS_24 DS_13 DS_16 DS_17 C DS_20 A".split()
ITIN_2 = "E DS_28 DS_30 DS_29 F DS_26 DS_25 D DS_24 DS_13 DS_12 B DS_11 DS_10 DS_9 A".split()
ITIN_1_TOTAL, ITIN_2_TOTAL = 169.19, 158.31
# first movements of itinerary 1: minutes flown at 82.8 km/h
ITIN_1_MINUTES = [2.75, 2.2667, 4.6, 11.75, 6.0, 13.2, 10.3]
CHORDS = [("A", "C"), ("A", "B"), ("B", "D"), ("D", "C")]
EXTRA = [
    ("DS_13", "DS_14"), ("DS_14", "DS_15"), ("C", "DS_9"), ("DS_18", "DS_19"),
    ("DS_19", "H"), ("H", "DS_16"), ("DS_20", "DS_21"), ("DS_21", "DS_22"),
    ("DS_22", "DS_23"), ("DS_33", "DS_34"), ("DS_34", "DS_35"), ("DS_31", "DS_34"),
    ("DS_36", "DS_28"), ("DS_37", "DS_34"), ("DS_10", "DS_25"), ("DS_9", "DS_21"),
    ("DS_10", "DS_23"), ("DS_27", "DS_30"), ("D", "DS_26"), ("DS_19", "DS_15"),
    ("DS_12", "DS_14"), ("DS_31", "DS_33"), ("H", "DS_18"), ("DS_18", "DS_20"),
    ("G", "DS_33"), ("G", "DS_34"),
]
MAJORS = {"A", "C", "E", "G", "H"}
STATIONS = list("ABCDEFGH") + [f"DS_{i}" for i in range(9, 39)]
ORIGIN = (-37.85, 145.05)
KM_PER_DEG = 6371.0088 * math.pi / 180


def edge_list():
    edges = [(r[1], r[2]) for r in KNOWN_SKYWAYS]
    seen = {frozenset(e) for e in edges}
    for path in (ITIN_1, ITIN_2):
        for a, b in zip(path, path[1:]):
            if frozenset((a, b)) not in seen:
                edges.append((a, b))
                seen.add(frozenset((a, b)))
    for e in CHORDS + EXTRA:
        assert frozenset(e) not in seen, e
        edges.append(e)
        seen.add(frozenset(e))
    return edges


def layout(edges, seed=3):
    idx = {s: i for i, s in enumerate(STATIONS)}
    n = len(STATIONS)
    table = {frozenset((r[1], r[2])): r for r in KNOWN_SKYWAYS}
    timed = {frozenset((a, b)): m * 82.8 / 60 for (a, b), m in zip(zip(ITIN_1, ITIN_1[1:]), ITIN_1_MINUTES)}
    adjacent = {frozenset(e) for e in edges}

    def residuals(z):
        p = z.reshape(n, 2)
        res = []
        for a, b in edges:
            d = p[idx[b]] - p[idx[a]]
            key = frozenset((a, b))
            if key in table:
                _, src, dst, dist, brg = table[key]
                d = p[idx[dst]] - p[idx[src]]
                want = dist * np.array([math.sin(math.radians(brg)), math.cos(math.radians(brg))])
                res.extend(5.0 * (d - want))
            elif key in timed:
                res.append(5.0 * (np.hypot(*d) - timed[key]))
            else:
                target = 13.0 if (a, b) in CHORDS else 9.5
                res.append(0.4 * (np.hypot(*d) - target))
        for path, total in ((ITIN_1, ITIN_1_TOTAL), (ITIN_2, ITIN_2_TOTAL)):
            length = sum(np.hypot(*(p[idx[b]] - p[idx[a]])) for a, b in zip(path, path[1:]))
            res.append(2.0 * (length - total))
        for i in range(n):
            for j in range(i + 1, n):
                if frozenset((STATIONS[i], STATIONS[j])) in adjacent:
                    continue
                gap = np.hypot(*(p[i] - p[j]))
                res.append(2.0 * max(0.0, 6.0 - gap))
        return np.array(res)

    rng = np.random.default_rng(seed)
    best = None
    for _ in range(8):
        z0 = rng.uniform(-40, 40, 2 * n)
        sol = least_squares(residuals, z0, max_nfev=1500, x_scale=10.0)
        if best is None or sol.cost < best.cost:
            best = sol
    print(f"layout cost {best.cost:.3f}")
    xy = best.x.reshape(n, 2)
    return xy - xy.mean(axis=0)


def main(out_dir):
    sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
    from daas.geo import bearing_arrays, haversine_arrays

    edges = edge_list()
    assert len(edges) == 64, len(edges)
    xy = layout(edges)
    lat0, lon0 = ORIGIN
    coords = {}
    for s, (x, y) in zip(STATIONS, xy):
        coords[s] = (round(lat0 + y / KM_PER_DEG, 6), round(lon0 + x / (KM_PER_DEG * math.cos(math.radians(lat0))), 6))

    table = {(r[1], r[2]): r for r in KNOWN_SKYWAYS}
    rows = []
    for k, (a, b) in enumerate(edges, start=1):
        la, oa = coords[a]
        lb, ob = coords[b]
        if (a, b) in table:
            _, _, _, dist, brg = table[(a, b)]
        else:
            dist = round(float(haversine_arrays(la, oa, lb, ob)), 2)
            brg = int(round(float(bearing_arrays(la, oa, lb, ob)))) % 360
        rows.append([k, a, b, dist, brg])

    # pin the itinerary totals by nudging one free segment of each
    by_pair = {frozenset((r[1], r[2])): r for r in rows}
    fixed = {frozenset((r[1], r[2])) for r in KNOWN_SKYWAYS}
    fixed |= {frozenset(e) for e in zip(ITIN_1, ITIN_1[1:8])}
    for path, total in ((ITIN_1, ITIN_1_TOTAL), (ITIN_2, ITIN_2_TOTAL)):
        segs = [frozenset(e) for e in zip(path, path[1:])]
        cur = sum(by_pair[s][3] for s in segs)
        free = [s for s in segs if s not in fixed]
        scale = 1 + (total - cur) / sum(by_pair[s][3] for s in free)
        for s in free:
            by_pair[s][3] = round(by_pair[s][3] * scale, 2)
        # absorb the rounding remainder in the longest free segment
        pick = max(free, key=lambda s: by_pair[s][3])
        by_pair[pick][3] = round(by_pair[pick][3] + total - sum(by_pair[s][3] for s in segs), 2)
        fixed |= set(segs)
        print(f"itinerary total {cur:.2f} -> {sum(by_pair[s][3] for s in segs):.2f}")

    out = Path(out_dir)
    with open(out / "small_stations.csv", "w") as fh:
        fh.write("id,lat,lon,is_major\n")
        for s in STATIONS:
            fh.write(f"{s},{coords[s][0]},{coords[s][1]},{int(s in MAJORS)}\n")
    with open(out / "small_skyways.csv", "w") as fh:
        fh.write("id,source,destination,distance_km,compass_bearing\n")
        for k, a, b, dist, brg in rows:
            fh.write(f"{k},{a},{b},{dist:.2f},{brg}\n")
        
    report = []
    for k, a, b, dist, brg in rows:
        g = float(haversine_arrays(*coords[a], *coords[b]))
        gb = float(bearing_arrays(*coords[a], *coords[b]))
        report.append((abs(dist - g) / g, k, a, b, dist, round(g, 2), brg, round(gb)))
    for item in sorted(report, reverse=True)[:8]:
        print("mismatch %.3f  #%d %s-%s stored %.2f geo %.2f brg %s/%s" % item)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "src/daas/data")
