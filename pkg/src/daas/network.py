"""Skyway delivery graph: stations are nodes, Skyways are undirected edges."""
from __future__ import annotations

import csv
import json
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import minimum_spanning_tree
from scipy.spatial import Delaunay

from .errors import (
    DanglingEndpointError,
    DataError,
    DuplicateStationError,
    InfeasibleError,
    ParseError,
    UnknownStationError,
)
from .geo import GeoPoint, bearing_arrays, haversine_arrays, normalize_bearing

log = logging.getLogger(__name__)

MAJOR_FRACTION = 5 / 38
DISTANCE_RTOL = 0.01

STATION_COLUMNS = ["id", "lat", "lon", "is_major"]
SKYWAY_COLUMNS = ["id", "source", "destination", "distance_km", "compass_bearing"]


@dataclass(frozen=True)
class Station:
    id: str
    location: GeoPoint
    is_major: bool = False


@dataclass(frozen=True)
class Skyway:
    id: int
    source: str
    destination: str
    distance_km: float
    bearing: float

    def other(self, station_id: str) -> str:
        if station_id == self.source:
            return self.destination
        if station_id == self.destination:
            return self.source
        raise UnknownStationError(station_id)

    def bearing_from(self, station_id: str) -> float:
        """Track bearing when leaving ``station_id`` along this Skyway."""
        if station_id == self.source:
            return self.bearing
        if station_id == self.destination:
            return normalize_bearing(self.bearing + 180.0)
        raise UnknownStationError(station_id)


@dataclass
class SkywayNetwork:
    stations: dict[str, Station]
    skyways: dict[int, Skyway]
    adjacency: dict[str, list[int]] = field(default_factory=dict)
    discrepancies: list[tuple[int, float, float]] = field(default_factory=list)

    def __post_init__(self):
        if not self.adjacency:
            adj = {sid: [] for sid in self.stations}
            for sk in self.skyways.values():
                for end in (sk.source, sk.destination):
                    if end not in adj:
                        raise DanglingEndpointError(end, sk.id)
                adj[sk.source].append(sk.id)
                if sk.destination != sk.source:
                    adj[sk.destination].append(sk.id)
            self.adjacency = {k: sorted(v) for k, v in adj.items()}
        self.station_ids = list(self.stations)
        self.index = {sid: i for i, sid in enumerate(self.station_ids)}
        self.lats = np.array([s.location.lat for s in self.stations.values()])
        self.lons = np.array([s.location.lon for s in self.stations.values()])

    def __len__(self):
        return len(self.stations)

    @property
    def majors(self) -> list[str]:
        return [s.id for s in self.stations.values() if s.is_major]

    def station(self, station_id: str) -> Station:
        try:
            return self.stations[station_id]
        except KeyError:
            raise UnknownStationError(station_id) from None

    def skyway_between(self, a: str, b: str) -> Skyway | None:
        for sk_id in self.adjacency.get(a, ()):
            sk = self.skyways[sk_id]
            if sk.other(a) == b:
                return sk
        return None

    def components(self) -> list[list[str]]:
        seen: set[str] = set()
        comps = []
        for start in self.station_ids:
            if start in seen:
                continue
            comp, queue = [], deque([start])
            seen.add(start)
            while queue:
                cur = queue.popleft()
                comp.append(cur)
                for sk_id in self.adjacency[cur]:
                    nxt = self.skyways[sk_id].other(cur)
                    if nxt not in seen:
                        seen.add(nxt)
                        queue.append(nxt)
            comps.append(comp)
        return comps

    def is_connected(self) -> bool:
        return len(self.stations) <= 1 or len(self.components()) == 1

    def distance_ratio_floor(self) -> float:
        """Smallest stored-distance / great-circle ratio over all Skyways (capped at 1).

        Scaling a straight-line estimate by this keeps it a lower bound on any
        path length through the network, even when a loaded file stores a
        Skyway shorter than its endpoints' great-circle separation.
        """
        ratio = 1.0
        for sk in self.skyways.values():
            a, b = self.stations[sk.source].location, self.stations[sk.destination].location
            g = float(haversine_arrays(a.lat, a.lon, b.lat, b.lon))
            if g > 0:
                ratio = min(ratio, sk.distance_km / g)
        return ratio

    def to_json(self) -> str:
        doc = {
            "stations": [
                {"id": s.id, "lat": s.location.lat, "lon": s.location.lon, "is_major": s.is_major}
                for s in self.stations.values()
            ],
            "skyways": [
                {
                    "id": k.id,
                    "source": k.source,
                    "destination": k.destination,
                    "distance_km": k.distance_km,
                    "compass_bearing": k.bearing,
                }
                for k in self.skyways.values()
            ],
        }
        return json.dumps(doc, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "SkywayNetwork":
        doc = json.loads(text)
        stations = {}
        for s in doc["stations"]:
            if s["id"] in stations:
                raise DuplicateStationError(f"duplicate station id {s['id']!r}")
            stations[s["id"]] = Station(s["id"], GeoPoint(s["lat"], s["lon"]), bool(s["is_major"]))
        skyways = {
            int(k["id"]): Skyway(
                int(k["id"]), k["source"], k["destination"], float(k["distance_km"]), float(k["compass_bearing"])
            )
            for k in doc["skyways"]
        }
        return cls(stations, skyways)


def neighbors(net: SkywayNetwork, station: str) -> list[tuple[Skyway, Station]]:
    """Skyways incident to ``station`` with the station at the far end, by Skyway id."""
    if station not in net.stations:
        raise UnknownStationError(station)
    out = []
    for sk_id in net.adjacency[station]:
        sk = net.skyways[sk_id]
        out.append((sk, net.stations[sk.other(station)]))
    return out


def _data_rows(path: Path):
    """Yield (line_number, row) from a CSV, skipping '#' provenance lines."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = ((i, line) for i, line in enumerate(fh, start=1) if not line.startswith("#"))
        numbered = list(lines)
    reader = csv.reader([line for _, line in numbered])
    for (lineno, _), row in zip(numbered, reader):
        yield lineno, row


def read_csv_table(path, columns: list[str]) -> list[tuple[int, dict[str, str]]]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing input file {path}")
    rows = _data_rows(path)
    try:
        lineno, header = next(rows)
    except StopIteration:
        raise ParseError(path, 1, "empty file, header required") from None
    header = [h.strip() for h in header]
    missing = [c for c in columns if c not in header]
    if missing:
        raise ParseError(path, lineno, f"header missing columns {missing}")
    out = []
    for lineno, row in rows:
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(path, lineno, f"expected {len(header)} fields, got {len(row)}")
        out.append((lineno, dict(zip(header, (c.strip() for c in row)))))
    return out


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "y", "t"):
        return True
    if t in ("0", "false", "no", "n", "f", ""):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def load_network(stations_file, skyways_file) -> SkywayNetwork:
    stations: dict[str, Station] = {}
    for lineno, row in read_csv_table(stations_file, STATION_COLUMNS):
        try:
            st = Station(row["id"], GeoPoint(float(row["lat"]), float(row["lon"])), _parse_bool(row["is_major"]))
        except ValueError as exc:
            raise ParseError(stations_file, lineno, str(exc)) from None
        if not st.id:
            raise ParseError(stations_file, lineno, "empty station id")
        if st.id in stations:
            raise DuplicateStationError(f"{stations_file}:{lineno}: duplicate station id {st.id!r}")
        stations[st.id] = st

    skyways: dict[int, Skyway] = {}
    for lineno, row in read_csv_table(skyways_file, SKYWAY_COLUMNS):
        try:
            sk = Skyway(
                int(row["id"]),
                row["source"],
                row["destination"],
                float(row["distance_km"]),
                normalize_bearing(float(row["compass_bearing"])),
            )
        except ValueError as exc:
            raise ParseError(skyways_file, lineno, str(exc)) from None
        for end in (sk.source, sk.destination):
            if end not in stations:
                raise DanglingEndpointError(end, sk.id)
        if sk.id in skyways:
            raise ParseError(skyways_file, lineno, f"duplicate skyway id {sk.id}")
        if not sk.distance_km > 0:
            raise ParseError(skyways_file, lineno, f"non-positive distance {sk.distance_km}")
        skyways[sk.id] = sk

    net = SkywayNetwork(stations, skyways)
    for sk in skyways.values():
        a, b = stations[sk.source].location, stations[sk.destination].location
        geodesic = float(haversine_arrays(a.lat, a.lon, b.lat, b.lon))
        if abs(sk.distance_km - geodesic) > DISTANCE_RTOL * geodesic:
            net.discrepancies.append((sk.id, sk.distance_km, geodesic))
            log.info("skyway %s stores %.3f km, endpoints are %.3f km apart", sk.id, sk.distance_km, geodesic)
    if not net.is_connected():
        log.warning("network has %d disconnected components", len(net.components()))
    return net


def write_network_csv(net: SkywayNetwork, stations_file, skyways_file, header_comment: str | None = None):
    with open(stations_file, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STATION_COLUMNS)
        for s in net.stations.values():
            w.writerow([s.id, repr(s.location.lat), repr(s.location.lon), int(s.is_major)])
    with open(skyways_file, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SKYWAY_COLUMNS)
        for k in net.skyways.values():
            w.writerow([k.id, k.source, k.destination, repr(k.distance_km), repr(k.bearing)])


def _candidate_edges(x: np.ndarray, y: np.ndarray) -> set[tuple[int, int]]:
    n = len(x)
    if n < 4:
        return {(i, j) for i in range(n) for j in range(i + 1, n)}
    tri = Delaunay(np.column_stack([x, y]))
    edges = set()
    for simplex in tri.simplices:
        for a in range(3):
            for b in range(a + 1, 3):
                i, j = sorted((int(simplex[a]), int(simplex[b])))
                edges.add((i, j))
    return edges


def generate_network(
    n_stations: int,
    n_skyways: int,
    bbox: tuple[float, float, float, float] = (-38.2, 144.5, -37.5, 145.5),
    seed: int = 0,
    major_fraction: float = MAJOR_FRACTION,
) -> SkywayNetwork:
    """Random connected, geometrically local network.

    ``bbox`` is ``(lat_min, lon_min, lat_max, lon_max)``. Topology is the
    minimum spanning tree of the station Delaunay triangulation plus the
    shortest remaining candidate edges until ``n_skyways`` is reached.
    """
    if n_stations < 1 or n_skyways < 0:
        raise InfeasibleError("n_stations must be positive and n_skyways non-negative")
    if n_skyways < n_stations - 1:
        raise InfeasibleError(f"{n_skyways} skyways cannot connect {n_stations} stations")
    if n_skyways > n_stations * (n_stations - 1) // 2:
        raise InfeasibleError(f"{n_skyways} skyways exceed the simple-graph maximum for {n_stations} stations")
    lat_min, lon_min, lat_max, lon_max = bbox
    rng = np.random.default_rng(seed)
    lats = np.round(rng.uniform(lat_min, lat_max, n_stations), 6)
    lons = np.round(rng.uniform(lon_min, lon_max, n_stations), 6)

    # local equirectangular plane, good enough for choosing a topology
    x = lons * math.cos(math.radians((lat_min + lat_max) / 2))
    cand = sorted(_candidate_edges(x, lats))
    if len(cand) < n_skyways:
        cand = sorted({(i, j) for i in range(n_stations) for j in range(i + 1, n_stations)})
    ci = np.array([e[0] for e in cand], dtype=np.int64)
    cj = np.array([e[1] for e in cand], dtype=np.int64)
    lengths = haversine_arrays(lats[ci], lons[ci], lats[cj], lons[cj])

    chosen: list[tuple[int, int]] = []
    if n_stations > 1:
        # +1e-12 keeps zero-length edges (duplicate points) in the sparse graph
        g = coo_matrix((lengths + 1e-12, (ci, cj)), shape=(n_stations, n_stations))
        mst = minimum_spanning_tree(g).tocoo()
        chosen = sorted((int(min(a, b)), int(max(a, b))) for a, b in zip(mst.row, mst.col))
        if len(chosen) != n_stations - 1:
            raise InfeasibleError("candidate graph is disconnected")
    in_tree = set(chosen)
    order = np.lexsort((cj, ci, lengths))
    for k in order:
        if len(chosen) >= n_skyways:
            break
        e = (int(ci[k]), int(cj[k]))
        if e not in in_tree:
            chosen.append(e)
            in_tree.add(e)

    n_major = max(int(round(n_stations * major_fraction)), min(2, n_stations))
    major_idx = set(int(i) for i in rng.choice(n_stations, size=n_major, replace=False))
    ids = [f"DS_{i + 1}" for i in range(n_stations)]
    stations = {
        ids[i]: Station(ids[i], GeoPoint(float(lats[i]), float(lons[i])), i in major_idx) for i in range(n_stations)
    }
    a = np.array([e[0] for e in chosen], dtype=np.int64)
    b = np.array([e[1] for e in chosen], dtype=np.int64)
    dist = haversine_arrays(lats[a], lons[a], lats[b], lons[b]) if chosen else np.zeros(0)
    brg = bearing_arrays(lats[a], lons[a], lats[b], lons[b]) if chosen else np.zeros(0)
    skyways = {
        k + 1: Skyway(k + 1, ids[a[k]], ids[b[k]], float(dist[k]), float(brg[k])) for k in range(len(chosen))
    }
    return SkywayNetwork(stations, skyways)
