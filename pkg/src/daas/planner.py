"""Minimum-duration route search over a Skyway network.

``plan_astar`` minimises margin-adjusted flight time with blocked edges
removed; ``plan_dijkstra_baseline`` minimises raw distance and ignores the
weather. Edge costs for one weather hour are computed for the whole network
at once (``EdgeTable``) and cached on the planning context.
"""
from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import aero
from .aero import DEFAULT_FLEET, DroneType, fleet_envelope, gate_codes, ground_speed_arrays, ms_to_kmh
from .errors import NoRouteError, UnknownStationError
from .geo import haversine_arrays
from .network import Skyway, SkywayNetwork
from .timeutil import HOUR_S
from .weather import (
    IDX,
    MAX_LEAD,
    CertaintyMargin,
    DeviationStats,
    WeatherRecord,
    WeatherStore,
    adjust_arrays,
    average_records,
)

BLOCK_REASONS = aero.GATE_REASONS + ("crosswind",)
CROSSWIND_CODE = len(aero.GATE_REASONS) + 1


@dataclass(frozen=True)
class Segment:
    skyway: int
    source: str
    destination: str
    distance_km: float
    duration_min: float
    flyable: bool = True
    reason: str | None = None


@dataclass(frozen=True)
class Route:
    stations: tuple[str, ...]
    skyways: tuple[int, ...]
    total_distance_km: float
    total_duration_min: float
    segments: tuple[Segment, ...] = ()

    @property
    def n_segments(self) -> int:
        return len(self.skyways)

    def to_dict(self) -> dict:
        return {
            "stations": list(self.stations),
            "skyways": list(self.skyways),
            "distance_km": self.total_distance_km,
            "duration_min": self.total_duration_min,
            "segments": [
                {"skyway": s.skyway, "source": s.source, "destination": s.destination,
                 "distance_km": s.distance_km, "duration_min": s.duration_min}
                for s in self.segments
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, doc: dict) -> "Route":
        segs = tuple(
            Segment(int(s["skyway"]), s["source"], s["destination"], float(s["distance_km"]), float(s["duration_min"]))
            for s in doc.get("segments", ())
        )
        return cls(tuple(doc["stations"]), tuple(int(k) for k in doc["skyways"]),
                   float(doc["distance_km"]), float(doc["duration_min"]), segs)

    @classmethod
    def from_json(cls, text: str) -> "Route":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class EdgeCost:
    minutes: float | None
    reason: str | None = None

    @property
    def blocked(self) -> bool:
        return self.minutes is None


def edge_cost(skyway: Skyway, pickup_time: float, drone_speed: float, weather: WeatherStore,
              stats: DeviationStats, cm: CertaintyMargin, mode: str = aero.ADDITIVE,
              from_station: str | None = None, drone: DroneType | None = None,
              lead: int | None = None) -> EdgeCost:
    """Cost of flying one Skyway at ``pickup_time``: margin-adjusted weather
    averaged over both endpoints, gated, then converted to minutes.

    ``drone`` supplies the gate limits (default: the most permissive fleet
    limits) and ``from_station`` the direction of travel (default: the
    Skyway's source).
    """
    drone = drone or fleet_envelope(DEFAULT_FLEET)
    start = from_station or skyway.source
    end = skyway.other(start)
    if lead is None:
        a = weather.actual_record(start, pickup_time).values()
        b = weather.actual_record(end, pickup_time).values()
    else:
        a = weather.forecast_record(start, pickup_time, lead).values()
        b = weather.forecast_record(end, pickup_time, lead).values()
    sigma = 0.5 * (stats.sigma(start) + stats.sigma(end))
    adj = adjust_arrays(average_records(a, b), sigma, cm, (drone.temp_min_c, drone.temp_max_c))
    rec = WeatherRecord.from_values(start, pickup_time, adj)
    ok, reason = aero.is_flyable(rec, drone)
    if not ok:
        return EdgeCost(None, reason)
    wind = aero.decompose_wind(ms_to_kmh(rec.wind_speed_ms), rec.wind_bearing, skyway.bearing_from(start))
    try:
        gs = aero.drone_airspeed(drone_speed, wind, mode)
    except aero.UntraversableError:
        return EdgeCost(None, "crosswind")
    return EdgeCost(aero.flight_duration_min(skyway.distance_km, gs))


@dataclass
class GraphIndex:
    """Array view of a network: skyways by position, stations by index."""

    skyway_ids: np.ndarray
    pos: dict[int, int]
    src: np.ndarray
    dst: np.ndarray
    bearing: np.ndarray
    dist: np.ndarray
    # per station index: list of (neighbour index, skyway position, forward?)
    adj: list[list[tuple[int, int, bool]]]


def graph_index(net: SkywayNetwork) -> GraphIndex:
    cached = getattr(net, "_graph_index", None)
    if cached is not None:
        return cached
    ids = sorted(net.skyways)
    sks = [net.skyways[i] for i in ids]
    src = np.array([net.index[k.source] for k in sks], dtype=np.int64)
    dst = np.array([net.index[k.destination] for k in sks], dtype=np.int64)
    adj: list[list[tuple[int, int, bool]]] = [[] for _ in net.station_ids]
    for p, (s, d) in enumerate(zip(src.tolist(), dst.tolist())):
        adj[s].append((d, p, True))
        if d != s:
            adj[d].append((s, p, False))
    gi = GraphIndex(
        np.array(ids, dtype=np.int64), {k: p for p, k in enumerate(ids)}, src, dst,
        np.array([k.bearing for k in sks], dtype=float), np.array([k.distance_km for k in sks], dtype=float), adj,
    )
    net._graph_index = gi
    return gi


@dataclass
class EdgeTable:
    """Adjusted weather and gate result for every Skyway at one hour."""

    adjusted: np.ndarray  # (E, attributes)
    codes: np.ndarray  # (E,), 0 = flyable
    along: np.ndarray  # tailwind component in the source->destination direction, km/h
    cross: np.ndarray
    dist: np.ndarray

    def durations(self, speed_kmh: float, mode: str = aero.ADDITIVE, gated: bool = True):
        """(forward, reverse) minutes per Skyway; inf where blocked."""
        fwd = ground_speed_arrays(speed_kmh, self.along, self.cross, mode)
        rev = ground_speed_arrays(speed_kmh, -self.along, self.cross, mode)
        out = []
        for gs in (fwd, rev):
            with np.errstate(invalid="ignore", divide="ignore"):
                d = self.dist / gs * 60.0
            d = np.where(np.isnan(gs), np.inf, d)
            if gated:
                d = np.where(self.codes == 0, d, np.inf)
            out.append(d)
        return out[0], out[1]

    def reason(self, pos: int, forward: bool, speed_kmh: float, mode: str) -> str | None:
        code = int(self.codes[pos])
        if code:
            return BLOCK_REASONS[code - 1]
        along = self.along[pos] if forward else -self.along[pos]
        if np.isnan(ground_speed_arrays(speed_kmh, along, self.cross[pos], mode)):
            return "crosswind"
        return None


def build_edge_table(net: SkywayNetwork, snapshot: np.ndarray, sigma: np.ndarray, cm: CertaintyMargin,
                     limits: DroneType) -> EdgeTable:
    """``snapshot`` and ``sigma`` are (stations, attributes) aligned to ``net.station_ids``."""
    gi = graph_index(net)
    avg = average_records(snapshot[gi.src], snapshot[gi.dst])
    sig = 0.5 * (sigma[gi.src] + sigma[gi.dst])
    adj = adjust_arrays(avg, sig, cm, (limits.temp_min_c, limits.temp_max_c))
    wind_kmh = ms_to_kmh(adj[:, IDX["wind_speed_ms"]])
    codes = gate_codes(
        adj[:, IDX["cloud_cover"]], adj[:, IDX["temperature_c"]], adj[:, IDX["visibility_km"]],
        adj[:, IDX["humidity"]], adj[:, IDX["dew_point_c"]], wind_kmh,
        limits.temp_min_c, limits.temp_max_c, limits.max_wind_kmh,
    )
    along, cross, _ = aero.wind_components(wind_kmh, adj[:, IDX["wind_bearing"]], gi.bearing)
    return EdgeTable(adj, codes, along, cross, gi.dist)


def lead_for(pickup_time: float, request_time: float | None) -> int | None:
    if request_time is None:
        return None
    return min(max(math.ceil((pickup_time - request_time) / HOUR_S), 1), MAX_LEAD)


@dataclass
class PlanContext:
    """Everything the weather-aware planner needs; read-only once built.

    Each PDR is planned against the forecast issued at its request time when
    the store holds forecasts, else against actuals. ``propagate`` samples
    each edge at the estimated time of reaching it instead of the pickup hour.
    """

    net: SkywayNetwork
    weather: WeatherStore
    stats: DeviationStats
    cm: CertaintyMargin = field(default_factory=CertaintyMargin)
    fleet: tuple[DroneType, ...] = DEFAULT_FLEET
    mode: str = aero.ADDITIVE
    use_forecast: bool = True
    propagate: bool = False

    def __post_init__(self):
        self.fleet = tuple(self.fleet)
        self.envelope = fleet_envelope(self.fleet)
        self.speed = self.envelope.speed_kmh
        self.max_ground_speed = self.speed + self.envelope.max_wind_kmh
        self.sigma = self.stats.sigma_table(self.net.station_ids)
        self.ratio_floor = self.net.distance_ratio_floor()
        missing = [s for s in self.net.station_ids if s not in self.weather.station_index]
        if missing:
            from .errors import MissingWeatherError
            raise MissingWeatherError(f"no weather for stations {missing[:5]}")
        self._order = np.array([self.weather.station_index[s] for s in self.net.station_ids], dtype=np.int64)
        self._tables: dict[tuple[int, int | None], EdgeTable] = {}
        self._durations: dict[tuple[int, int | None, float], tuple[np.ndarray, np.ndarray]] = {}

    def with_cm(self, cm: CertaintyMargin) -> "PlanContext":
        return PlanContext(self.net, self.weather, self.stats, cm, self.fleet, self.mode,
                           self.use_forecast, self.propagate)

    def table(self, when: float, request_time: float | None = None) -> EdgeTable:
        lead = lead_for(when, request_time) if self.use_forecast else None
        if self.weather.forecast is None:
            lead = None
        h = self.weather.hour_index(when)
        key = (h, lead)
        tab = self._tables.get(key)
        if tab is None:
            snap = self.weather.snapshot(when, lead)[self._order]
            tab = build_edge_table(self.net, snap, self.sigma, self.cm, self.envelope)
            self._tables[key] = tab
        return tab

    def durations(self, when: float, request_time: float | None = None, speed: float | None = None):
        speed = self.speed if speed is None else speed
        lead = lead_for(when, request_time) if self.use_forecast and self.weather.forecast is not None else None
        key = (self.weather.hour_index(when), lead, speed)
        d = self._durations.get(key)
        if d is None:
            d = self.table(when, request_time).durations(speed, self.mode)
            self._durations[key] = d
        return d

    def heuristic(self, dst: str) -> np.ndarray:
        """Lower bound on minutes from every station to ``dst``.

        Great-circle distance (scaled so it never exceeds a network path) over
        the fastest possible ground speed: cruise plus the strongest wind any
        flyable edge can carry as a tailwind.
        """
        d = self.net.index[dst]
        km = haversine_arrays(self.net.lats, self.net.lons, self.net.lats[d], self.net.lons[d])
        return self.ratio_floor * km / self.max_ground_speed * 60.0


def _route_from(net: SkywayNetwork, gi: GraphIndex, path: list[int], edges: list[tuple[int, bool]],
                costs: list[float]) -> Route:
    stations = tuple(net.station_ids[i] for i in path)
    segs = []
    for (p, fwd), c, a, b in zip(edges, costs, stations, stations[1:]):
        segs.append(Segment(int(gi.skyway_ids[p]), a, b, float(gi.dist[p]), float(c)))
    return Route(
        stations,
        tuple(s.skyway for s in segs),
        float(sum(s.distance_km for s in segs)),
        float(sum(s.duration_min for s in segs)),
        tuple(segs),
    )


def _search(net: SkywayNetwork, src: str, dst: str, edge_weight, h=None, expanded=None):
    """Label-setting search with lexicographic labels (cost, segments, station ids).

    ``edge_weight(pos, forward, g)`` returns the cost of an edge or inf.
    ``h`` is an optional per-station lower bound array. ``expanded`` collects
    (station index, g) pairs as nodes are settled, for instrumentation.
    """
    for s in (src, dst):
        if s not in net.stations:
            raise UnknownStationError(s)
    gi = graph_index(net)
    names = net.station_ids
    s_i, d_i = net.index[src], net.index[dst]
    if s_i == d_i:
        return [s_i], [], []
    hv = (lambda i: 0.0) if h is None else (lambda i: float(h[i]))
    best: dict[int, tuple[float, int, tuple[str, ...]]] = {s_i: (0.0, 0, (names[s_i],))}
    back: dict[int, tuple[int, int, bool, float]] = {}
    heap = [(hv(s_i), 0, (names[s_i],), 0.0, s_i)]
    done: set[int] = set()
    while heap:
        f, nseg, key, g, u = heapq.heappop(heap)
        if u in done or best.get(u) != (g, nseg, key):
            continue
        done.add(u)
        if expanded is not None:
            expanded.append((u, g))
        if u == d_i:
            break
        for v, p, fwd in gi.adj[u]:
            if v in done:
                continue
            w = edge_weight(p, fwd, g)
            if not math.isfinite(w):
                continue
            cand = (g + w, nseg + 1, key + (names[v],))
            if v not in best or cand < best[v]:
                best[v] = cand
                back[v] = (u, p, fwd, w)
                heapq.heappush(heap, (cand[0] + hv(v), cand[1], cand[2], cand[0], v))
    if d_i not in done:
        raise NoRouteError(f"no route from {src} to {dst}")
    path, edges, costs = [d_i], [], []
    while path[-1] != s_i:
        u, p, fwd, w = back[path[-1]]
        path.append(u)
        edges.append((p, fwd))
        costs.append(w)
    return path[::-1], edges[::-1], costs[::-1]


def plan_astar(net: SkywayNetwork, src: str, dst: str, pickup_time: float, ctx: PlanContext,
               request_time: float | None = None, expanded=None) -> Route:
    """Fastest flyable route at ``pickup_time`` under the context's margin."""
    for s in (src, dst):
        if s not in net.stations:
            raise UnknownStationError(s)
    if src == dst:
        return Route((src,), (), 0.0, 0.0, ())
    gi = graph_index(net)
    if ctx.propagate:
        def weight(p, fwd, g):
            fw, rv = ctx.durations(pickup_time + g * 60.0, request_time)
            return fw[p] if fwd else rv[p]
    else:
        fw, rv = ctx.durations(pickup_time, request_time)

        def weight(p, fwd, g):
            return fw[p] if fwd else rv[p]
    path, edges, costs = _search(net, src, dst, weight, ctx.heuristic(dst), expanded)
    return _route_from(net, gi, path, edges, costs)


def plan_dijkstra_baseline(net: SkywayNetwork, src: str, dst: str, speed_kmh: float | None = None) -> Route:
    """Shortest route by stored distance, weather ignored; durations at still-air ``speed_kmh``."""
    speed = fleet_envelope(DEFAULT_FLEET).speed_kmh if speed_kmh is None else speed_kmh
    for s in (src, dst):
        if s not in net.stations:
            raise UnknownStationError(s)
    if src == dst:
        return Route((src,), (), 0.0, 0.0, ())
    gi = graph_index(net)
    dist = gi.dist

    path, edges, _ = _search(net, src, dst, lambda p, fwd, g: dist[p])
    costs = [dist[p] / speed * 60.0 for p, _ in edges]
    return _route_from(net, gi, path, edges, costs)


def route_durations(route: Route, table: EdgeTable | None, speed_kmh: float, mode: str = aero.ADDITIVE,
                    net: SkywayNetwork | None = None) -> list[float]:
    """Per-segment minutes for a given drone speed; still air when ``table`` is None."""
    if table is None:
        return [s.distance_km / speed_kmh * 60.0 for s in route.segments]
    gi = graph_index(net)
    fw, rv = table.durations(speed_kmh, mode, gated=False)
    out = []
    for s in route.segments:
        p = gi.pos[s.skyway]
        forward = net.skyways[s.skyway].source == s.source
        out.append(float(fw[p] if forward else rv[p]))
    return out
