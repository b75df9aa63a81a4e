"""Synthetic DaaS itineraries and their simulated per-segment movements."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from . import aero
from .aero import DroneType
from .errors import DataError, InfeasibleError, MissingWeatherError, ParseError
from .network import SkywayNetwork, read_csv_table
from .planner import build_edge_table, graph_index
from .timeutil import HOUR_S, format_ts, parse_ts
from .weather import CertaintyMargin, DeviationStats, TimeRange, WeatherStore

log = logging.getLogger(__name__)

GREEDY = "greedy"
EVERY_STOP = "every_stop"
POLICIES = (GREEDY, EVERY_STOP)
DFS_WALK = "dfs"
LERW = "lerw"

SERVICE_COLUMNS = ["id", "drone", "source", "destination", "total_distance_km", "flying_duration_min",
                   "maintenance_min", "start_time", "skyway_count", "stations"]
MOVEMENT_COLUMNS = ["service_id", "flying_duration_min", "arrival_time", "source", "destination",
                    "skyway_number", "total_skyways"]


@dataclass(frozen=True)
class DaaSService:
    id: int
    drone: str
    source: str
    destination: str
    path: tuple[str, ...]
    total_distance_km: float
    flying_duration_min: float
    maintenance_min: float
    start_time: float
    skyway_count: int
    # path positions (1 .. len(path) - 2) where the drone stops for maintenance
    stops: tuple[int, ...] = ()
    stop_minutes: float = 0.0

    def departures(self, distances, speed_kmh: float) -> list[float]:
        """Scheduled still-air departure time from each path station except the last."""
        t = self.start_time
        out = []
        stops = set(self.stops)
        for i, d in enumerate(distances):
            if i in stops:
                t += self.stop_minutes * 60.0
            out.append(t)
            t += d / speed_kmh * 3600.0
        return out


@dataclass(frozen=True)
class Movement:
    service_id: int
    segment_index: int
    source: str
    destination: str
    flying_duration_min: float
    arrival_time: float
    total_skyways: int


def maintenance_schedule(path_durations, drone: DroneType, policy: str = GREEDY,
                         per_stop_min: float | None = None) -> tuple[list[int], float]:
    """Where the drone swaps batteries along a path and the total time spent.

    Returns path positions of the stop stations (position i is the station
    reached after segment i) and total minutes. ``greedy`` stops only when the
    next segment would overrun the battery; ``every_stop`` stops at every
    intermediate station. ``per_stop_min`` overrides the drone's swap time.
    """
    durations = [float(d) for d in path_durations]
    for i, d in enumerate(durations, start=1):
        if d > drone.flight_time_min:
            raise InfeasibleError(
                f"segment {i} takes {d:.2f} min, over the {drone.name} battery budget of {drone.flight_time_min} min"
            )
    swap = drone.maintenance_min if per_stop_min is None else per_stop_min
    if policy == EVERY_STOP:
        stops = list(range(1, len(durations)))
    elif policy == GREEDY:
        stops, used = [], 0.0
        for i, d in enumerate(durations):
            if i > 0 and used + d > drone.flight_time_min:
                stops.append(i)
                used = 0.0
            used += d
    else:
        raise ValueError(f"unknown maintenance policy {policy!r}")
    return stops, len(stops) * swap


def _dfs_walk(adj, a: int, b: int, rng: np.random.Generator) -> list[int]:
    """Random depth-first search from a to b; the tree path found is simple."""
    path = [a]
    seen = {a}
    stack = [list(rng.permutation(adj[a]))]
    while path[-1] != b:
        if not stack[-1]:
            stack.pop()
            path.pop()
            continue
        nxt = int(stack[-1].pop())
        if nxt in seen:
            continue
        seen.add(nxt)
        path.append(nxt)
        stack.append(list(rng.permutation(adj[nxt])))
    return path


def _lerw(adj, a: int, b: int, rng: np.random.Generator) -> list[int]:
    """Random walk from a until b, erasing loops as they close."""
    path = [a]
    pos = {a: 0}
    cur = a
    while cur != b:
        nbrs = adj[cur]
        cur = int(nbrs[rng.integers(len(nbrs))])
        if cur in pos:
            i = pos[cur]
            for s in path[i + 1:]:
                del pos[s]
            del path[i + 1:]
        else:
            pos[cur] = len(path)
            path.append(cur)
    return path


def _sample_starts(rng, ranges: list[TimeRange], n: int, distribution: str) -> np.ndarray:
    lengths = np.array([r.end - r.start for r in ranges])
    which = rng.choice(len(ranges), size=n, p=lengths / lengths.sum())
    starts = np.array([r.start for r in ranges])[which]
    span = lengths[which]
    if distribution == "uniform":
        u = rng.random(n)
    elif distribution == "gaussian":
        u = np.clip(rng.normal(0.5, 1 / 6, n), 0.0, np.nextafter(1.0, 0.0))
    else:
        raise ValueError(f"unknown start-time distribution {distribution!r}")
    # whole seconds so CSV round trips are exact
    return np.floor(starts + u * span)


def generate_services(net: SkywayNetwork, fleet, n_services: int, time_ranges, seed: int = 0,
                      walk: str = DFS_WALK, policy: str = GREEDY, per_stop_min: float | None = None,
                      start_distribution: str = "uniform") -> list[DaaSService]:
    fleet = list(fleet)
    if not fleet:
        raise DataError("empty fleet")
    if n_services < 0:
        raise DataError("service count must be non-negative")
    majors = [net.index[m] for m in net.majors]
    comp_of = {}
    for ci, comp in enumerate(net.components()):
        for s in comp:
            comp_of[net.index[s]] = ci
    pairs = [(a, b) for a in majors for b in majors if a != b and comp_of[a] == comp_of[b]]
    if not pairs:
        raise InfeasibleError("no pair of major stations is connected")
    ranges = [r if isinstance(r, TimeRange) else TimeRange.parse(*r) for r in time_ranges]
    if not ranges:
        raise DataError("no time ranges")

    gi = graph_index(net)
    adj = [np.array([v for v, _, _ in nb], dtype=np.int64) for nb in gi.adj]
    edge_dist = {}
    for p in range(len(gi.dist)):
        s, d = int(gi.src[p]), int(gi.dst[p])
        edge_dist[(s, d)] = edge_dist[(d, s)] = float(gi.dist[p])
    walker = {DFS_WALK: _dfs_walk, LERW: _lerw}[walk]

    rng = np.random.default_rng(seed)
    starts = _sample_starts(rng, ranges, n_services, start_distribution)
    names = net.station_ids
    out = []
    for sid in range(1, n_services + 1):
        for _attempt in range(100):
            a, b = pairs[rng.integers(len(pairs))]
            path = walker(adj, a, b, rng)
            dists = [edge_dist[(u, v)] for u, v in zip(path, path[1:])]
            order = rng.permutation(len(fleet))
            for k in order:
                drone = fleet[int(k)]
                durs = [d / drone.speed_kmh * 60.0 for d in dists]
                try:
                    stops, maint = maintenance_schedule(durs, drone, policy, per_stop_min)
                except InfeasibleError:
                    continue
                break
            else:
                continue
            break
        else:
            raise InfeasibleError("could not find a path any fleet drone can fly")
        total = float(sum(dists))
        out.append(DaaSService(
            id=sid, drone=drone.name, source=names[a], destination=names[b],
            path=tuple(names[i] for i in path), total_distance_km=total,
            flying_duration_min=total / drone.speed_kmh * 60.0, maintenance_min=maint,
            start_time=float(starts[sid - 1]), skyway_count=len(path) - 1,
            stops=tuple(stops), stop_minutes=drone.maintenance_min if per_stop_min is None else per_stop_min,
        ))
    return out


def _hour_slots(store: WeatherStore, seconds: np.ndarray | float):
    """Index of the latest weather hour at or before each time (the first hour if earlier)."""
    eh = np.floor(np.asarray(seconds) / HOUR_S).astype(np.int64)
    return np.clip(np.searchsorted(store.hours, eh, side="right") - 1, 0, len(store.hours) - 1)


@dataclass
class DurationTable:
    """Minutes per (weather hour, Skyway, direction) for each drone speed."""

    fwd: dict[float, np.ndarray] = field(default_factory=dict)
    rev: dict[float, np.ndarray] = field(default_factory=dict)


def build_duration_table(net: SkywayNetwork, weather: WeatherStore, stats: DeviationStats,
                         cm: CertaintyMargin, speeds, mode: str = aero.ADDITIVE) -> DurationTable:
    order = np.array([weather.station_index[s] for s in net.station_ids], dtype=np.int64)
    sigma = stats.sigma_table(net.station_ids)
    limits = aero.fleet_envelope(aero.DEFAULT_FLEET)
    table = DurationTable()
    for speed in speeds:
        table.fwd[speed] = np.empty((len(weather.hours), len(net.skyways)))
        table.rev[speed] = np.empty((len(weather.hours), len(net.skyways)))
    for h in range(len(weather.hours)):
        snap = weather.actual[order, h]
        if np.isnan(snap).any():
            raise MissingWeatherError(f"incomplete actual weather at {format_ts(weather.hours[h] * HOUR_S)}")
        tab = build_edge_table(net, snap, sigma, cm, limits)
        for speed in speeds:
            f, r = tab.durations(speed, mode, gated=False)
            table.fwd[speed][h] = f
            table.rev[speed][h] = r
    return table


def simulate_movements(services, net: SkywayNetwork, weather: WeatherStore, stats: DeviationStats,
                       cm: CertaintyMargin, fleet=aero.DEFAULT_FLEET, mode: str = aero.ADDITIVE) -> list[Movement]:
    """Fly every service through the measured weather with the margin applied.

    Each segment uses the weather hour in which it departs; past the end of
    the recorded range the last hour is held. Maintenance stops are those of
    the schedule.
    """
    services = list(services)
    if not services:
        return []
    drones = {d.name: d for d in fleet}
    unknown = {s.drone for s in services} - set(drones)
    if unknown:
        raise DataError(f"services reference unknown drones {sorted(unknown)}")
    first = min(s.start_time for s in services)
    if not weather.covers(first) and first < weather.hours[0] * HOUR_S:
        raise MissingWeatherError(f"weather starts after the first service at {format_ts(first)}")
    speeds = sorted({drones[s.drone].speed_kmh for s in services})
    table = build_duration_table(net, weather, stats, cm, speeds, mode)
    gi = graph_index(net)
    pos_dir = {}
    for p in range(len(gi.dist)):
        a, b = net.station_ids[gi.src[p]], net.station_ids[gi.dst[p]]
        pos_dir[(a, b)] = (p, True)
        pos_dir[(b, a)] = (p, False)
    hours = weather.hours
    last = len(hours) - 1
    out = []
    for svc in services:
        speed = drones[svc.drone].speed_kmh
        fwd, rev = table.fwd[speed], table.rev[speed]
        stops = set(svc.stops)
        t = svc.start_time
        n = svc.skyway_count
        h = int(_hour_slots(weather, t))
        for i, (a, b) in enumerate(zip(svc.path, svc.path[1:])):
            if i in stops:
                t += svc.stop_minutes * 60.0
            try:
                p, forward = pos_dir[(a, b)]
            except KeyError:
                raise DataError(f"service {svc.id} flies {a}-{b}, which is not a skyway") from None
            eh = int(t // HOUR_S)
            while h < last and hours[h + 1] <= eh:
                h += 1
            d = float(fwd[h, p] if forward else rev[h, p])
            if not np.isfinite(d):
                raise InfeasibleError(f"service {svc.id} cannot hold track on {a}-{b}")
            t += d * 60.0
            out.append(Movement(svc.id, i + 1, a, b, d, t, n))
    return out


def write_services_csv(services, path, header_comment: str | None = None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERVICE_COLUMNS + ["stops", "stop_minutes"])
        for s in services:
            w.writerow([s.id, s.drone, s.source, s.destination, repr(s.total_distance_km),
                        repr(s.flying_duration_min), repr(s.maintenance_min), format_ts(s.start_time),
                        s.skyway_count, "-".join(s.path), " ".join(map(str, s.stops)), repr(s.stop_minutes)])


def read_services_csv(path) -> list[DaaSService]:
    out = []
    for lineno, row in read_csv_table(path, SERVICE_COLUMNS):
        try:
            stations = tuple(row["stations"].split("-"))
            stops = tuple(int(x) for x in row.get("stops", "").split()) if row.get("stops") else ()
            svc = DaaSService(
                int(row["id"]), row["drone"], row["source"], row["destination"], stations,
                float(row["total_distance_km"]), float(row["flying_duration_min"]), float(row["maintenance_min"]),
                parse_ts(row["start_time"]), int(row["skyway_count"]), stops,
                float(row["stop_minutes"]) if row.get("stop_minutes") else 0.0,
            )
        except ValueError as exc:
            raise ParseError(path, lineno, str(exc)) from None
        if svc.skyway_count != len(stations) - 1:
            raise ParseError(path, lineno, "skyway_count does not match the station list")
        if stations[0] != svc.source or stations[-1] != svc.destination:
            raise ParseError(path, lineno, "station list does not run from source to destination")
        out.append(svc)
    return out


def write_movements_csv(movements, path, header_comment: str | None = None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MOVEMENT_COLUMNS)
        for m in movements:
            w.writerow([m.service_id, f"{m.flying_duration_min:.6f}", format_ts(m.arrival_time), m.source,
                        m.destination, m.segment_index, m.total_skyways])


def read_movements_csv(path) -> list[Movement]:
    out = []
    for lineno, row in read_csv_table(path, MOVEMENT_COLUMNS):
        try:
            out.append(Movement(int(row["service_id"]), int(row["skyway_number"]), row["source"],
                                row["destination"], float(row["flying_duration_min"]),
                                parse_ts(row["arrival_time"]), int(row["total_skyways"])))
        except ValueError as exc:
            raise ParseError(path, lineno, str(exc)) from None
    return out
