"""Spatiotemporal composition: answer a delivery request with one scheduled
service per route segment.

For each segment the candidates are services that fly that segment in that
direction (spatial), depart inside the time window after the package is
ready (temporal) and can carry the package (weight). The earliest such
departure is taken. A service that simply continues along the route is kept
without a hand-off.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .aero import DEFAULT_FLEET
from .errors import DataError, NoRouteError, ParseError
from .network import SkywayNetwork, read_csv_table
from .planner import PlanContext, Route, plan_astar, plan_dijkstra_baseline, route_durations
from .scheduler import DaaSService
from .timeutil import format_ts, parse_ts

ASTAR = "astar"
DIJKSTRA = "dijkstra"
OK = "ok"
NO_ROUTE = "no_route"
NO_CANDIDATE = "no_candidate"

PDR_COLUMNS = ["id", "pickup_station", "pickup_time", "dropoff_station", "weight_kg", "request_time"]


@dataclass(frozen=True)
class PDR:
    id: int
    pickup_loc: str
    pickup_time: float
    dropoff_loc: str
    weight_kg: float
    request_time: float

    def __post_init__(self):
        if self.pickup_loc == self.dropoff_loc:
            raise ValueError(f"PDR {self.id}: pickup and drop-off are the same station")
        if not self.weight_kg > 0:
            raise ValueError(f"PDR {self.id}: weight must be positive")
        if self.request_time > self.pickup_time:
            raise ValueError(f"PDR {self.id}: requested after its pickup time")


@dataclass(frozen=True)
class TemporalDomain:
    start: float
    end: float

    def __post_init__(self):
        if not self.end > self.start:
            raise ValueError("temporal domain must have positive length")

    @classmethod
    def after(cls, clock: float, window_min: float) -> "TemporalDomain":
        return cls(clock, clock + window_min * 60.0)

    def __contains__(self, t: float) -> bool:
        return self.start <= t <= self.end


@dataclass(frozen=True)
class Candidate:
    service_id: int
    departure: float
    arrival: float
    segment: int  # 0-based position of this leg within the service
    payload_kg: float
    drone: str


@dataclass(frozen=True)
class Selection:
    segment: int  # 0-based position within the route
    source: str
    destination: str
    service_id: int
    departure: float
    arrival: float
    drone: str
    repeat: bool = False


@dataclass
class CompositePlan:
    pdr: int
    planner: str
    status: str
    route: Route | None = None
    selections: list[Selection] = field(default_factory=list)
    total_distance_km: float = 0.0
    total_duration_min: float = 0.0
    failed_segment: tuple[str, str] | None = None
    reason: str | None = None

    @property
    def ok(self) -> bool:
        return self.status == OK

    @property
    def service_count(self) -> int:
        return len(self.selections)

    @property
    def distinct_services(self) -> int:
        return len({s.service_id for s in self.selections})

    @property
    def delivery_time(self) -> float | None:
        return self.selections[-1].arrival if self.ok and self.selections else None

    def to_dict(self) -> dict:
        doc = {
            "pdr": self.pdr,
            "planner": self.planner,
            "status": self.status,
            "route": self.route.to_dict() if self.route is not None else None,
            "selections": [
                {"segment": s.segment, "source": s.source, "destination": s.destination,
                 "service_id": s.service_id, "departure": format_ts(s.departure),
                 "arrival": format_ts(s.arrival), "drone": s.drone, "repeat": s.repeat}
                for s in self.selections
            ],
            "total_distance_km": self.total_distance_km,
            "total_duration_min": self.total_duration_min,
            "service_count": self.service_count,
        }
        if self.failed_segment is not None:
            doc["failed_segment"] = list(self.failed_segment)
        if self.reason is not None:
            doc["reason"] = self.reason
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))


def sort_pdrs(requests) -> list[PDR]:
    return sorted(requests, key=lambda p: (p.request_time, p.id))


class ServiceIndex:
    """Scheduled legs of every service, grouped by directed segment.

    Times are the still-air schedule: departures and arrivals follow the
    service's start time, its drone's cruise speed and its maintenance stops.
    Each segment's legs are kept in (departure, service id) order, both as
    tuples for the sequential filters and as arrays for range lookups.
    """

    def __init__(self, services, net: SkywayNetwork, fleet=DEFAULT_FLEET):
        self.drones = {d.name: d for d in fleet}
        self.services: dict[int, DaaSService] = {}
        self.legs: dict[int, list[Candidate]] = {}
        by_segment: dict[tuple[str, str], list[Candidate]] = {}
        for svc in services:
            drone = self.drones.get(svc.drone)
            if drone is None:
                raise DataError(f"service {svc.id} uses unknown drone {svc.drone!r}")
            dists = []
            for a, b in zip(svc.path, svc.path[1:]):
                sk = net.skyway_between(a, b)
                if sk is None:
                    raise DataError(f"service {svc.id} flies {a}-{b}, which is not a skyway")
                dists.append(sk.distance_km)
            deps = svc.departures(dists, drone.speed_kmh)
            legs = []
            for i, (a, b) in enumerate(zip(svc.path, svc.path[1:])):
                c = Candidate(svc.id, deps[i], deps[i] + dists[i] / drone.speed_kmh * 3600.0, i,
                              drone.payload_kg, drone.name)
                legs.append(c)
                by_segment.setdefault((a, b), []).append(c)
            self.services[svc.id] = svc
            self.legs[svc.id] = legs
        self.by_segment = {}
        self.arrays = {}
        for key, cands in by_segment.items():
            cands.sort(key=lambda c: (c.departure, c.service_id))
            self.by_segment[key] = cands
            self.arrays[key] = (
                np.array([c.departure for c in cands]),
                np.array([c.payload_kg for c in cands]),
            )

    def __len__(self):
        return len(self.services)

    def spatial(self, source: str, destination: str) -> list[Candidate]:
        return self.by_segment.get((source, destination), [])

    def continuation(self, service_id: int, segment: int) -> Candidate | None:
        legs = self.legs[service_id]
        return legs[segment + 1] if segment + 1 < len(legs) else None

    def window_slice(self, source: str, destination: str, domain: TemporalDomain) -> tuple[int, int]:
        arr = self.arrays.get((source, destination))
        if arr is None:
            return 0, 0
        deps = arr[0]
        return int(np.searchsorted(deps, domain.start, "left")), int(np.searchsorted(deps, domain.end, "right"))


@dataclass(frozen=True)
class FilterStages:
    spatial: int
    temporal: int
    admissible: list[Candidate]


def filter_candidates(segment: tuple[str, str], services: ServiceIndex, domain: TemporalDomain,
                      weight_kg: float) -> FilterStages:
    spatial = services.spatial(*segment)
    temporal = [c for c in spatial if domain.start <= c.departure <= domain.end]
    weighted = [c for c in temporal if c.payload_kg >= weight_kg]
    weighted.sort(key=lambda c: (c.departure, c.service_id))
    return FilterStages(len(spatial), len(temporal), weighted)


def candidate_services(segment: tuple[str, str], services: ServiceIndex, domain: TemporalDomain,
                       weight_kg: float) -> list[Candidate]:
    """Services flying ``segment`` in its direction, departing inside ``domain``
    and able to lift ``weight_kg``, earliest departure first."""
    return filter_candidates(segment, services, domain, weight_kg).admissible


def plan_route(pdr: PDR, net: SkywayNetwork, ctx: PlanContext, planner: str) -> Route:
    if planner == ASTAR:
        return plan_astar(net, pdr.pickup_loc, pdr.dropoff_loc, pdr.pickup_time, ctx, pdr.request_time)
    if planner == DIJKSTRA:
        return plan_dijkstra_baseline(net, pdr.pickup_loc, pdr.dropoff_loc, ctx.speed)
    raise ValueError(f"unknown planner {planner!r}")


def first_admissible(services: ServiceIndex, window_min: float, weight_kg: float):
    """The composer's own rule: earliest admissible departure, lower id on ties."""
    def decide(i, key, clock):
        adm = filter_candidates(key, services, TemporalDomain.after(clock, window_min), weight_kg).admissible
        return adm[0] if adm else None
    return decide


def select_services(pdr: PDR, route: Route, services: ServiceIndex, window_min: float, decide=None):
    """Walk the route keeping a rolling clock; returns (selections, failed segment or None).

    ``decide(segment_index, (source, destination), clock)`` returns the
    service leg taken at a hand-off, or None when there is none.
    """
    if decide is None:
        decide = first_admissible(services, window_min, pdr.weight_kg)
    clock = pdr.pickup_time
    selections: list[Selection] = []
    prev: Candidate | None = None
    for i, seg in enumerate(route.segments):
        key = (seg.source, seg.destination)
        if prev is not None:
            nxt = services.continuation(prev.service_id, prev.segment)
            if nxt is not None and services.services[prev.service_id].path[nxt.segment + 1] == seg.destination \
                    and nxt.departure <= prev.arrival + window_min * 60.0:
                selections.append(Selection(i, seg.source, seg.destination, nxt.service_id, nxt.departure,
                                            nxt.arrival, nxt.drone, True))
                prev = nxt
                continue
            clock = prev.arrival + services.drones[prev.drone].maintenance_min * 60.0
        chosen = decide(i, key, clock)
        if chosen is None:
            return selections, key
        selections.append(Selection(i, seg.source, seg.destination, chosen.service_id, chosen.departure,
                                    chosen.arrival, chosen.drone, False))
        prev = chosen
    return selections, None


def plan_duration(route: Route, selections, services: ServiceIndex, ctx: PlanContext, pdr: PDR,
                  planner: str) -> float:
    """Flying minutes of the composite, each leg at its selected drone's speed
    under the planner's view of the weather (still air for the baseline)."""
    table = ctx.table(pdr.pickup_time, pdr.request_time) if planner == ASTAR else None
    total = 0.0
    per_speed: dict[float, list[float]] = {}
    for sel in selections:
        speed = services.drones[sel.drone].speed_kmh
        if speed not in per_speed:
            per_speed[speed] = route_durations(route, table, speed, ctx.mode, ctx.net)
        total += per_speed[speed][sel.segment]
    return float(total)


def compose(pdr: PDR, net: SkywayNetwork, services: ServiceIndex, ctx: PlanContext, window_min: float = 15.0,
            planner: str = ASTAR, decide=None, route: Route | None = None) -> CompositePlan:
    if route is None:
        try:
            route = plan_route(pdr, net, ctx, planner)
        except NoRouteError as exc:
            return CompositePlan(pdr.id, planner, NO_ROUTE, reason=str(exc))
    selections, failed = select_services(pdr, route, services, window_min, decide)
    if failed is not None:
        return CompositePlan(pdr.id, planner, NO_CANDIDATE, route, selections, route.total_distance_km,
                             failed_segment=failed, reason=f"no admissible service on {failed[0]}-{failed[1]}")
    return CompositePlan(pdr.id, planner, OK, route, selections, route.total_distance_km,
                         plan_duration(route, selections, services, ctx, pdr, planner))


def verify_plan(plan: CompositePlan, pdr: PDR, services: ServiceIndex, window_min: float) -> list[str]:
    """Re-check a composite against the filters from the raw schedule; returns problems found."""
    problems = []
    if not plan.ok:
        return problems
    route = plan.route
    if len(plan.selections) != len(route.segments):
        problems.append("selection count differs from segment count")
    clock = pdr.pickup_time
    prev = None
    for sel, seg in zip(plan.selections, route.segments):
        svc = services.services.get(sel.service_id)
        if svc is None:
            problems.append(f"unknown service {sel.service_id}")
            continue
        legs = [j for j, ab in enumerate(zip(svc.path, svc.path[1:])) if ab == (seg.source, seg.destination)]
        if not legs:
            problems.append(f"service {sel.service_id} does not fly {seg.source}-{seg.destination}")
            continue
        leg = services.legs[svc.id][legs[0]]
        if not math.isclose(leg.departure, sel.departure, abs_tol=1e-6):
            problems.append(f"service {sel.service_id} departure mismatch")
        if prev is not None:
            if sel.repeat:
                if sel.service_id != prev.service_id:
                    problems.append("repeat with a different service")
                clock = prev.arrival
            else:
                clock = prev.arrival + services.drones[prev.drone].maintenance_min * 60.0
        if not clock <= sel.departure <= clock + window_min * 60.0:
            problems.append(f"segment {sel.segment} departs outside its window")
        if services.drones[sel.drone].payload_kg < pdr.weight_kg:
            problems.append(f"segment {sel.segment} drone cannot carry {pdr.weight_kg} kg")
        prev = sel
    return problems


MEASURES = ("count", "distance", "duration")


@dataclass
class Comparison:
    rows: list[dict]
    tallies: dict[str, dict[str, int]]


def _relation(a: float, b: float, rel: float = 1e-9) -> str:
    if math.isclose(a, b, rel_tol=rel, abs_tol=1e-9):
        return "equal"
    return "astar_more" if a > b else "dijkstra_more"


def compare_planners(pdrs, net: SkywayNetwork, services: ServiceIndex, ctx: PlanContext,
                     window_min: float = 15.0) -> Comparison:
    rows = []
    tallies = {m: {"equal": 0, "astar_more": 0, "dijkstra_more": 0, "failed": 0} for m in MEASURES}
    for pdr in sort_pdrs(pdrs):
        a = compose(pdr, net, services, ctx, window_min, ASTAR)
        d = compose(pdr, net, services, ctx, window_min, DIJKSTRA)
        row = {"pdr": pdr.id}
        for tag, plan in (("astar", a), ("dijkstra", d)):
            row[f"{tag}_status"] = plan.status
            row[f"{tag}_count"] = plan.service_count
            row[f"{tag}_distance_km"] = plan.total_distance_km
            row[f"{tag}_duration_min"] = plan.total_duration_min
            row[f"{tag}_stations"] = "-".join(plan.route.stations) if plan.route else ""
        for m, (x, y) in zip(MEASURES, (
            (a.service_count, d.service_count),
            (a.total_distance_km, d.total_distance_km),
            (a.total_duration_min, d.total_duration_min),
        )):
            if a.ok and d.ok:
                rel = _relation(x, y)
                tallies[m][rel] += 1
                row[f"{m}_relation"] = rel
            else:
                tallies[m]["failed"] += 1
                row[f"{m}_relation"] = "failed"
        rows.append(row)
    return Comparison(rows, tallies)


def read_pdrs_csv(path) -> list[PDR]:
    out = []
    for lineno, row in read_csv_table(path, PDR_COLUMNS):
        try:
            out.append(PDR(int(row["id"]), row["pickup_station"], parse_ts(row["pickup_time"]),
                           row["dropoff_station"], float(row["weight_kg"]), parse_ts(row["request_time"])))
        except ValueError as exc:
            raise ParseError(path, lineno, str(exc)) from None
    return out


def write_pdrs_csv(pdrs, path, header_comment: str | None = None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PDR_COLUMNS)
        for p in pdrs:
            w.writerow([p.id, p.pickup_loc, format_ts(p.pickup_time), p.dropoff_loc, repr(p.weight_kg),
                        format_ts(p.request_time)])


def write_plans_jsonl(plans, path, config_hash: str | None = None):
    with open(path, "w", encoding="utf-8") as fh:
        for plan in plans:
            doc = plan.to_dict()
            if config_hash is not None:
                doc = {"config_hash": config_hash, **doc}
            fh.write(json.dumps(doc, separators=(",", ":")) + "\n")


def read_plans_jsonl(path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ParseError(path, lineno, str(exc)) from None
    return out
