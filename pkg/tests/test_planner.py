import numpy as np
import pytest

from conftest import T0, blocked_direct_store, oracle_minutes, uniform_store, values, zero_stats
from daas.aero import ADDITIVE, WIND_TRIANGLE
from daas.errors import NoRouteError, UnknownStationError
from daas.geo import GeoPoint
from daas.network import Skyway, SkywayNetwork, Station
from daas.planner import (
    PlanContext,
    Route,
    edge_cost,
    graph_index,
    plan_astar,
    plan_dijkstra_baseline,
)
from daas.weather import CertaintyMargin

GSA = 77.4


def two_station_net(dist=10.0):
    stations = {
        "X": Station("X", GeoPoint(-37.80, 145.0), True),
        "Y": Station("Y", GeoPoint(-37.80 + dist / 111.19, 145.0), True),
    }
    return SkywayNetwork(stations, {1: Skyway(1, "X", "Y", dist, 0.0)})


def calm_ctx(net, store=None, cm=2.0, sigma=0.0, mode=ADDITIVE):
    store = store or uniform_store(net.station_ids)
    return PlanContext(net, store, zero_stats(net.station_ids, sigma), CertaintyMargin(cm), mode=mode)


def test_calm_edge_cost(small_net):
    store = uniform_store(small_net.station_ids)
    c = edge_cost(small_net.skyways[1], T0, GSA, store, zero_stats(small_net.station_ids), CertaintyMargin(2))
    assert c.minutes == pytest.approx(6.35, abs=0.01)
    assert c.minutes == pytest.approx(8.19 / GSA * 60, abs=1e-12)


def test_margin_pushes_visibility_under_gate(small_net):
    store = uniform_store(small_net.station_ids, base=values(visibility_km=6.0))
    sigma = np.zeros(8)
    sigma[7] = 1.0
    c = edge_cost(small_net.skyways[1], T0, GSA, store, zero_stats(small_net.station_ids, sigma), CertaintyMargin(2))
    assert c.blocked and c.reason == "visibility"


def test_tailwind_is_cheaper(small_net):
    sk = small_net.skyways[1]
    stats = zero_stats(small_net.station_ids)
    calm = edge_cost(sk, T0, GSA, uniform_store(small_net.station_ids), stats, CertaintyMargin(2))
    tail_store = uniform_store(small_net.station_ids,
                               base=values(wind_speed_ms=10.0, wind_bearing=(sk.bearing + 180) % 360))
    tail = edge_cost(sk, T0, GSA, tail_store, stats, CertaintyMargin(2))
    back = edge_cost(sk, T0, GSA, tail_store, stats, CertaintyMargin(2), from_station=sk.destination)
    assert tail.minutes < calm.minutes < back.minutes
    assert tail.minutes == pytest.approx(sk.distance_km / (GSA + 36) * 60)


def test_same_station_route(small_net):
    r = plan_astar(small_net, "A", "A", T0, calm_ctx(small_net))
    assert r.stations == ("A",) and r.skyways == () and r.total_distance_km == 0 and r.total_duration_min == 0


def test_unknown_station(small_net):
    with pytest.raises(UnknownStationError):
        plan_astar(small_net, "A", "ZZ", T0, calm_ctx(small_net))
    with pytest.raises(UnknownStationError):
        plan_dijkstra_baseline(small_net, "ZZ", "ZZ")


def test_two_station_route_matches_edge_cost():
    net = two_station_net()
    ctx = calm_ctx(net)
    r = plan_astar(net, "X", "Y", T0, ctx)
    c = edge_cost(net.skyways[1], T0, ctx.speed, ctx.weather, ctx.stats, ctx.cm)
    assert r.stations == ("X", "Y") and r.skyways == (1,)
    assert r.total_duration_min == pytest.approx(c.minutes, abs=1e-12)
    assert plan_dijkstra_baseline(net, "X", "Y").stations == r.stations


def test_blocked_direct_edge_detours(small_net):
    ctx = calm_ctx(small_net, blocked_direct_store(small_net))
    assert edge_cost(small_net.skyways[35], T0, GSA, ctx.weather, ctx.stats, ctx.cm).reason == "visibility"
    r = plan_astar(small_net, "A", "C", T0, ctx)
    assert r.stations == ("A", "B", "D", "C")
    d = plan_dijkstra_baseline(small_net, "A", "C")
    assert d.stations == ("A", "C")
    assert d.total_distance_km <= r.total_distance_km


def test_calm_weather_takes_direct(small_net):
    assert plan_astar(small_net, "A", "C", T0, calm_ctx(small_net)).stations == ("A", "C")


def test_disconnected_destination():
    stations = {s: Station(s, GeoPoint(-37.8, 145.0 + 0.1 * i), True) for i, s in enumerate("XYZ")}
    net = SkywayNetwork(stations, {1: Skyway(1, "X", "Y", 8.8, 90.0)})
    with pytest.raises(NoRouteError):
        plan_dijkstra_baseline(net, "X", "Z")
    with pytest.raises(NoRouteError):
        plan_astar(net, "X", "Z", T0, calm_ctx(net))


def test_everything_blocked_is_no_route(small_net):
    ctx = calm_ctx(small_net, uniform_store(small_net.station_ids, base=values(cloud_cover=0.9)))
    with pytest.raises(NoRouteError):
        plan_astar(small_net, "A", "C", T0, ctx)


def test_route_invariants_and_json(world):
    t = world.ranges[0].start + 5 * 3600
    r = plan_astar(world.net, "G", "H", t, world.ctx, t - 3 * 3600)
    assert len(r.skyways) == len(r.stations) - 1
    for seg, a, b in zip(r.segments, r.stations, r.stations[1:]):
        sk = world.net.skyways[seg.skyway]
        assert {sk.source, sk.destination} == {a, b}
    assert r.total_distance_km == pytest.approx(sum(s.distance_km for s in r.segments), abs=1e-9)
    assert r.total_duration_min == pytest.approx(sum(s.duration_min for s in r.segments), abs=1e-9)
    assert Route.from_json(r.to_json()) == r


def _hours(world, n, seed):
    rng = np.random.default_rng(seed)
    return world.weather.hours[rng.choice(len(world.weather.hours), n, replace=False)] * 3600 + 1800


@pytest.mark.parametrize("mode", [ADDITIVE, WIND_TRIANGLE])
def test_oracle_equivalence_small_fixture(world, mode):
    ctx = world.ctx if mode == ADDITIVE else PlanContext(world.net, world.weather, world.stats, world.ctx.cm,
                                                      mode=WIND_TRIANGLE)
    rng = np.random.default_rng(3)
    ids = world.net.station_ids
    for t in _hours(world, 15, 1):
        fwd, rev = ctx.durations(t)
        src = ids[rng.integers(len(ids))]
        best = oracle_minutes(world.net, fwd, rev, src)
        for dst in ids:
            if dst == src:
                continue
            if not np.isfinite(best[world.net.index[dst]]):
                with pytest.raises(NoRouteError):
                    plan_astar(world.net, src, dst, t, ctx)
                continue
            r = plan_astar(world.net, src, dst, t, ctx)
            assert r.total_duration_min == pytest.approx(best[world.net.index[dst]], abs=1e-9)


def test_heuristic_admissible_on_expanded_nodes(world):
    net = world.net
    ids = net.station_ids
    rng = np.random.default_rng(5)
    for t in _hours(world, 10, 2):
        fwd, rev = world.ctx.durations(t)
        dst = ids[rng.integers(len(ids))]
        # remaining cost to dst = shortest path from dst on the reversed graph
        to_dst = oracle_minutes(net, rev, fwd, dst)
        h = world.ctx.heuristic(dst)
        for src in ids:
            if src == dst:
                continue
            expanded = []
            try:
                plan_astar(net, src, dst, t, world.ctx, expanded=expanded)
            except NoRouteError:
                pass
            for u, _ in expanded:
                assert h[u] <= to_dst[u] + 1e-12


def test_no_blocked_edge_in_any_route(world):
    net, ctx = world.net, world.ctx
    rng = np.random.default_rng(8)
    blocked_seen = 0
    for t in _hours(world, 30, 3):
        blocked_seen += int((ctx.table(t).codes != 0).sum())
        src, dst = rng.choice(net.station_ids, 2, replace=False)
        try:
            r = plan_astar(net, str(src), str(dst), t, ctx)
        except NoRouteError:
            continue
        for seg in r.segments:
            c = edge_cost(net.skyways[seg.skyway], t, ctx.speed, ctx.weather, ctx.stats, ctx.cm,
                          from_station=seg.source)
            assert not c.blocked
            assert c.minutes == pytest.approx(seg.duration_min, abs=1e-9)
    assert blocked_seen > 0


def test_baseline_never_longer(world):
    rng = np.random.default_rng(9)
    for t in _hours(world, 40, 4):
        src, dst = (str(s) for s in rng.choice(world.net.station_ids, 2, replace=False))
        try:
            a = plan_astar(world.net, src, dst, t, world.ctx)
        except NoRouteError:
            continue
        d = plan_dijkstra_baseline(world.net, src, dst)
        assert d.total_distance_km <= a.total_distance_km + 1e-9


def test_baseline_duration_uses_still_air(small_net):
    d = plan_dijkstra_baseline(small_net, "F", "DS_30")
    assert d.total_duration_min == pytest.approx(8.19 / GSA * 60)


def test_forecast_view_used_with_request_time(world):
    t = world.ranges[0].start + 30 * 3600
    a = world.ctx.table(t, t - 5 * 3600)
    b = world.ctx.table(t)
    assert not np.array_equal(a.adjusted, b.adjusted)


def test_deterministic_ties():
    # a square where both halves cost the same; fewer segments then station ids break ties
    pts = {"S": (0.0, 0.0), "P": (0.05, 0.05), "Q": (-0.05, 0.05), "T": (0.0, 0.1)}
    stations = {k: Station(k, GeoPoint(-37.8 + a, 145.0 + b), True) for k, (a, b) in pts.items()}
    sk = {1: Skyway(1, "S", "P", 7.0, 0.0), 2: Skyway(2, "P", "T", 7.0, 0.0),
          3: Skyway(3, "S", "Q", 7.0, 0.0), 4: Skyway(4, "Q", "T", 7.0, 0.0)}
    net = SkywayNetwork(stations, sk)
    graph_index(net)
    routes = {plan_astar(net, "S", "T", T0, calm_ctx(net)).stations for _ in range(5)}
    assert routes == {("S", "P", "T")}
