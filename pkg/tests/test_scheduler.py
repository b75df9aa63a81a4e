import numpy as np
import pytest

from conftest import T0, uniform_store, values, zero_stats
from daas.aero import DEFAULT_FLEET, M200, P4_PRO
from daas.errors import InfeasibleError
from daas.geo import GeoPoint, destination_point
from daas.network import Skyway, SkywayNetwork, Station
from daas.scheduler import (
    EVERY_STOP,
    LERW,
    DaaSService,
    generate_services,
    maintenance_schedule,
    read_movements_csv,
    read_services_csv,
    simulate_movements,
    write_movements_csv,
    write_services_csv,
)
from daas.weather import CertaintyMargin, TimeRange

DAY = [TimeRange(T0, T0 + 20 * 3600)]


def line_net(n, step_km, bearing=0.0):
    pts = [GeoPoint(-37.9, 145.0)]
    for _ in range(n - 1):
        pts.append(destination_point(pts[-1], bearing, step_km))
    ids = [f"L{i}" for i in range(n)]
    stations = {s: Station(s, p, i in (0, n - 1)) for i, (s, p) in enumerate(zip(ids, pts))}
    skyways = {i + 1: Skyway(i + 1, ids[i], ids[i + 1], step_km, bearing) for i in range(n - 1)}
    return SkywayNetwork(stations, skyways)


def test_no_stop_when_within_budget():
    assert maintenance_schedule([10, 10], M200) == ([], 0)
    assert maintenance_schedule([], M200) == ([], 0)


def test_greedy_stops_by_hand():
    stops, total = maintenance_schedule([10] * 8, M200)
    assert stops == [3, 6] and total == 30


def test_every_stop_and_override():
    assert maintenance_schedule([5] * 4, M200, EVERY_STOP) == ([1, 2, 3], 45)
    assert maintenance_schedule([10] * 8, M200, per_stop_min=5) == ([3, 6], 10)


def test_overlong_segment_infeasible():
    with pytest.raises(InfeasibleError):
        maintenance_schedule([5, 39], M200)


def test_unique_path_on_line():
    net = line_net(4, 5.0)
    (svc,) = generate_services(net, DEFAULT_FLEET, 1, DAY, seed=3)
    assert svc.path in (("L0", "L1", "L2", "L3"), ("L3", "L2", "L1", "L0"))
    assert svc.skyway_count == 3


def test_long_m200_service_duration():
    net = line_net(11, 16.919)
    (svc,) = generate_services(net, [M200], 1, DAY, seed=0)
    assert svc.total_distance_km == pytest.approx(169.19)
    assert svc.flying_duration_min == pytest.approx(122.6, abs=0.05)
    assert svc.maintenance_min == len(svc.stops) * M200.maintenance_min > 0


def test_small_fixture_services(world):
    svcs = world.services
    assert len(svcs) == 30476
    drones = {d.name: d for d in DEFAULT_FLEET}
    majors = set(world.net.majors)
    for s in svcs[:3000]:
        assert s.source in majors and s.destination in majors
        assert s.skyway_count == len(s.path) - 1
        assert len(set(s.path)) == len(s.path)
        assert s.flying_duration_min == pytest.approx(s.total_distance_km / drones[s.drone].speed_kmh * 60, abs=1e-6)
        assert all(world.net.skyway_between(a, b) for a, b in zip(s.path, s.path[1:]))
        assert s.start_time == int(s.start_time)
        assert any(r.start <= s.start_time <= r.end for r in world.ranges)


def test_generation_reproducible(small_net, ranges):
    a = generate_services(small_net, DEFAULT_FLEET, 300, ranges, seed=5)
    b = generate_services(small_net, DEFAULT_FLEET, 300, ranges, seed=5)
    c = generate_services(small_net, DEFAULT_FLEET, 300, ranges, seed=6)
    assert a == b and a != c


def test_lerw_paths_are_simple(small_net, ranges):
    for s in generate_services(small_net, DEFAULT_FLEET, 200, ranges, seed=2, walk=LERW):
        assert len(set(s.path)) == len(s.path)


def test_gaussian_starts_stay_in_range(small_net, ranges):
    svcs = generate_services(small_net, DEFAULT_FLEET, 200, ranges, seed=2, start_distribution="gaussian")
    assert all(any(r.start <= s.start_time <= r.end for r in ranges) for s in svcs)


def _svc(net, path, drone=M200, start=T0 + 3600):
    dists = [net.skyway_between(a, b).distance_km for a, b in zip(path, path[1:])]
    durs = [d / drone.speed_kmh * 60 for d in dists]
    stops, maint = maintenance_schedule(durs, drone)
    return DaaSService(1, drone.name, path[0], path[-1], tuple(path), sum(dists), sum(durs), maint, start,
                       len(path) - 1, tuple(stops), drone.maintenance_min)


def test_first_movement_of_fixture_leg(small_net):
    svc = _svc(small_net, ["E", "DS_36", "DS_37"])
    store = uniform_store(small_net.station_ids)
    moves = simulate_movements([svc], small_net, store, zero_stats(small_net.station_ids), CertaintyMargin(2))
    m = moves[0]
    assert (m.source, m.destination, m.segment_index, m.total_skyways) == ("E", "DS_36", 1, 2)
    assert m.flying_duration_min == pytest.approx(2.7, abs=0.05)


def test_calm_simulation_matches_schedule():
    net = line_net(9, 9.0)
    svc = _svc(net, [f"L{i}" for i in range(9)])
    assert svc.maintenance_min > 0
    moves = simulate_movements([svc], net, uniform_store(net.station_ids), zero_stats(net.station_ids),
                               CertaintyMargin(2))
    assert len(moves) == 8
    total = (moves[-1].arrival_time - svc.start_time) / 60
    assert total == pytest.approx(svc.flying_duration_min + svc.maintenance_min, abs=1e-6)
    arrivals = [m.arrival_time for m in moves]
    assert all(b > a for a, b in zip(arrivals, arrivals[1:]))


@pytest.mark.parametrize("wind_from,faster", [(180.0, True), (0.0, False)])
def test_wind_sign_consistency(wind_from, faster):
    net = line_net(6, 6.0, bearing=0.0)
    svc = _svc(net, [f"L{i}" for i in range(6)])
    store = uniform_store(net.station_ids, base=values(wind_speed_ms=6.0, wind_bearing=wind_from))
    moves = simulate_movements([svc], net, store, zero_stats(net.station_ids), CertaintyMargin(2))
    flown = sum(m.flying_duration_min for m in moves)
    if faster:
        assert flown < svc.flying_duration_min
    else:
        assert flown > svc.flying_duration_min


def test_weather_past_range_holds_last_hour():
    net = line_net(3, 5.0)
    svc = _svc(net, ["L0", "L1", "L2"], start=T0 + 47.9 * 3600)
    moves = simulate_movements([svc], net, uniform_store(net.station_ids, n_hours=48), zero_stats(net.station_ids),
                               CertaintyMargin(2))
    assert len(moves) == 2


def test_movements_follow_skyways(world):
    moves = simulate_movements(world.services[:500], world.net, world.weather, world.stats, world.ctx.cm)
    by_service = {}
    for m in moves:
        assert world.net.skyway_between(m.source, m.destination) is not None
        by_service.setdefault(m.service_id, []).append(m)
    for sid, ms in by_service.items():
        assert [m.segment_index for m in ms] == list(range(1, len(ms) + 1))
        assert all(b.arrival_time > a.arrival_time for a, b in zip(ms, ms[1:]))
    assert len(moves) == sum(s.skyway_count for s in world.services[:500])


def test_simulation_reproducible(world):
    a = simulate_movements(world.services[:200], world.net, world.weather, world.stats, world.ctx.cm)
    b = simulate_movements(world.services[:200], world.net, world.weather, world.stats, world.ctx.cm)
    assert a == b


def test_csv_round_trips(tmp_path, world):
    svcs = world.services[:400]
    write_services_csv(svcs, tmp_path / "s.csv", "config_hash=x")
    assert read_services_csv(tmp_path / "s.csv") == svcs
    moves = simulate_movements(svcs[:50], world.net, world.weather, world.stats, world.ctx.cm)
    write_movements_csv(moves, tmp_path / "m.csv")
    again = read_movements_csv(tmp_path / "m.csv")
    assert len(again) == len(moves)
    for a, b in zip(again, moves):
        assert (a.service_id, a.segment_index, a.source, a.destination) == (b.service_id, b.segment_index,
                                                                           b.source, b.destination)
        assert a.flying_duration_min == pytest.approx(b.flying_duration_min, abs=1e-6)
        assert abs(a.arrival_time - b.arrival_time) <= 1.0


def test_p4_never_scheduled_over_budget(world):
    for s in world.services[:2000]:
        if s.drone != P4_PRO.name:
            continue
        dists = [world.net.skyway_between(a, b).distance_km for a, b in zip(s.path, s.path[1:])]
        assert max(d / P4_PRO.speed_kmh * 60 for d in dists) <= P4_PRO.flight_time_min
        assert np.isfinite(s.maintenance_min)
