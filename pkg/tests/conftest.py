from importlib import resources

import numpy as np
import pytest

from daas.aero import DEFAULT_FLEET
from daas.composer import ServiceIndex
from daas.harness import DEFAULT_RANGES
from daas.network import load_network
from daas.planner import PlanContext
from daas.scheduler import generate_services
from daas.timeutil import HOUR_S, parse_ts
from daas.weather import (
    ATTRIBUTES,
    IDX,
    N_ATTR,
    CertaintyMargin,
    DeviationStats,
    TimeRange,
    WeatherStore,
    deviation_stats_from_store,
    generate_weather,
)

CALM = {
    "temperature_c": 20.0,
    "cloud_cover": 0.1,
    "wind_speed_ms": 0.0,
    "wind_bearing": 0.0,
    "humidity": 0.6,
    "pressure_hpa": 1013.0,
    "dew_point_c": 7.3,
    "visibility_km": 10.0,
}

T0 = parse_ts("2017-11-03T00:00:00Z")


def values(**over):
    d = {**CALM, **over}
    return np.array([d[a] for a in ATTRIBUTES], dtype=float)


def uniform_store(stations, start=T0, n_hours=48, base=None, per_station=None):
    """Actual-only store with the same record every hour; ``per_station`` maps id -> overrides."""
    stations = list(stations)
    base = values() if base is None else base
    hours = np.arange(int(start // HOUR_S), int(start // HOUR_S) + n_hours)
    actual = np.broadcast_to(base, (len(stations), n_hours, N_ATTR)).copy()
    for sid, over in (per_station or {}).items():
        i = stations.index(sid)
        for a, v in over.items():
            actual[i, :, IDX[a]] = v
    return WeatherStore(stations, hours, actual)


def zero_stats(stations, sigma=0.0):
    n = len(stations)
    std = np.broadcast_to(np.asarray(sigma, dtype=float), (n, N_ATTR)).copy()
    return DeviationStats(list(stations), np.zeros((n, N_ATTR)), std, np.ones((n, N_ATTR), dtype=np.int64))


def small_fixture():
    data = resources.files("daas") / "data"
    return load_network(data / "small_stations.csv", data / "small_skyways.csv")


@pytest.fixture(scope="session")
def small_net():
    return small_fixture()


@pytest.fixture(scope="session")
def ranges():
    return [TimeRange.parse(*r) for r in DEFAULT_RANGES]


class World:
    """Generated weather, services and a CM2 planning context on the small fixture."""

    def __init__(self, net, ranges, seed=1):
        self.net = net
        self.ranges = ranges
        self.weather = generate_weather(net, ranges, seed=seed)
        self.stats = deviation_stats_from_store(self.weather)
        self.services = generate_services(net, DEFAULT_FLEET, 30476, ranges, seed=seed)
        self.index = ServiceIndex(self.services, net)
        self.ctx = PlanContext(net, self.weather, self.stats, CertaintyMargin(2.0))


@pytest.fixture(scope="session")
def world(small_net, ranges):
    return World(small_net, ranges)


def cost_matrix(net, fwd, rev):
    """Directed sparse cost matrix from per-Skyway (forward, reverse) minutes; inf entries dropped."""
    from scipy.sparse import csr_matrix

    best = {}
    ids = sorted(net.skyways)
    for p, sid in enumerate(ids):
        sk = net.skyways[sid]
        a, b = net.index[sk.source], net.index[sk.destination]
        for (u, v), w in (((a, b), fwd[p]), ((b, a), rev[p])):
            if np.isfinite(w) and w < best.get((u, v), np.inf):
                best[(u, v)] = w
    n = len(net.station_ids)
    if not best:
        return csr_matrix((n, n))
    rows, cols = zip(*best)
    return csr_matrix((list(best.values()), (rows, cols)), shape=(n, n))


def oracle_minutes(net, fwd, rev, src):
    """Exhaustive Dijkstra (scipy) from ``src`` over the given directed costs."""
    from scipy.sparse.csgraph import dijkstra

    return dijkstra(cost_matrix(net, fwd, rev), directed=True, indices=net.index[src])


def blocked_direct_store(net):
    # fog at A, C and the two stations of the short A-C detours: edges between two
    # fogged stations fall under the visibility gate, edges with one clear end stay open
    fog = {s: {"visibility_km": 0.5} for s in ("A", "C", "DS_9", "DS_20")}
    return uniform_store(net.station_ids, base=values(visibility_km=15.0), per_station=fog)


def make_service(net, sid, path, drone, start):
    from daas.scheduler import DaaSService, maintenance_schedule

    dists = [net.skyway_between(a, b).distance_km for a, b in zip(path, path[1:])]
    durs = [d / drone.speed_kmh * 60 for d in dists]
    stops, maint = maintenance_schedule(durs, drone)
    return DaaSService(sid, drone.name, path[0], path[-1], tuple(path), sum(dists), sum(durs), maint, start,
                       len(path) - 1, tuple(stops), drone.maintenance_min)


class BlockedDirect:
    """Direct A-C Skyway fogged out; a lifting service flies the A,B,D,C detour
    and another flies A-C directly."""

    def __init__(self, net):
        from daas.aero import M200, P4_PRO
        from daas.composer import PDR

        self.net = net
        self.pickup = T0 + 2 * HOUR_S
        self.services = [
            make_service(net, 1, ["A", "C"], M200, self.pickup + 300),
            make_service(net, 2, ["A", "B", "D", "C"], P4_PRO, self.pickup + 60),
            make_service(net, 3, ["A", "B", "D", "C"], M200, self.pickup + 120),
        ]
        self.index = ServiceIndex(self.services, net)
        self.ctx = PlanContext(net, blocked_direct_store(net), zero_stats(net.station_ids), CertaintyMargin(2.0))
        self.pdr = PDR(1, "A", self.pickup, "C", 1.25, self.pickup - 1800)


MINI = {
    "seed": 3,
    "time_ranges": [["2017-11-02T00:00:00Z", "2017-11-04T00:00:00Z"]],
    "n_services": 4000,
    "n_pdrs": 120,
}


def mini_config(out, **over):
    from daas.harness import ExperimentConfig

    return ExperimentConfig.from_dict({**MINI, "out": str(out), **over})


@pytest.fixture(scope="session")
def mini_ws(tmp_path_factory):
    """A two-day workspace with every generation stage run."""
    from daas.harness import Workspace

    ws = Workspace(mini_config(tmp_path_factory.mktemp("mini")))
    ws.gen_network()
    ws.gen_weather()
    ws.gen_services()
    ws.gen_pdrs()
    return ws
