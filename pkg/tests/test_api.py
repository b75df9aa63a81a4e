import pytest
from fastapi.testclient import TestClient

from conftest import mini_config
from daas.api import create_app
from daas.geo import GeoPoint
from daas.harness import Workspace
from daas.network import Skyway, SkywayNetwork, Station, write_network_csv
from daas.timeutil import format_ts


@pytest.fixture(scope="module")
def client(mini_ws):
    return TestClient(create_app(workspace=mini_ws))


def _payload(pdrs):
    return [{"id": p.id, "pickup_station": p.pickup_loc, "pickup_time": format_ts(p.pickup_time),
             "dropoff_station": p.dropoff_loc, "weight_kg": p.weight_kg, "request_time": format_ts(p.request_time)}
            for p in pdrs]


def test_health(client, mini_ws):
    r = client.get("/health")
    assert r.status_code == 200 and r.json() == {"status": "ok", "config_hash": mini_ws.cfg.config_hash}


def test_plan_same_station(client):
    r = client.post("/plan", json={"src": "A", "dst": "A", "time": "2017-11-02T05:00:00Z"})
    assert r.status_code == 200
    route = r.json()["route"]
    assert route["stations"] == ["A"] and route["distance_km"] == 0 and route["segments"] == []


def test_plan_matches_library(client, mini_ws):
    from daas.planner import plan_astar
    from daas.timeutil import parse_ts

    t = "2017-11-02T09:00:00Z"
    r = client.post("/plan", json={"src": "G", "dst": "H", "time": t})
    assert r.status_code == 200
    lib = plan_astar(mini_ws.network(), "G", "H", parse_ts(t), mini_ws.context())
    assert r.json()["route"]["stations"] == list(lib.stations)
    base = client.post("/plan", json={"src": "G", "dst": "H", "time": t, "planner": "dijkstra"}).json()
    assert base["route"]["distance_km"] <= r.json()["route"]["distance_km"] + 1e-9


def test_compose_matches_library(client, mini_ws):
    pdrs = mini_ws.pdrs()[:15]
    r = client.post("/compose", json={"pdrs": _payload(pdrs)})
    assert r.status_code == 200
    from daas.harness import compose_batch

    lib = compose_batch(pdrs, mini_ws.network(), mini_ws.service_index(), mini_ws.context(), 15.0)
    assert [p["status"] for p in r.json()["plans"]] == [p.status for p in lib]
    assert [p["service_count"] for p in r.json()["plans"]] == [p.service_count for p in lib]


def test_validation_errors(client):
    bad = {"id": 1, "pickup_station": "A", "pickup_time": "2017-11-02T05:00:00Z", "dropoff_station": "A",
           "weight_kg": 1.0, "request_time": "2017-11-02T04:00:00Z"}
    assert client.post("/compose", json={"pdrs": [bad]}).status_code == 422
    assert client.post("/plan", json={"src": "A", "dst": "C", "time": "x", "planner": "bfs"}).status_code == 422


def test_unknown_station_is_422(client):
    r = client.post("/plan", json={"src": "A", "dst": "ZZ", "time": "2017-11-02T05:00:00Z"})
    assert r.status_code == 422 and r.json()["error"] == "data_error"


def test_predict_without_model_is_422(tmp_path, mini_ws):
    cfg = mini_ws.cfg
    ws = Workspace(cfg)
    ws.root = tmp_path  # no model.json here
    ws._cache.update(mini_ws._cache)
    r = TestClient(create_app(workspace=ws)).post("/predict", json={"pdrs": []})
    assert r.status_code == 422 and "model" in r.json()["message"]


def test_no_route_is_409(tmp_path):
    stations = {s: Station(s, GeoPoint(-37.8, 145.0 + 0.1 * i), True) for i, s in enumerate("XYZ")}
    net = SkywayNetwork(stations, {1: Skyway(1, "X", "Y", 8.8, 90.0)})
    write_network_csv(net, tmp_path / "st.csv", tmp_path / "sk.csv")
    cfg = mini_config(tmp_path / "out", network="files", stations_file=str(tmp_path / "st.csv"),
                      skyways_file=str(tmp_path / "sk.csv"))
    ws = Workspace(cfg)
    ws.gen_network()
    ws.gen_weather()
    r = TestClient(create_app(workspace=ws)).post("/plan", json={"src": "X", "dst": "Z", "time": "2017-11-02T05:00:00Z"})
    assert r.status_code == 409 and r.json()["error"] == "pipeline_error"
