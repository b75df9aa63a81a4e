import logging

import pytest

from daas.errors import DanglingEndpointError, InfeasibleError, ParseError, UnknownStationError
from daas.geo import compass_bearing, haversine_km
from daas.network import SkywayNetwork, generate_network, load_network, neighbors, write_network_csv

BBOX = (-38.2, 144.5, -37.5, 145.5)


def write(path, text):
    path.write_text(text)
    return path


def test_small_fixture_shape(small_net):
    assert len(small_net.stations) == 38
    assert len(small_net.skyways) == 64
    assert small_net.is_connected()
    assert sorted(small_net.majors) == ["A", "C", "E", "G", "H"]


def test_fixture_neighbor_of_f(small_net):
    nbrs = [(sk.id, st.id) for sk, st in neighbors(small_net, "F")]
    assert (1, "DS_30") in nbrs
    assert small_net.skyways[1].distance_km == pytest.approx(8.19)


def test_neighbors_unknown_and_isolated(tmp_path):
    s = write(tmp_path / "s.csv", "id,lat,lon,is_major\nX,-37.8,145.0,1\nY,-37.9,145.1,0\n")
    k = write(tmp_path / "k.csv", "id,source,destination,distance_km,compass_bearing\n")
    net = load_network(s, k)
    assert neighbors(net, "X") == []
    with pytest.raises(UnknownStationError):
        neighbors(net, "Q9")


def test_empty_skyways_warns(tmp_path, caplog):
    s = write(tmp_path / "s.csv", "id,lat,lon,is_major\nX,-37.8,145.0,1\nY,-37.9,145.1,0\n")
    k = write(tmp_path / "k.csv", "id,source,destination,distance_km,compass_bearing\n")
    with caplog.at_level(logging.WARNING):
        net = load_network(s, k)
    assert len(net.skyways) == 0
    assert "disconnected" in caplog.text


def test_dangling_endpoint_names_station(tmp_path):
    s = write(tmp_path / "s.csv", "id,lat,lon,is_major\nX,-37.8,145.0,1\n")
    k = write(tmp_path / "k.csv", "id,source,destination,distance_km,compass_bearing\n1,X,ZZ,3.0,10\n")
    with pytest.raises(DanglingEndpointError) as exc:
        load_network(s, k)
    assert exc.value.station_id == "ZZ"
    assert "ZZ" in str(exc.value)


def test_parse_error_carries_line(tmp_path):
    s = write(tmp_path / "s.csv", "# comment\nid,lat,lon,is_major\nX,-37.8,145.0,1\nY,abc,145.1,0\n")
    k = write(tmp_path / "k.csv", "id,source,destination,distance_km,compass_bearing\n")
    with pytest.raises(ParseError) as exc:
        load_network(s, k)
    assert exc.value.line == 4


def test_loaded_distance_kept_and_discrepancy_recorded(tmp_path):
    s = write(tmp_path / "s.csv", "id,lat,lon,is_major\nX,0,0,1\nY,0,1,1\n")
    k = write(tmp_path / "k.csv", "id,source,destination,distance_km,compass_bearing\n1,X,Y,150.0,90\n")
    net = load_network(s, k)
    assert net.skyways[1].distance_km == 150.0
    assert [d[0] for d in net.discrepancies] == [1]


@pytest.mark.parametrize("n,m,seed", [(38, 64, 7), (100, 140, 3), (2, 1, 5)])
def test_generated_shape_and_geometry(n, m, seed):
    net = generate_network(n, m, BBOX, seed=seed)
    assert len(net.stations) == n and len(net.skyways) == m
    assert net.is_connected()
    assert sum(len(v) for v in net.adjacency.values()) == 2 * m
    for sk in net.skyways.values():
        a, b = net.stations[sk.source].location, net.stations[sk.destination].location
        assert sk.distance_km == pytest.approx(haversine_km(a, b), abs=1e-6)
        diff = abs((sk.bearing - compass_bearing(a, b).degrees + 180) % 360 - 180)
        assert diff <= 1.0


def test_large_generated_network():
    net = generate_network(1254, 1280, BBOX, seed=42)
    assert len(net.stations) == 1254 and len(net.skyways) == 1280
    assert net.is_connected()


def test_generation_is_reproducible():
    a = generate_network(60, 90, BBOX, seed=11).to_json()
    b = generate_network(60, 90, BBOX, seed=11).to_json()
    c = generate_network(60, 90, BBOX, seed=12).to_json()
    assert a == b
    assert a != c


def test_generated_infeasible_counts():
    with pytest.raises(InfeasibleError):
        generate_network(10, 5, BBOX)
    with pytest.raises(InfeasibleError):
        generate_network(4, 7, BBOX)


def test_csv_and_json_round_trip(tmp_path, small_net):
    write_network_csv(small_net, tmp_path / "s.csv", tmp_path / "k.csv", "config_hash=abc")
    again = load_network(tmp_path / "s.csv", tmp_path / "k.csv")
    assert again.to_json() == small_net.to_json()
    assert SkywayNetwork.from_json(small_net.to_json()).to_json() == small_net.to_json()


def test_skyway_reverse_bearing(small_net):
    sk = small_net.skyways[35]
    assert sk.bearing_from(sk.source) == sk.bearing
    assert sk.bearing_from(sk.destination) == pytest.approx((sk.bearing + 180) % 360)
    assert small_net.skyway_between("C", "A") is sk
