import csv
import json

import numpy as np
import pytest

from conftest import mini_config
from daas.errors import DataError
from daas.harness import (
    SWEEP_COLUMNS,
    ExperimentConfig,
    Workspace,
    cm_sweep,
    deviation_report,
    generate_pdrs,
)
from daas.weather import ATTRIBUTES, ZERO_ERROR_MODEL, TimeRange, generate_weather


def test_config_rejects_bad_values():
    with pytest.raises(DataError):
        ExperimentConfig.from_dict({"nope": 1})
    for bad in ({"window_min": 0}, {"cms": [1, -2]}, {"network": "huge"}, {"weight_range": [2, 1]},
                {"cm_signs": "other"}, {"airspeed_mode": "ballistic"}):
        with pytest.raises(DataError):
            ExperimentConfig.from_dict(bad)


def test_config_hash_ignores_volatile_fields(tmp_path):
    a = mini_config(tmp_path / "a")
    b = mini_config(tmp_path / "b", jobs=4)
    c = mini_config(tmp_path / "a", seed=4)
    assert a.config_hash == b.config_hash != c.config_hash
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(a.to_dict()))
    assert ExperimentConfig.load(path).config_hash == a.config_hash
    with pytest.raises(DataError):
        ExperimentConfig.load(tmp_path / "missing.json")


def test_generate_pdrs(small_net, ranges):
    pdrs = generate_pdrs(small_net, 500, ranges, seed=2)
    assert [p.id for p in pdrs] == list(range(1, 501))
    for p in pdrs:
        assert p.pickup_loc != p.dropoff_loc
        assert 0.1 <= p.weight_kg <= 2.3
        assert 0 <= p.pickup_time - p.request_time <= 24 * 3600
        assert any(r.start <= p.pickup_time <= r.end for r in ranges)
    assert generate_pdrs(small_net, 500, ranges, seed=2) == pdrs
    assert generate_pdrs(small_net, 0, ranges) == []
    with pytest.raises(DataError):
        generate_pdrs(small_net, -1, ranges)


@pytest.fixture(scope="module")
def sweep(world):
    ranges = [TimeRange.parse("2017-11-02T00:00:00Z", "2017-11-09T00:00:00Z")]
    pdrs = generate_pdrs(world.net, 250, ranges, seed=41)
    return cm_sweep(pdrs, world.net, world.index, world.ctx, [1, 2, 5, 10, 20])


def test_sweep_baseline_row_is_zero(sweep):
    row = next(r for r in sweep if r["cm"] == "CM2")
    assert row["distance_error_pct"] == row["duration_error_pct"] == row["length_error_pct"] == 0.0
    assert [r["cm"] for r in sweep] == ["CM1", "CM2", "CM5", "CM10", "CM20", "Dijkstra"]
    assert all(set(r) == set(SWEEP_COLUMNS) for r in sweep)


def test_sweep_error_grows_with_margin(sweep):
    by = {r["cm"]: r for r in sweep}
    for m in ("distance_error_pct", "duration_error_pct", "length_error_pct"):
        assert by["CM5"][m] <= by["CM10"][m] + 1e-9 <= by["CM20"][m] + 2e-9
    assert by["Dijkstra"]["duration_error_pct"] > 0


def test_deviation_report_zero_error(small_net):
    ranges = [TimeRange.parse("2017-11-02T00:00:00Z", "2017-11-03T00:00:00Z")]
    rep = deviation_report(generate_weather(small_net, ranges, ZERO_ERROR_MODEL, seed=1))
    assert all(r["mean_error"] == 0 and r["std_error"] == 0 for r in rep.by_station + rep.by_lead)
    assert len(rep.by_station) == len(small_net.station_ids) * len(ATTRIBUTES)
    assert {r["lead_hours"] for r in rep.by_lead} == set(range(1, 25))


def test_deviation_report_bias_signs(world):
    rep = deviation_report(world.weather)
    vis = [r["mean_error"] for r in rep.by_station if r["attribute"] == "visibility_km"]
    dew = [r["mean_error"] for r in rep.by_station if r["attribute"] == "dew_point_c"]
    assert len(vis) == len(world.net.station_ids) and min(vis) > 0
    assert np.mean(dew) < 0
    lead_sd = [r["std_error"] for r in rep.by_lead if r["attribute"] == "temperature_c"]
    assert lead_sd[-1] > lead_sd[0]


def _header(path):
    with open(path) as fh:
        first = fh.readline()
        cols = next(csv.reader([fh.readline()]))
    return first, cols


def test_workspace_stages_write_artifacts(mini_ws):
    for name in ("stations", "skyways", "drones", "actual", "forecast", "stats", "services", "pdrs"):
        assert mini_ws.path(name).exists()
    first, cols = _header(mini_ws.path("services"))
    assert first.strip() == f"# {mini_ws.cfg.header}"
    assert "drone" in cols
    assert json.loads(mini_ws.path("stats").read_text())["config_hash"] == mini_ws.cfg.config_hash
    assert len(mini_ws.pdrs()) == 120


def test_workspace_reloads_from_disk(mini_ws):
    fresh = Workspace(mini_ws.cfg)
    assert fresh.network().station_ids == mini_ws.network().station_ids
    assert len(fresh.services()) == len(mini_ws.services())
    assert np.allclose(fresh.weather().actual, mini_ws.weather().actual, atol=1e-6, equal_nan=True)


def test_workspace_analyses(mini_ws):
    pdrs = mini_ws.pdrs()[:40]
    plans = mini_ws.compose(pdrs)
    assert len(plans) == 40
    lines = mini_ws.path("plans").read_text().splitlines()
    assert len(lines) == 40
    cmp = mini_ws.compare(pdrs)
    assert sum(cmp.tallies["count"].values()) == 40
    rows = mini_ws.cm_sweep(pdrs, [2, 5])
    assert [r["cm"] for r in rows] == ["CM2", "CM5", "Dijkstra"]
    _, cols = _header(mini_ws.path("sweep"))
    assert cols == SWEEP_COLUMNS
    rep = mini_ws.deviations()
    assert mini_ws.path("dev_lead").exists() and rep.unpaired >= 0


def test_missing_stage_is_data_error(tmp_path):
    ws = Workspace(mini_config(tmp_path / "empty"))
    with pytest.raises(DataError, match="missing input file"):
        ws.services()
    with pytest.raises(DataError):
        ws.load_model()
