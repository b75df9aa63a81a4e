import csv
import json

import pytest

from conftest import MINI
from daas.cli import run


@pytest.fixture(scope="module")
def cli_ws(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "cfg.json"
    cfg.write_text(json.dumps({**MINI, "out": str(root / "out")}))
    base = ["--config", str(cfg)]
    for cmd in (["gen-network"], ["gen-weather"], ["gen-services"], ["gen-pdrs"]):
        assert run(base + cmd) == 0
    return root, base


def _err(capsys):
    line = capsys.readouterr().err.strip().splitlines()[-1]
    return json.loads(line)


def test_usage_error_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        run(["plan", "--src", "A"])
    assert exc.value.code == 1
    assert _err(capsys)["error"] == "usage"


def test_unknown_subcommand_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        run(["fly"])
    assert exc.value.code == 1


def test_missing_input_exit_2(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        run(["--out", str(tmp_path), "compose"])
    assert exc.value.code == 2
    doc = _err(capsys)
    assert doc["error"] == "data_error" and "missing input file" in doc["message"]


def test_bad_config_exit_2(tmp_path, capsys):
    (tmp_path / "c.json").write_text(json.dumps({"window_min": -1}))
    with pytest.raises(SystemExit) as exc:
        run(["--config", str(tmp_path / "c.json"), "gen-network"])
    assert exc.value.code == 2


def test_unreachable_server_exit_3(cli_ws, capsys):
    _, base = cli_ws
    with pytest.raises(SystemExit) as exc:
        run(base + ["plan", "--src", "A", "--dst", "C", "--time", "2017-11-02T05:00:00Z",
                    "--server", "http://127.0.0.1:9"])
    assert exc.value.code == 3
    assert _err(capsys)["error"] == "pipeline_error"


def test_plan_same_station(cli_ws, capsys):
    _, base = cli_ws
    capsys.readouterr()
    assert run(base + ["plan", "--src", "A", "--dst", "A"]) == 0
    route = json.loads(capsys.readouterr().out)["route"]
    assert route["stations"] == ["A"] and route["distance_km"] == 0


def test_plan_unknown_station_exit_2(cli_ws, capsys):
    _, base = cli_ws
    with pytest.raises(SystemExit) as exc:
        run(base + ["plan", "--src", "A", "--dst", "ZZ"])
    assert exc.value.code == 2
    assert "ZZ" in _err(capsys)["message"]


def test_compose_empty_pdr_file(cli_ws, tmp_path):
    root, base = cli_ws
    empty = tmp_path / "none.csv"
    empty.write_text("id,pickup_station,pickup_time,dropoff_station,weight_kg,request_time\n")
    assert run(base + ["compose", "--pdrs", str(empty)]) == 0
    assert (root / "out" / "plans.jsonl").read_text() == ""


def test_compose_writes_one_line_per_request(cli_ws):
    root, base = cli_ws
    assert run(base + ["compose"]) == 0
    lines = (root / "out" / "plans.jsonl").read_text().splitlines()
    assert len(lines) == MINI["n_pdrs"]
    assert all("config_hash" in json.loads(x) for x in lines)


def test_cm_sweep_rows(cli_ws):
    root, base = cli_ws
    assert run(base + ["cm-sweep", "--cms", "1,2,3,4,5,10,15,20", "--no-dijkstra"]) == 0
    with open(root / "out" / "cm_sweep.csv") as fh:
        rows = [r for r in csv.DictReader(x for x in fh if not x.startswith("#"))]
    assert [r["cm"] for r in rows] == ["CM1", "CM2", "CM3", "CM4", "CM5", "CM10", "CM15", "CM20"]
    assert float(rows[1]["duration_error_pct"]) == 0.0


def test_cm_sweep_bad_list_exit_1(cli_ws):
    _, base = cli_ws
    with pytest.raises(SystemExit) as exc:
        run(base + ["cm-sweep", "--cms", "1,two"])
    assert exc.value.code == 1


def test_train_predict_bench(cli_ws, capsys):
    root, base = cli_ws
    assert run(base + ["train", "--classifier", "gnb", "--feature-set", "X4", "--folds", "3", "--seed", "9"]) == 0
    report = json.loads((root / "out" / "train_report.json").read_text())
    assert report["kind"] == "gnb" and report["decisions"] > 0
    assert run(base + ["predict"]) == 0
    assert len((root / "out" / "predicted_plans.jsonl").read_text().splitlines()) == MINI["n_pdrs"]
    assert run(base + ["bench", "--limit", "20"]) == 0
    assert "predictor:" in capsys.readouterr().out


def test_deviations_and_simulate(cli_ws):
    root, base = cli_ws
    assert run(base + ["deviations"]) == 0
    assert (root / "out" / "deviations_station.csv").exists()
    assert run(base + ["simulate"]) == 0
    assert (root / "out" / "movements.csv").stat().st_size > 0
