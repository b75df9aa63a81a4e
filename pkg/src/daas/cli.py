"""Command line entry point.

Every subcommand works on the directory given by ``--out``: it reads the
artifacts of earlier stages from there and writes its own. ``plan``,
``compose`` and ``predict`` can instead call a running ``serve`` instance
with ``--server``.

Exit codes: 0 success, 1 usage, 2 bad or missing input, 3 pipeline failure.
Failures print one JSON line on stderr.
"""
from __future__ import annotations

import json
import logging
import sys

import click

from .errors import DataError, PipelineError
from .harness import BASELINE_K, ExperimentConfig, Workspace

EXIT_USAGE, EXIT_DATA, EXIT_PIPELINE = 1, 2, 3


def _fail(kind: str, message: str, code: int):
    click.echo(json.dumps({"error": kind, "message": " ".join(str(message).split())}), err=True)
    sys.exit(code)


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {text!r}") from None


@click.group()
@click.option("--seed", type=int, default=None, help="Seed for every random stage.")
@click.option("--jobs", type=int, default=None, help="Worker threads for request batches.")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="Experiment config JSON.")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Artifact directory.")
@click.option("-v", "--verbose", is_flag=True)
@click.pass_context
def main(ctx, seed, jobs, config_path, out, verbose):
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    cfg = ExperimentConfig.load(config_path) if config_path else ExperimentConfig()
    if seed is not None:
        cfg.seed = seed
    if jobs is not None:
        cfg.jobs = jobs
    if out is not None:
        cfg.out = out
    cfg.validate()
    ctx.obj = Workspace(cfg)


def _ws() -> Workspace:
    return click.get_current_context().obj


@main.command("gen-network")
@click.option("--stations", type=int, default=None, help="Generate a network with this many stations.")
@click.option("--skyways", type=int, default=None)
@click.option("--stations-file", type=click.Path(dir_okay=False), default=None, help="Load instead of generating.")
@click.option("--skyways-file", type=click.Path(dir_okay=False), default=None)
def gen_network(stations, skyways, stations_file, skyways_file):
    ws = _ws()
    if stations_file or skyways_file:
        ws.cfg.network, ws.cfg.stations_file, ws.cfg.skyways_file = "files", stations_file, skyways_file
    elif stations is not None or skyways is not None:
        ws.cfg.network = "generate"
        ws.cfg.n_stations = stations if stations is not None else ws.cfg.n_stations
        ws.cfg.n_skyways = skyways if skyways is not None else ws.cfg.n_skyways
    net = ws.gen_network()
    click.echo(f"{len(net.stations)} stations, {len(net.skyways)} skyways -> {ws.path('stations').parent}")


@main.command("gen-weather")
@click.option("--error-model", type=click.Path(dir_okay=False), default=None, help="JSON: attribute -> {bias, sigma}.")
def gen_weather(error_model):
    from .weather import load_error_model
    ws = _ws()
    if error_model:
        ws.cfg.error_model = {a: {"bias": b, "sigma": s} for a, (b, s) in load_error_model(error_model).items()}
    store = ws.gen_weather()
    click.echo(f"{store.n_actual} actual, {store.n_forecast} forecast records")


@main.command("gen-services")
@click.option("--count", type=int, default=None)
@click.option("--walk", type=click.Choice(["dfs", "lerw"]), default=None)
@click.option("--maintenance", type=click.Choice(["greedy", "every_stop"]), default=None)
def gen_services(count, walk, maintenance):
    ws = _ws()
    if count is not None:
        ws.cfg.n_services = count
    if walk:
        ws.cfg.walk = walk
    if maintenance:
        ws.cfg.maintenance = maintenance
    svcs = ws.gen_services()
    click.echo(f"{len(svcs)} services")


@main.command("gen-pdrs")
@click.option("--count", type=int, default=None)
def gen_pdrs(count):
    ws = _ws()
    if count is not None:
        ws.cfg.n_pdrs = count
    click.echo(f"{len(ws.gen_pdrs())} requests")


@main.command()
@click.option("--cm", type=float, default=None, help="Margin multiplier (default: config).")
def simulate(cm):
    moves = _ws().simulate(cm)
    click.echo(f"{len(moves)} movements")


def _client(server: str):
    import httpx
    return httpx.Client(base_url=server, timeout=600.0)


def _remote(server: str, endpoint: str, payload: dict) -> dict:
    import httpx
    try:
        with _client(server) as c:
            r = c.post(endpoint, json=payload)
    except httpx.HTTPError as exc:
        raise PipelineError(f"server unreachable: {exc}") from None
    if r.status_code == 422 or r.status_code == 400:
        raise DataError(r.json().get("message", r.text) if r.headers.get("content-type", "").startswith("application/json") else r.text)
    if r.status_code >= 300:
        raise PipelineError(f"server returned {r.status_code}: {r.text}")
    return r.json()


@main.command()
@click.option("--src", required=True)
@click.option("--dst", required=True)
@click.option("--time", "when", default=None, help="Pickup time, ISO-8601 UTC (default: first weather hour).")
@click.option("--request-time", default=None)
@click.option("--planner", type=click.Choice(["astar", "dijkstra"]), default="astar")
@click.option("--cm", type=float, default=None)
@click.option("--server", default=None, help="Call a running service instead of planning locally.")
def plan(src, dst, when, request_time, planner, cm, server):
    from .planner import plan_astar, plan_dijkstra_baseline
    from .timeutil import HOUR_S, parse_ts
    ws = _ws()
    if server:
        if when is None:
            raise click.UsageError("--time is required with --server")
        doc = _remote(server, "/plan", {"src": src, "dst": dst, "time": when, "request_time": request_time,
                                        "planner": planner, "cm": cm})
        click.echo(json.dumps(doc, separators=(",", ":")))
        return
    net = ws.network()
    if planner == "dijkstra" or src == dst:
        route = plan_dijkstra_baseline(net, src, dst, ws.context(cm).speed) if planner == "dijkstra" \
            else plan_astar(net, src, dst, 0.0, None)
    else:
        store = ws.weather()
        t = parse_ts(when) if when else float(store.hours[0] * HOUR_S)
        rt = parse_ts(request_time) if request_time else None
        route = plan_astar(net, src, dst, t, ws.context(cm), rt)
    click.echo(json.dumps({"config_hash": ws.cfg.config_hash, "route": route.to_dict()}, separators=(",", ":")))


def _pdrs_arg(ws: Workspace, path):
    return ws.pdrs(path)


def _pdr_payload(pdrs):
    from .timeutil import format_ts
    return [{"id": p.id, "pickup_station": p.pickup_loc, "pickup_time": format_ts(p.pickup_time),
             "dropoff_station": p.dropoff_loc, "weight_kg": p.weight_kg, "request_time": format_ts(p.request_time)}
            for p in pdrs]


def _write_remote_plans(ws: Workspace, docs, name: str):
    ws.root.mkdir(parents=True, exist_ok=True)
    with open(ws.path(name), "w", encoding="utf-8") as fh:
        for d in docs:
            d = {k: v for k, v in d.items() if v is not None or k in ("route",)}
            fh.write(json.dumps({"config_hash": ws.cfg.config_hash, **d}, separators=(",", ":")) + "\n")


@main.command()
@click.option("--pdrs", "pdrs_path", type=click.Path(dir_okay=False), default=None, help="Default: OUT/pdrs.csv.")
@click.option("--planner", type=click.Choice(["astar", "dijkstra"]), default="astar")
@click.option("--cm", type=float, default=None)
@click.option("--window", type=float, default=None, help="Temporal window, minutes.")
@click.option("--server", default=None)
def compose(pdrs_path, planner, cm, window, server):
    ws = _ws()
    pdrs = _pdrs_arg(ws, pdrs_path)
    if server:
        doc = _remote(server, "/compose", {"pdrs": _pdr_payload(pdrs), "planner": planner, "cm": cm,
                                           "window_min": window})
        _write_remote_plans(ws, doc["plans"], "plans")
        ok = sum(p["status"] == "ok" for p in doc["plans"])
        click.echo(f"{ok}/{len(doc['plans'])} composed -> {ws.path('plans')}")
        return
    if not pdrs:
        ws.root.mkdir(parents=True, exist_ok=True)
        ws.path("plans").write_text("")
        click.echo(f"0/0 composed -> {ws.path('plans')}")
        return
    plans = ws.compose(pdrs, planner, cm, window)
    click.echo(f"{sum(p.ok for p in plans)}/{len(plans)} composed -> {ws.path('plans')}")


@main.command()
@click.option("--pdrs", "pdrs_path", type=click.Path(dir_okay=False), default=None)
def compare(pdrs_path):
    ws = _ws()
    cmp = ws.compare(_pdrs_arg(ws, pdrs_path))
    for m, t in cmp.tallies.items():
        click.echo(f"{m}: equal {t['equal']}, astar_more {t['astar_more']}, dijkstra_more {t['dijkstra_more']}, "
                   f"failed {t['failed']}")


@main.command("cm-sweep")
@click.option("--cms", default=None, help="Comma-separated multipliers, e.g. 1,2,3,4,5,10,15,20.")
@click.option("--pdrs", "pdrs_path", type=click.Path(dir_okay=False), default=None)
@click.option("--dijkstra/--no-dijkstra", default=True, help="Append the weather-blind baseline row.")
def cm_sweep_cmd(cms, pdrs_path, dijkstra):
    from .harness import SWEEP_COLUMNS, cm_sweep, write_rows_csv
    ws = _ws()
    ks = _parse_floats(cms) if cms else ws.cfg.cms
    if any(k < 0 for k in ks):
        raise click.BadParameter("margin multipliers must be non-negative")
    pdrs = _pdrs_arg(ws, pdrs_path)
    rows = cm_sweep(pdrs, ws.network(), ws.service_index(), ws.context(BASELINE_K), ks, ws.cfg.window_min,
                    include_dijkstra=dijkstra, jobs=ws.cfg.jobs)
    write_rows_csv(rows, SWEEP_COLUMNS, ws.path("sweep"), ws.cfg.header)
    for r in rows:
        click.echo(f"{r['cm']}: distance {r['distance_error_pct']:.2f}% duration {r['duration_error_pct']:.2f}% "
                   f"length {r['length_error_pct']:.2f}%")


@main.command()
def deviations():
    ws = _ws()
    rep = ws.deviations()
    click.echo(f"{len(rep.by_station)} station rows, {len(rep.by_lead)} lead rows, {rep.unpaired} unpaired skipped")


@main.command()
@click.option("--classifier", type=click.Choice(["sgd", "svm", "lr", "gnb"]), default="lr")
@click.option("--feature-set", type=click.Choice(["X1", "X2", "X3", "X4", "X5"]), default="X5")
@click.option("--folds", type=click.IntRange(min=2), default=10)
@click.option("--pdrs", "pdrs_path", type=click.Path(dir_okay=False), default=None)
@click.option("--seed", type=int, default=None, help="Overrides the global seed for fold assignment and SGD.")
def train(classifier, feature_set, folds, pdrs_path, seed):
    ws = _ws()
    if seed is not None:
        ws.cfg.seed = seed
    result, ds = ws.train(_pdrs_arg(ws, pdrs_path), classifier, feature_set, folds)
    click.echo(f"{classifier} {feature_set}: {len(ds)} rows over {ds.n_decisions} decisions, "
               f"segment accuracy {result.cv_accuracy * 100:.2f}%, candidate accuracy "
               f"{result.candidate_accuracy * 100:.2f}%")


@main.command()
@click.option("--model", "model_path", type=click.Path(dir_okay=False), default=None, help="Default: OUT/model.json.")
@click.option("--pdrs", "pdrs_path", type=click.Path(dir_okay=False), default=None)
@click.option("--server", default=None)
def predict(model_path, pdrs_path, server):
    ws = _ws()
    pdrs = _pdrs_arg(ws, pdrs_path)
    if server:
        doc = _remote(server, "/predict", {"pdrs": _pdr_payload(pdrs)})
        _write_remote_plans(ws, doc["plans"], "predicted")
        click.echo(f"{sum(p['status'] == 'ok' for p in doc['plans'])}/{len(doc['plans'])} composed")
        return
    plans = ws.predict(pdrs, ws.load_model(model_path))
    click.echo(f"{sum(p.ok for p in plans)}/{len(plans)} composed -> {ws.path('predicted')}")


@main.command()
@click.option("--model", "model_path", type=click.Path(dir_okay=False), default=None)
@click.option("--pdrs", "pdrs_path", type=click.Path(dir_okay=False), default=None)
@click.option("--limit", type=int, default=None, help="Use only the first N requests.")
def bench(model_path, pdrs_path, limit):
    ws = _ws()
    pdrs = _pdrs_arg(ws, pdrs_path)
    if limit is not None:
        pdrs = pdrs[:limit]
    rows = ws.bench(pdrs, ws.load_model(model_path))
    for r in rows:
        click.echo(f"{r.path}: {r.selections} selections, mean {r.mean_ms:.4f} ms, p95 {r.p95_ms:.4f} ms")


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(host, port):
    import uvicorn
    from .api import create_app
    uvicorn.run(create_app(workspace=_ws()), host=host, port=port, log_level="warning")


def run(argv=None) -> int:
    """Console-script wrapper that maps failures onto exit codes."""
    try:
        main.main(args=argv, prog_name="daas", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        _fail("usage", "aborted", EXIT_USAGE)
    except click.UsageError as exc:
        _fail("usage", exc.format_message(), EXIT_USAGE)
    except click.ClickException as exc:
        _fail("usage", exc.format_message(), EXIT_USAGE)
    except DataError as exc:
        _fail("data_error", str(exc), EXIT_DATA)
    except PipelineError as exc:
        _fail("pipeline_error", str(exc), EXIT_PIPELINE)
    except (OSError, ValueError) as exc:
        _fail("data_error", str(exc), EXIT_DATA)
    return 0


if __name__ == "__main__":
    sys.exit(run())
