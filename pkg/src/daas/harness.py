"""Experiment configuration, request generation and the batch analyses
(planner comparison, margin sweep, forecast-deviation report)."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import aero
from .aero import DEFAULT_FLEET, load_drones
from .composer import ASTAR, DIJKSTRA, PDR, CompositePlan, ServiceIndex, compose, sort_pdrs
from .errors import DataError
from .network import SkywayNetwork
from .planner import PlanContext, route_durations
from .weather import (
    ATTRIBUTES,
    DEFAULT_SIGNS,
    LITERAL_SIGNS,
    SWEEP_VALUES,
    CertaintyMargin,
    TimeRange,
    WeatherStore,
    attribute_error,
    deviation_stats_from_store,
)

log = logging.getLogger(__name__)

DEFAULT_RANGES = (
    ("2017-11-01T00:00:00Z", "2017-11-10T00:00:00Z"),
    ("2018-05-01T00:00:00Z", "2018-05-10T00:00:00Z"),
)
BASELINE_K = 2.0


@dataclass
class ExperimentConfig:
    seed: int = 0
    network: str = "small"  # "small" fixture, "generate", or "files"
    n_stations: int = 38
    n_skyways: int = 64
    stations_file: str | None = None
    skyways_file: str | None = None
    time_ranges: list = field(default_factory=lambda: [list(r) for r in DEFAULT_RANGES])
    error_model: dict | None = None
    fleet_file: str | None = None
    n_services: int = 30476
    walk: str = "dfs"
    maintenance: str = "greedy"
    maintenance_per_stop_min: float | None = None
    n_pdrs: int = 2000
    weight_range: list = field(default_factory=lambda: [0.1, 2.3])
    cms: list = field(default_factory=lambda: [float(k) for k in SWEEP_VALUES if k > 0])
    cm: float = BASELINE_K
    cm_signs: str = "default"  # or "literal"
    airspeed_mode: str = aero.ADDITIVE
    use_forecast: bool = True
    window_min: float = 15.0
    out: str = "out"
    jobs: int = 1

    # fields that never change results
    _volatile = ("out", "jobs")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise DataError(f"unknown config keys {sorted(unknown)}")
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise DataError(f"missing input file {path}")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: {exc}") from None
        return cls.from_dict(doc)

    def validate(self):
        if self.seed is None:
            raise DataError("seed is mandatory")
        if self.network not in ("small", "generate", "files"):
            raise DataError(f"network must be small, generate or files, not {self.network!r}")
        if self.window_min <= 0:
            raise DataError("window must be positive")
        if self.cm < 0 or any(k < 0 for k in self.cms):
            raise DataError("margin multipliers must be non-negative")
        if self.cm_signs not in ("default", "literal"):
            raise DataError("cm_signs must be default or literal")
        if self.airspeed_mode not in aero.MODES:
            raise DataError(f"airspeed mode must be one of {aero.MODES}")
        lo, hi = self.weight_range
        if not 0 < lo <= hi:
            raise DataError("weight range must satisfy 0 < low <= high")
        for r in self.time_ranges:
            TimeRange.parse(*r)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def config_hash(self) -> str:
        doc = {k: v for k, v in self.to_dict().items() if k not in self._volatile}
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @property
    def header(self) -> str:
        return f"config_hash={self.config_hash}"

    def ranges(self) -> list[TimeRange]:
        return [TimeRange.parse(*r) for r in self.time_ranges]

    def margin(self, k: float | None = None) -> CertaintyMargin:
        signs = LITERAL_SIGNS if self.cm_signs == "literal" else DEFAULT_SIGNS
        return CertaintyMargin(self.cm if k is None else float(k), dict(signs))

    def fleet(self):
        return tuple(load_drones(self.fleet_file)) if self.fleet_file else DEFAULT_FLEET


def generate_pdrs(net: SkywayNetwork, n: int, time_ranges, seed: int = 0, weight_range=(0.1, 2.3),
                  max_lead_h: float = 24.0) -> list[PDR]:
    """Requests with uniformly drawn stations, pickup times, weights and notice.

    Pickup and drop-off are distinct stations of the same connected part of
    the network; the request precedes pickup by up to ``max_lead_h`` hours.
    """
    ranges = [r if isinstance(r, TimeRange) else TimeRange.parse(*r) for r in time_ranges]
    if n < 0:
        raise DataError("request count must be non-negative")
    comps = [c for c in net.components() if len(c) >= 2]
    if n and not comps:
        raise DataError("network has no pair of connected stations")
    rng = np.random.default_rng(seed)
    sizes = np.array([len(c) * (len(c) - 1) for c in comps], dtype=float)
    lengths = np.array([r.end - r.start for r in ranges])
    out = []
    for i in range(1, n + 1):
        comp = comps[rng.choice(len(comps), p=sizes / sizes.sum())]
        a, b = rng.choice(len(comp), 2, replace=False)
        r = ranges[rng.choice(len(ranges), p=lengths / lengths.sum())]
        pickup = math.floor(r.start + rng.random() * (r.end - r.start - 1))
        notice = math.floor(rng.random() * max_lead_h * 3600.0)
        weight = round(float(rng.uniform(*weight_range)), 2)
        out.append(PDR(i, comp[a], float(pickup), comp[b], max(weight, 0.01), float(pickup - notice)))
    return out


def compose_batch(pdrs, net: SkywayNetwork, services: ServiceIndex, ctx: PlanContext, window_min: float,
                  planner: str = ASTAR, jobs: int = 1) -> list[CompositePlan]:
    """Compose every request in request-time order; results keep that order."""
    pdrs = sort_pdrs(pdrs)

    def one(p):
        return compose(p, net, services, ctx, window_min, planner)

    if jobs <= 1 or len(pdrs) < 2:
        return [one(p) for p in pdrs]
    # the context's edge-table caches are filled idempotently, so sharing is safe
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, pdrs))


def _reference_duration(plan: CompositePlan, pdr: PDR, services: ServiceIndex, ref: PlanContext) -> float:
    """Flying minutes of a composite re-evaluated under the reference weather view."""
    table = ref.table(pdr.pickup_time, pdr.request_time)
    total = 0.0
    cache: dict[float, list[float]] = {}
    for sel in plan.selections:
        speed = services.drones[sel.drone].speed_kmh
        if speed not in cache:
            cache[speed] = route_durations(plan.route, table, speed, ref.mode, ref.net)
        total += cache[speed][sel.segment]
    return total


@dataclass
class PlanSummary:
    ok: bool
    distance: float
    duration: float
    length: int


def differs(a: PlanSummary, b: PlanSummary) -> tuple[bool, bool, bool]:
    """(distance, duration, length) difference flags; a failure differs from any
    success, and two failures agree."""
    if a.ok != b.ok:
        return True, True, True
    if not a.ok:
        return False, False, False
    return (
        not math.isclose(a.distance, b.distance, rel_tol=1e-9, abs_tol=1e-9),
        not math.isclose(a.duration, b.duration, rel_tol=1e-9, abs_tol=1e-9),
        a.length != b.length,
    )


SWEEP_COLUMNS = ["cm", "pdrs", "ok", "distance_error_pct", "duration_error_pct", "length_error_pct"]


def cm_sweep(pdrs, net: SkywayNetwork, services: ServiceIndex, ctx: PlanContext, cms, window_min: float = 15.0,
             baseline_k: float = BASELINE_K, include_dijkstra: bool = True, jobs: int = 1) -> list[dict]:
    """Share of requests whose composite differs from the baseline-margin one.

    Durations of every composite are re-evaluated under the baseline
    margin's weather view, so a plan identical to the baseline scores zero
    and any change of route or drone shows up.
    """
    pdrs = sort_pdrs(pdrs)
    base_ctx = ctx.with_cm(CertaintyMargin(baseline_k, dict(ctx.cm.signs)))

    def summarise(plans):
        return [
            PlanSummary(p.ok, p.total_distance_km,
                        _reference_duration(p, q, services, base_ctx) if p.ok else 0.0, p.service_count)
            for p, q in zip(plans, pdrs)
        ]

    base = summarise(compose_batch(pdrs, net, services, base_ctx, window_min, ASTAR, jobs))
    rows = []

    def row(label, summ):
        n = len(pdrs)
        flags = np.array([differs(s, b) for s, b in zip(summ, base)], dtype=bool).reshape(n, 3)
        pct = flags.mean(axis=0) * 100.0 if n else np.zeros(3)
        return {"cm": label, "pdrs": n, "ok": sum(s.ok for s in summ),
                "distance_error_pct": float(pct[0]), "duration_error_pct": float(pct[1]),
                "length_error_pct": float(pct[2])}

    for k in cms:
        c = base_ctx if float(k) == baseline_k else ctx.with_cm(CertaintyMargin(float(k), dict(ctx.cm.signs)))
        summ = base if c is base_ctx else summarise(compose_batch(pdrs, net, services, c, window_min, ASTAR, jobs))
        rows.append(row(f"CM{k:g}", summ))
    if include_dijkstra:
        rows.append(row("Dijkstra", summarise(compose_batch(pdrs, net, services, base_ctx, window_min, DIJKSTRA, jobs))))
    return rows


STATION_DEV_COLUMNS = ["station", "attribute", "mean_error", "std_error", "n"]
LEAD_DEV_COLUMNS = ["lead_hours", "attribute", "mean_error", "std_error", "n"]


@dataclass
class DeviationReport:
    by_station: list[dict]
    by_lead: list[dict]
    unpaired: int


def deviation_report(store: WeatherStore) -> DeviationReport:
    """Forecast-minus-actual moments per station and per lead hour.

    Forecasts with no matching actual are skipped and counted.
    """
    if store.forecast is None:
        raise DataError("no forecasts to compare")
    have_fc = ~np.isnan(store.forecast[..., 0])
    have_act = ~np.isnan(store.actual[..., 0])[:, :, None]
    unpaired = int(np.count_nonzero(have_fc & ~have_act))
    stats = deviation_stats_from_store(store)
    by_station = [
        {"station": s, "attribute": a, "mean_error": float(stats.mean[i, j]), "std_error": float(stats.std[i, j]),
         "n": int(stats.n[i, j])}
        for i, s in enumerate(stats.stations) for j, a in enumerate(ATTRIBUTES)
    ]
    err = attribute_error(store.forecast, store.actual[:, :, None, :])
    by_lead = []
    for lead in range(err.shape[2]):
        e = err[:, :, lead].reshape(-1, len(ATTRIBUTES))
        e = e[~np.isnan(e).any(axis=1)]
        for j, a in enumerate(ATTRIBUTES):
            by_lead.append({"lead_hours": lead + 1, "attribute": a,
                            "mean_error": float(e[:, j].mean()) if len(e) else 0.0,
                            "std_error": float(e[:, j].std()) if len(e) else 0.0, "n": int(len(e))})
    return DeviationReport(by_station, by_lead, unpaired)


def write_rows_csv(rows, columns, path, header_comment: str | None = None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r.get(c, "")) for c in columns])


def _cell(v):
    if isinstance(v, float):
        return repr(round(v, 10))
    return v


class Workspace:
    """File-backed pipeline state rooted at the config's output directory.

    Each stage reads the artifacts of earlier stages from the directory and
    writes its own there; loaded objects are cached for the life of the
    workspace.
    """

    FILES = {
        "stations": "stations.csv",
        "skyways": "skyways.csv",
        "drones": "drones.json",
        "actual": "weather_actual.csv",
        "forecast": "weather_forecast.csv",
        "stats": "deviation_stats.json",
        "services": "services.csv",
        "movements": "movements.csv",
        "pdrs": "pdrs.csv",
        "plans": "plans.jsonl",
        "compare": "compare.csv",
        "tally": "compare_tally.csv",
        "sweep": "cm_sweep.csv",
        "dev_station": "deviations_station.csv",
        "dev_lead": "deviations_lead.csv",
        "features": "features.csv",
        "model": "model.json",
        "train_report": "train_report.json",
        "predicted": "predicted_plans.jsonl",
        "latency": "latency.csv",
    }

    def __init__(self, cfg: ExperimentConfig):
        cfg.validate()
        self.cfg = cfg
        self.root = Path(cfg.out)
        self._cache: dict[str, object] = {}

    def path(self, name: str) -> Path:
        return self.root / self.FILES[name]

    def _require(self, *names):
        for n in names:
            p = self.path(n)
            if not p.exists():
                raise DataError(f"missing input file {p}")

    def _ensure_root(self):
        self.root.mkdir(parents=True, exist_ok=True)

    # generation stages

    def gen_network(self) -> SkywayNetwork:
        from importlib.resources import files
        from .network import generate_network, load_network, write_network_csv
        cfg = self.cfg
        if cfg.network == "small":
            data = files("daas") / "data"
            net = load_network(data / "small_stations.csv", data / "small_skyways.csv")
        elif cfg.network == "files":
            if not (cfg.stations_file and cfg.skyways_file):
                raise DataError("network 'files' needs stations_file and skyways_file")
            net = load_network(cfg.stations_file, cfg.skyways_file)
        else:
            net = generate_network(cfg.n_stations, cfg.n_skyways, seed=cfg.seed)
        self._ensure_root()
        write_network_csv(net, self.path("stations"), self.path("skyways"), cfg.header)
        aero.dump_drones(cfg.fleet(), self.path("drones"))
        self._cache["network"] = net
        return net

    def gen_weather(self) -> WeatherStore:
        from .weather import generate_weather, parse_error_model
        net = self.network()
        model = parse_error_model(self.cfg.error_model) if self.cfg.error_model is not None else None
        store = generate_weather(net, self.cfg.ranges(), model, self.cfg.seed)
        self._ensure_root()
        store.to_csv(self.path("actual"), self.path("forecast"), self.cfg.header)
        stats = deviation_stats_from_store(store)
        self._write_json("stats", json.loads(stats.to_json()))
        self._cache["weather"] = store
        self._cache["stats"] = stats
        return store

    def gen_services(self):
        from .scheduler import generate_services, write_services_csv
        cfg = self.cfg
        svcs = generate_services(self.network(), self.fleet(), cfg.n_services, cfg.ranges(), cfg.seed,
                                 cfg.walk, cfg.maintenance, cfg.maintenance_per_stop_min)
        self._ensure_root()
        write_services_csv(svcs, self.path("services"), cfg.header)
        self._cache["services"] = svcs
        self._cache.pop("index", None)
        return svcs

    def gen_pdrs(self) -> list[PDR]:
        from .composer import write_pdrs_csv
        cfg = self.cfg
        pdrs = generate_pdrs(self.network(), cfg.n_pdrs, cfg.ranges(), cfg.seed + 1, cfg.weight_range)
        self._ensure_root()
        write_pdrs_csv(pdrs, self.path("pdrs"), cfg.header)
        self._cache["pdrs"] = pdrs
        return pdrs

    def simulate(self, k: float | None = None):
        from .scheduler import simulate_movements, write_movements_csv
        moves = simulate_movements(self.services(), self.network(), self.weather(), self.stats(),
                                   self.cfg.margin(k), self.fleet(), self.cfg.airspeed_mode)
        write_movements_csv(moves, self.path("movements"), self.cfg.header)
        return moves

    # loaders

    def network(self) -> SkywayNetwork:
        if "network" not in self._cache:
            from .network import load_network
            self._require("stations", "skyways")
            self._cache["network"] = load_network(self.path("stations"), self.path("skyways"))
        return self._cache["network"]

    def fleet(self):
        if "fleet" not in self._cache:
            self._cache["fleet"] = tuple(load_drones(self.path("drones"))) if self.path("drones").exists() \
                else self.cfg.fleet()
        return self._cache["fleet"]

    def weather(self) -> WeatherStore:
        if "weather" not in self._cache:
            self._require("actual", "forecast")
            self._cache["weather"] = WeatherStore.from_csv(self.path("actual"), self.path("forecast"))
        return self._cache["weather"]

    def stats(self):
        if "stats" not in self._cache:
            self._cache["stats"] = deviation_stats_from_store(self.weather())
        return self._cache["stats"]

    def services(self):
        if "services" not in self._cache:
            from .scheduler import read_services_csv
            self._require("services")
            self._cache["services"] = read_services_csv(self.path("services"))
        return self._cache["services"]

    def service_index(self) -> ServiceIndex:
        if "index" not in self._cache:
            self._cache["index"] = ServiceIndex(self.services(), self.network(), self.fleet())
        return self._cache["index"]

    def context(self, k: float | None = None) -> PlanContext:
        key = f"ctx:{self.cfg.cm if k is None else float(k)}"
        if key not in self._cache:
            self._cache[key] = PlanContext(self.network(), self.weather(), self.stats(), self.cfg.margin(k),
                                           self.fleet(), self.cfg.airspeed_mode, self.cfg.use_forecast)
        return self._cache[key]

    def pdrs(self, path=None) -> list[PDR]:
        from .composer import read_pdrs_csv
        if path is not None:
            return read_pdrs_csv(path)
        if "pdrs" not in self._cache:
            self._require("pdrs")
            self._cache["pdrs"] = read_pdrs_csv(self.path("pdrs"))
        return self._cache["pdrs"]

    # analyses

    def compose(self, pdrs, planner: str = ASTAR, k: float | None = None, window: float | None = None):
        from .composer import write_plans_jsonl
        plans = compose_batch(pdrs, self.network(), self.service_index(), self.context(k),
                              window or self.cfg.window_min, planner, self.cfg.jobs)
        self._ensure_root()
        write_plans_jsonl(plans, self.path("plans"), self.cfg.config_hash)
        return plans

    def compare(self, pdrs):
        from .composer import MEASURES, compare_planners
        cmp = compare_planners(pdrs, self.network(), self.service_index(), self.context(), self.cfg.window_min)
        cols = ["pdr"] + [f"{t}_{m}" for t in ("astar", "dijkstra")
                          for m in ("status", "count", "distance_km", "duration_min", "stations")] \
            + [f"{m}_relation" for m in MEASURES]
        write_rows_csv(cmp.rows, cols, self.path("compare"), self.cfg.header)
        tally_rows = [{"measure": m, **cmp.tallies[m]} for m in MEASURES]
        write_rows_csv(tally_rows, ["measure", "equal", "astar_more", "dijkstra_more", "failed"],
                       self.path("tally"), self.cfg.header)
        return cmp

    def cm_sweep(self, pdrs, cms=None):
        rows = cm_sweep(pdrs, self.network(), self.service_index(), self.context(BASELINE_K),
                        self.cfg.cms if cms is None else cms, self.cfg.window_min, jobs=self.cfg.jobs)
        write_rows_csv(rows, SWEEP_COLUMNS, self.path("sweep"), self.cfg.header)
        return rows

    def deviations(self) -> DeviationReport:
        rep = deviation_report(self.weather())
        write_rows_csv(rep.by_station, STATION_DEV_COLUMNS, self.path("dev_station"), self.cfg.header)
        write_rows_csv(rep.by_lead, LEAD_DEV_COLUMNS, self.path("dev_lead"), self.cfg.header)
        return rep

    def train(self, pdrs, kind: str, feature_set: str, folds: int):
        from .predictor import build_corpus, train
        ds, _ = build_corpus(pdrs, self.network(), self.service_index(), self.context(), self.cfg.window_min)
        ds.write_csv(self.path("features"), self.cfg.header)
        result = train(ds, kind, feature_set, folds, self.cfg.seed)
        doc = json.loads(result.model.to_json())
        self._write_json("model", doc)
        self._write_json("train_report", {
            "kind": kind, "feature_set": feature_set, "folds": folds, "rows": len(ds),
            "decisions": ds.n_decisions, "cv_segment_accuracy": result.cv_accuracy,
            "cv_candidate_accuracy": result.candidate_accuracy, "fold_accuracy": result.fold_accuracy,
        })
        return result, ds

    def load_model(self, path=None):
        from .predictor import TrainedModel
        p = Path(path) if path else self.path("model")
        if not p.exists():
            raise DataError(f"missing input file {p}")
        return TrainedModel.from_json(p.read_text())

    def predictor(self, model):
        from .predictor import PredictiveComposer
        return PredictiveComposer(model, self.network(), self.service_index(), self.context(), self.cfg.window_min)

    def predict(self, pdrs, model):
        from .composer import write_plans_jsonl
        pc = self.predictor(model)
        plans = [pc.compose(p) for p in sort_pdrs(pdrs)]
        write_plans_jsonl(plans, self.path("predicted"), self.cfg.config_hash)
        return plans

    def bench(self, pdrs, model):
        from .predictor import benchmark_latency
        rows = benchmark_latency(pdrs, self.network(), self.service_index(), self.context(), self.predictor(model),
                                 self.cfg.window_min)
        write_rows_csv([asdict(r) for r in rows], ["path", "selections", "mean_ms", "p95_ms"],
                       self.path("latency"), self.cfg.header)
        return rows

    def _write_json(self, name: str, doc: dict):
        self._ensure_root()
        doc = {"config_hash": self.cfg.config_hash, **doc}
        self.path(name).write_text(json.dumps(doc, indent=1) + "\n")
