"""Predictive composition: learn the composer's hand-off choices and replay
them with a classifier.

Every hand-off decision contributes one row per admissible candidate,
labelled 1 for the leg the composer took. Rows carry four feature blocks:
the request, the route segment, the margin-adjusted weather at the segment
source and the candidate-availability counts. The named feature sets are
unions of these blocks.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .classifiers import GAUSSIAN_NB, KINDS, make_model, model_from_params
from .composer import (
    ASTAR,
    PDR,
    Candidate,
    CompositePlan,
    ServiceIndex,
    TemporalDomain,
    compose,
    filter_candidates,
    plan_route,
    sort_pdrs,
)
from .errors import DataError, NoRouteError, ParseError
from .network import SkywayNetwork
from .planner import PlanContext, Route
from .timeutil import epoch_hour
from .weather import ATTRIBUTES, adjust_arrays

PDR_BLOCK = ["pickup_lat", "pickup_lon", "dropoff_lat", "dropoff_lon", "weight_kg", "pickup_hour", "request_hour"]
SEGMENT_BLOCK = ["seg_src_lat", "seg_src_lon", "seg_dst_lat", "seg_dst_lon", "seg_distance_km", "seg_bearing",
                 "seg_index", "route_segments"]
WEATHER_BLOCK = [f"wx_{a}" for a in ATTRIBUTES]
ST_BLOCK = ["spatial_count", "temporal_count", "weight_count", "departure_slack_min"]
COLUMNS = PDR_BLOCK + SEGMENT_BLOCK + WEATHER_BLOCK + ST_BLOCK

_offsets = np.cumsum([0, len(PDR_BLOCK), len(SEGMENT_BLOCK), len(WEATHER_BLOCK), len(ST_BLOCK)])
_P, _S, _W, _T = (list(range(_offsets[i], _offsets[i + 1])) for i in range(4))
FEATURE_SETS = {
    "X1": _P,
    "X2": _P + _S,
    "X3": _P + _S + _W,
    "X4": _P + _S + _T,
    "X5": _P + _S + _W + _T,
}


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    feature_set: str
    label: int

    def __post_init__(self):
        if len(self.values) != len(FEATURE_SETS[self.feature_set]):
            raise ValueError(f"{self.feature_set} expects {len(FEATURE_SETS[self.feature_set])} values")


class StationWeather:
    """Margin-adjusted weather per station at the planning hour, cached."""

    def __init__(self, ctx: PlanContext):
        self.ctx = ctx
        self._cache: dict[tuple, np.ndarray] = {}

    def at(self, when: float, request_time: float | None) -> np.ndarray:
        ctx = self.ctx
        from .planner import lead_for
        lead = lead_for(when, request_time) if ctx.use_forecast and ctx.weather.forecast is not None else None
        key = (ctx.weather.hour_index(when), lead)
        out = self._cache.get(key)
        if out is None:
            snap = ctx.weather.snapshot(when, lead)[ctx._order]
            out = adjust_arrays(snap, ctx.sigma, ctx.cm, (ctx.envelope.temp_min_c, ctx.envelope.temp_max_c))
            self._cache[key] = out
        return out


def decision_prefix(pdr: PDR, route: Route, i: int, net: SkywayNetwork, wx: np.ndarray) -> np.ndarray:
    """The candidate-independent part of a row: request, segment and weather blocks."""
    p, d = net.station(pdr.pickup_loc).location, net.station(pdr.dropoff_loc).location
    seg = route.segments[i]
    a, b = net.station(seg.source).location, net.station(seg.destination).location
    bearing = net.skyways[seg.skyway].bearing_from(seg.source)
    return np.concatenate([
        [p.lat, p.lon, d.lat, d.lon, pdr.weight_kg, epoch_hour(pdr.pickup_time), epoch_hour(pdr.request_time)],
        [a.lat, a.lon, b.lat, b.lon, seg.distance_km, bearing, i + 1, len(route.segments)],
        wx[net.index[seg.source]],
    ])


def extract_features(pdr: PDR, route: Route, segment_index: int, net: SkywayNetwork, candidate: Candidate,
                     weather_values: np.ndarray, counts: tuple[int, int, int], clock: float,
                     label: int = 0) -> dict[str, FeatureVector]:
    """All five feature vectors for one candidate at one hand-off."""
    wx = np.zeros((len(net.station_ids), len(ATTRIBUTES)))
    wx[net.index[route.segments[segment_index].source]] = weather_values
    row = np.concatenate([decision_prefix(pdr, route, segment_index, net, wx),
                          [*counts, (candidate.departure - clock) / 60.0]])
    return {name: FeatureVector(row[idx], name, label) for name, idx in FEATURE_SETS.items()}


@dataclass
class Dataset:
    X: np.ndarray  # (rows, len(COLUMNS))
    y: np.ndarray
    group: np.ndarray  # decision id
    departure: np.ndarray
    service_id: np.ndarray

    def __len__(self):
        return len(self.y)

    @property
    def n_decisions(self) -> int:
        return len(np.unique(self.group))

    def write_csv(self, path, header_comment: str | None = None):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["decision", "service_id", "departure", "label", *COLUMNS])
            for i in range(len(self.y)):
                w.writerow([int(self.group[i]), int(self.service_id[i]), repr(float(self.departure[i])),
                            int(self.y[i]), *map(repr, self.X[i].tolist())])

    @classmethod
    def read_csv(cls, path) -> "Dataset":
        from .network import read_csv_table
        rows = read_csv_table(path, ["decision", "service_id", "departure", "label", *COLUMNS])
        try:
            X = np.array([[float(r[c]) for c in COLUMNS] for _, r in rows]).reshape(len(rows), len(COLUMNS))
            return cls(X, np.array([int(r["label"]) for _, r in rows]),
                       np.array([int(r["decision"]) for _, r in rows]),
                       np.array([float(r["departure"]) for _, r in rows]),
                       np.array([int(r["service_id"]) for _, r in rows]))
        except ValueError as exc:
            raise ParseError(path, 0, str(exc)) from None


def _st_block(stages_spatial: int, stages_temporal: int, departures: np.ndarray, clock: float) -> np.ndarray:
    n = len(departures)
    return np.column_stack([np.full(n, stages_spatial), np.full(n, stages_temporal), np.full(n, n),
                            (departures - clock) / 60.0])


def build_corpus(pdrs, net: SkywayNetwork, services: ServiceIndex, ctx: PlanContext,
                 window_min: float = 15.0) -> tuple[Dataset, list[CompositePlan]]:
    """Run the composer over ``pdrs`` and record every hand-off decision."""
    wx_view = StationWeather(ctx)
    blocks, ys, groups, deps, sids = [], [], [], [], []
    plans = []
    decision = 0
    for pdr in sort_pdrs(pdrs):
        try:
            route = plan_route(pdr, net, ctx, ASTAR)
        except NoRouteError:
            plans.append(compose(pdr, net, services, ctx, window_min))
            continue
        wx = wx_view.at(pdr.pickup_time, pdr.request_time)

        def decide(i, key, clock):
            nonlocal decision
            st = filter_candidates(key, services, TemporalDomain.after(clock, window_min), pdr.weight_kg)
            if not st.admissible:
                return None
            chosen = st.admissible[0]
            d = np.array([c.departure for c in st.admissible])
            prefix = decision_prefix(pdr, route, i, net, wx)
            rows = np.hstack([np.tile(prefix, (len(d), 1)), _st_block(st.spatial, st.temporal, d, clock)])
            blocks.append(rows)
            ys.append(np.array([c is chosen for c in st.admissible], dtype=np.int64))
            groups.append(np.full(len(d), decision))
            deps.append(d)
            sids.append(np.array([c.service_id for c in st.admissible]))
            decision += 1
            return chosen

        plans.append(compose(pdr, net, services, ctx, window_min, ASTAR, decide=decide, route=route))
    if not blocks:
        empty = np.zeros((0, len(COLUMNS)))
        return Dataset(empty, np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0), np.zeros(0, np.int64)), plans
    return Dataset(np.vstack(blocks), np.concatenate(ys), np.concatenate(groups), np.concatenate(deps),
                   np.concatenate(sids)), plans


@dataclass
class TrainedModel:
    kind: str
    feature_set: str
    model: object
    mean: np.ndarray
    std: np.ndarray

    @property
    def columns(self) -> list[int]:
        return FEATURE_SETS[self.feature_set]

    def transform(self, X_full: np.ndarray) -> np.ndarray:
        return (np.asarray(X_full)[:, self.columns] - self.mean) / self.std

    def score(self, X_full: np.ndarray) -> np.ndarray:
        return self.model.decision_function(self.transform(X_full))

    def to_json(self) -> str:
        return json.dumps({
            "kind": self.kind,
            "feature_set": self.feature_set,
            "features": [COLUMNS[i] for i in self.columns],
            "normalization": {"mean": self.mean.tolist(), "std": self.std.tolist()},
            "parameters": self.model.params(),
        }, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "TrainedModel":
        doc = json.loads(text)
        model = model_from_params(doc["kind"], doc["parameters"])
        return cls(doc["kind"], doc["feature_set"], model, np.array(doc["normalization"]["mean"]),
                   np.array(doc["normalization"]["std"]))


def fit_model(X_full: np.ndarray, y: np.ndarray, kind: str, feature_set: str, seed: int = 0) -> TrainedModel:
    if kind not in KINDS:
        raise DataError(f"unknown classifier {kind!r}")
    if feature_set not in FEATURE_SETS:
        raise DataError(f"unknown feature set {feature_set!r}")
    if len(np.unique(y)) < 2:
        raise DataError("training data holds a single class")
    X = np.asarray(X_full)[:, FEATURE_SETS[feature_set]]
    if kind == GAUSSIAN_NB:
        mean, std = np.zeros(X.shape[1]), np.ones(X.shape[1])
    else:
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std = np.where(std > 0, std, 1.0)
    model = make_model(kind).fit((X - mean) / std, y, seed)
    return TrainedModel(kind, feature_set, model, mean, std)


def assign_folds(groups: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Fold per row; whole decisions move together and labels play no part."""
    uniq, inv = np.unique(groups, return_inverse=True)
    perm = np.random.default_rng(seed).permutation(len(uniq))
    fold_of = np.empty(len(uniq), dtype=np.int64)
    fold_of[perm] = np.arange(len(uniq)) % k
    return fold_of[inv]


def tie_tolerance(top):
    """Scores this close to the best count as tied; identical rows can differ in
    the last bits depending on where they sit in a matrix product."""
    return 1e-9 * np.maximum(1.0, np.abs(top))


def segment_accuracy(scores: np.ndarray, y: np.ndarray, groups: np.ndarray) -> float:
    """Mean over decisions of the credit for picking the composer's leg.

    A decision whose top score is shared by t candidates earns 1/t when the
    composer's leg is among them: the model cannot tell them apart, so this
    is the expected hit rate of a random pick among the tie.
    """
    order = np.lexsort((scores, groups))
    g, s, lab = groups[order], scores[order], y[order]
    starts = np.flatnonzero(np.r_[True, g[1:] != g[:-1]])
    top = np.maximum.reduceat(s, starts)
    top_row = np.repeat(top, np.diff(np.r_[starts, len(g)]))
    tied = s >= top_row - tie_tolerance(top_row)
    n_tied = np.add.reduceat(tied.astype(np.int64), starts)
    hit = np.add.reduceat((tied & (lab == 1)).astype(np.int64), starts) > 0
    return float(np.mean(np.where(hit, 1.0 / n_tied, 0.0)))


@dataclass
class TrainResult:
    model: TrainedModel  # fitted on every row
    fold_models: list[TrainedModel]
    cv_accuracy: float  # per decision
    candidate_accuracy: float  # per row, score > 0 against the label
    fold_accuracy: list[float] = field(default_factory=list)


def train(dataset: Dataset, kind: str, feature_set: str = "X5", folds: int = 10, seed: int = 0) -> TrainResult:
    if len(np.unique(dataset.y)) < 2:
        raise DataError("dataset holds a single class")
    if folds < 2:
        raise DataError("need at least two folds")
    fold = assign_folds(dataset.group, folds, seed)
    sizes = np.bincount(fold, minlength=folds)
    if sizes.min() < 2:
        raise DataError(f"a fold holds {int(sizes.min())} samples; need at least 2")
    scores = np.empty(len(dataset))
    models, accs = [], []
    for f in range(folds):
        test = fold == f
        tm = fit_model(dataset.X[~test], dataset.y[~test], kind, feature_set, seed + f)
        scores[test] = tm.score(dataset.X[test])
        accs.append(segment_accuracy(scores[test], dataset.y[test], dataset.group[test]))
        models.append(tm)
    cv = segment_accuracy(scores, dataset.y, dataset.group)
    cand = float(np.mean((scores > 0) == (dataset.y == 1)))
    final = fit_model(dataset.X, dataset.y, kind, feature_set, seed)
    return TrainResult(final, models, cv, cand, accs)


def predict_select(model: TrainedModel, features: np.ndarray, departures, service_ids) -> int:
    """Service id of the highest-scoring candidate; earliest departure, then lower id, on ties."""
    features = np.asarray(features, dtype=float)
    if len(features) == 0:
        raise DataError("no candidates to choose from")
    sids = np.asarray(service_ids)
    if len(features) == 1:
        return int(sids[0])
    s = model.score(features)
    best = np.flatnonzero(s >= s.max() - tie_tolerance(s.max()))
    deps = np.asarray(departures, dtype=float)[best]
    pick = best[np.lexsort((sids[best], deps))[0]]
    return int(sids[pick])


class PredictiveComposer:
    """Hand-offs chosen by a trained model over a direct window lookup."""

    def __init__(self, model: TrainedModel, net: SkywayNetwork, services: ServiceIndex, ctx: PlanContext,
                 window_min: float = 15.0):
        self.model = model
        self.net = net
        self.services = services
        self.ctx = ctx
        self.window_min = window_min
        self.weather = StationWeather(ctx)
        self._w = np.zeros(len(COLUMNS))
        self._linear = hasattr(model.model, "w")
        if self._linear:
            # fold the normalisation into one weight vector over the full row
            self._w[model.columns] = model.model.w / model.std
            self._b = model.model.b - float(np.sum(model.model.w * model.mean / model.std))

    def decider(self, pdr: PDR, route: Route):
        wx = self.weather.at(pdr.pickup_time, pdr.request_time)
        services, net, window = self.services, self.net, self.window_min * 60.0
        cache = {}

        def decide(i, key, clock):
            arr = services.arrays.get(key)
            if arr is None:
                return None
            deps, payload = arr
            lo = int(np.searchsorted(deps, clock, "left"))
            hi = int(np.searchsorted(deps, clock + window, "right"))
            if hi == lo:
                return None
            ok = np.flatnonzero(payload[lo:hi] >= pdr.weight_kg)
            if len(ok) == 0:
                return None
            legs = services.by_segment[key]
            if len(ok) == 1:
                return legs[lo + ok[0]]
            if i not in cache:
                cache[i] = decision_prefix(pdr, route, i, net, wx)
            row = np.empty((len(ok), len(COLUMNS)))
            row[:, :-4] = cache[i]
            row[:, -4] = len(deps)
            row[:, -3] = hi - lo
            row[:, -2] = len(ok)
            row[:, -1] = (deps[lo + ok] - clock) / 60.0
            if self._linear:
                s = row @ self._w + self._b
            else:
                s = self.model.score(row)
            # candidates are in departure order, so the first near-maximum is the earliest
            top = s.max()
            return legs[lo + ok[int(np.argmax(s >= top - tie_tolerance(top)))]]

        return decide

    def compose(self, pdr: PDR, route: Route | None = None) -> CompositePlan:
        if route is None:
            try:
                route = plan_route(pdr, self.net, self.ctx, ASTAR)
            except NoRouteError:
                return compose(pdr, self.net, self.services, self.ctx, self.window_min)
        return compose(pdr, self.net, self.services, self.ctx, self.window_min, ASTAR,
                       decide=self.decider(pdr, route), route=route)


@dataclass
class LatencyRow:
    path: str
    selections: int
    mean_ms: float
    p95_ms: float


def benchmark_latency(pdrs, net: SkywayNetwork, services: ServiceIndex, ctx: PlanContext,
                      predictor: PredictiveComposer | None, window_min: float = 15.0,
                      repeats: int = 1) -> list[LatencyRow]:
    """Per hand-off wall time of the filter composer and of the predictor on the
    same routes. Routes are planned once up front and not timed."""
    from .composer import first_admissible, select_services
    pdrs = sort_pdrs(pdrs)
    if not pdrs:
        return []
    routes = []
    for p in pdrs:
        try:
            routes.append((p, plan_route(p, net, ctx, ASTAR)))
        except NoRouteError:
            continue
    timings = {"composer": [], "predictor": []}

    def timed(decide, sink):
        def inner(i, key, clock):
            t0 = time.perf_counter()
            out = decide(i, key, clock)
            sink.append(time.perf_counter() - t0)
            return out
        return inner

    for _ in range(repeats):
        for p, route in routes:
            select_services(p, route, services, window_min,
                            timed(first_admissible(services, window_min, p.weight_kg), timings["composer"]))
            if predictor is not None:
                select_services(p, route, services, window_min, timed(predictor.decider(p, route), timings["predictor"]))
    out = []
    for name, ts in timings.items():
        if not ts:
            continue
        arr = np.array(ts) * 1000.0
        out.append(LatencyRow(name, len(arr), float(arr.mean()), float(np.percentile(arr, 95))))
    return out
