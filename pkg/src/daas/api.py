"""HTTP front end over a pipeline workspace.

The app holds one ``Workspace``; its stores are loaded on first use and
only read afterwards.
"""
from __future__ import annotations

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .composer import PDR, sort_pdrs
from .errors import DataError, PipelineError
from .harness import ExperimentConfig, Workspace
from .planner import plan_astar, plan_dijkstra_baseline
from .schemas import ComposeRequest, ComposeResponse, PDRIn, PlanRequest, PlanResponse, PredictRequest
from .timeutil import parse_ts


def to_pdr(p: PDRIn) -> PDR:
    return PDR(p.id, p.pickup_station, parse_ts(p.pickup_time), p.dropoff_station, p.weight_kg,
               parse_ts(p.request_time))


def create_app(cfg: ExperimentConfig | None = None, workspace: Workspace | None = None) -> FastAPI:
    ws = workspace or Workspace(cfg or ExperimentConfig())
    app = FastAPI(title="daas", version="0.1.0")
    app.state.workspace = ws

    @app.exception_handler(DataError)
    async def _data_error(request, exc):
        return JSONResponse(status_code=422, content={"error": "data_error", "message": str(exc)})

    @app.exception_handler(PipelineError)
    async def _pipeline_error(request, exc):
        return JSONResponse(status_code=409, content={"error": "pipeline_error", "message": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok", "config_hash": ws.cfg.config_hash}

    @app.post("/plan", response_model=PlanResponse)
    def plan(req: PlanRequest):
        net = ws.network()
        if req.planner == "dijkstra":
            route = plan_dijkstra_baseline(net, req.src, req.dst, ws.context(req.cm).speed)
        else:
            rt = parse_ts(req.request_time) if req.request_time else None
            route = plan_astar(net, req.src, req.dst, parse_ts(req.time), ws.context(req.cm), rt)
        return {"config_hash": ws.cfg.config_hash, "route": route.to_dict()}

    @app.post("/compose", response_model=ComposeResponse)
    def compose(req: ComposeRequest):
        from .harness import compose_batch
        pdrs = [to_pdr(p) for p in req.pdrs]
        plans = compose_batch(pdrs, ws.network(), ws.service_index(), ws.context(req.cm),
                              req.window_min or ws.cfg.window_min, req.planner)
        return {"config_hash": ws.cfg.config_hash, "plans": [p.to_dict() for p in plans]}

    @app.post("/predict", response_model=ComposeResponse)
    def predict(req: PredictRequest):
        pc = ws.predictor(ws.load_model())
        plans = [pc.compose(p) for p in sort_pdrs([to_pdr(p) for p in req.pdrs])]
        return {"config_hash": ws.cfg.config_hash, "plans": [p.to_dict() for p in plans]}

    return app
