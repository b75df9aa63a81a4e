"""Request and response models for the HTTP service."""
from __future__ import annotations

from pydantic import BaseModel, Field, model_validator

from .timeutil import parse_ts


class PDRIn(BaseModel):
    id: int
    pickup_station: str
    pickup_time: str
    dropoff_station: str
    weight_kg: float = Field(gt=0)
    request_time: str

    @model_validator(mode="after")
    def _check(self):
        if self.pickup_station == self.dropoff_station:
            raise ValueError("pickup and drop-off must differ")
        if parse_ts(self.request_time) > parse_ts(self.pickup_time):
            raise ValueError("request_time is after pickup_time")
        return self


class PlanRequest(BaseModel):
    src: str
    dst: str
    time: str
    request_time: str | None = None
    planner: str = Field("astar", pattern="^(astar|dijkstra)$")
    cm: float | None = Field(None, ge=0)


class SegmentOut(BaseModel):
    skyway: int
    source: str
    destination: str
    distance_km: float
    duration_min: float


class RouteOut(BaseModel):
    stations: list[str]
    skyways: list[int]
    distance_km: float
    duration_min: float
    segments: list[SegmentOut]


class PlanResponse(BaseModel):
    config_hash: str
    route: RouteOut


class ComposeRequest(BaseModel):
    pdrs: list[PDRIn]
    planner: str = Field("astar", pattern="^(astar|dijkstra)$")
    cm: float | None = Field(None, ge=0)
    window_min: float | None = Field(None, gt=0)


class PredictRequest(BaseModel):
    pdrs: list[PDRIn]


class SelectionOut(BaseModel):
    segment: int
    source: str
    destination: str
    service_id: int
    departure: str
    arrival: str
    drone: str
    repeat: bool


class PlanOut(BaseModel):
    pdr: int
    planner: str
    status: str
    route: RouteOut | None
    selections: list[SelectionOut]
    total_distance_km: float
    total_duration_min: float
    service_count: int
    failed_segment: list[str] | None = None
    reason: str | None = None


class ComposeResponse(BaseModel):
    config_hash: str
    plans: list[PlanOut]


class ErrorOut(BaseModel):
    error: str
    message: str
