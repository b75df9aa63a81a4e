"""Wind decomposition, effective ground speed, flight time and the flyability gate.

Bearing conventions: ``wind_bearing`` is the direction the wind blows *from*
(meteorological convention), ``track_bearing`` the direction the drone flies
*to*. With theta = wind_bearing - track_bearing, theta = 0 is a pure headwind
and theta = 180 a pure tailwind.

The scalar functions are thin wrappers over array versions so the planner
and the movement simulator can evaluate whole edge tables at once.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .geo import normalize_bearing

KMH_PER_MS = 3.6
MIN_GROUND_SPEED_KMH = 1.0

CLOUD_COVER_MAX = 0.5
VISIBILITY_MIN_KM = 5.0
HUMIDITY_MAX = 0.9
DEW_POINT_MAX_C = 21.0

# gate checks in reporting order; index + 1 is the array reason code
GATE_REASONS = ("cloud_cover", "temperature", "visibility", "humidity", "dew_point", "wind")

ADDITIVE = "additive"
WIND_TRIANGLE = "wind_triangle"
MODES = (ADDITIVE, WIND_TRIANGLE)


class UntraversableError(ValueError):
    """Crosswind exceeds the drone's airspeed, so the track cannot be held."""


@dataclass(frozen=True)
class DroneType:
    name: str
    flight_time_min: float
    speed_kmh: float
    base_weight_kg: float
    max_takeoff_kg: float
    payload_kg: float
    battery_mah: float
    max_wind_kmh: float
    temp_min_c: float
    temp_max_c: float
    maintenance_min: float

    def __post_init__(self):
        positive = ("flight_time_min", "speed_kmh", "base_weight_kg", "max_takeoff_kg",
                    "payload_kg", "battery_mah", "max_wind_kmh", "maintenance_min")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{self.name}: {name} must be positive")
        if self.payload_kg > self.max_takeoff_kg - self.base_weight_kg + 1e-9:
            raise ValueError(f"{self.name}: payload exceeds take-off margin")
        if not self.temp_min_c < self.temp_max_c:
            raise ValueError(f"{self.name}: temperature range is empty")


# Max wind for the Phantom is published as a 29-38 km/h band; the low end is used.
P4_PRO = DroneType("P4-PRO", 30, 72.0, 1.388, 1.888, 0.50, 5870, 29.0, 0.0, 40.0, 5)
M200 = DroneType("M200", 38, 82.8, 3.80, 6.14, 2.34, 7660, 43.2, -20.0, 45.0, 15)
DEFAULT_FLEET = (P4_PRO, M200)


def fleet_envelope(fleet) -> DroneType:
    """Drone-agnostic stand-in used for planning before a drone is chosen.

    Speed is the fleet mean (the ground-speed average); every limit is the
    most permissive one in the fleet, so an edge is only blocked when no
    drone could fly it.
    """
    fleet = list(fleet)
    if not fleet:
        raise DataError("empty fleet")
    return DroneType(
        name="fleet",
        flight_time_min=max(d.flight_time_min for d in fleet),
        speed_kmh=sum(d.speed_kmh for d in fleet) / len(fleet),
        base_weight_kg=min(d.base_weight_kg for d in fleet),
        max_takeoff_kg=max(d.max_takeoff_kg for d in fleet),
        payload_kg=max(d.payload_kg for d in fleet),
        battery_mah=max(d.battery_mah for d in fleet),
        max_wind_kmh=max(d.max_wind_kmh for d in fleet),
        temp_min_c=min(d.temp_min_c for d in fleet),
        temp_max_c=max(d.temp_max_c for d in fleet),
        maintenance_min=min(d.maintenance_min for d in fleet),
    )


def load_drones(path) -> list[DroneType]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing input file {path}")
    try:
        doc = json.loads(path.read_text())
        return [DroneType(**d) for d in doc]
    except (TypeError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from None


def dump_drones(fleet, path):
    Path(path).write_text(json.dumps([asdict(d) for d in fleet], indent=2) + "\n")


@dataclass(frozen=True)
class WindDecomposition:
    along_track_kmh: float
    crosswind_kmh: float
    theta_deg: float


def ms_to_kmh(wind_speed_ms):
    return wind_speed_ms * KMH_PER_MS


def wind_components(wind_speed_kmh, wind_bearing, track_bearing):
    """Return (along_track, crosswind, theta); along_track > 0 is a tailwind."""
    theta = normalize_bearing(np.asarray(wind_bearing) - np.asarray(track_bearing))
    rad = np.radians(theta)
    along = -np.asarray(wind_speed_kmh) * np.cos(rad)
    cross = np.asarray(wind_speed_kmh) * np.abs(np.sin(rad))
    return along, cross, theta


def decompose_wind(wind_speed_kmh: float, wind_bearing: float, track_bearing: float) -> WindDecomposition:
    if wind_speed_kmh < 0:
        raise ValueError("wind speed must be non-negative")
    along, cross, theta = wind_components(wind_speed_kmh, float(wind_bearing), float(track_bearing))
    return WindDecomposition(float(along), float(cross), float(theta))


def ground_speed_arrays(drone_speed_kmh, along, cross, mode=ADDITIVE, min_speed=MIN_GROUND_SPEED_KMH):
    """Vectorised effective ground speed; NaN marks untraversable entries."""
    along = np.asarray(along, dtype=float)
    cross = np.asarray(cross, dtype=float)
    if mode == ADDITIVE:
        gs = drone_speed_kmh + along
    elif mode == WIND_TRIANGLE:
        head = np.square(drone_speed_kmh) - np.square(cross)
        with np.errstate(invalid="ignore"):
            gs = np.where(head >= 0, np.sqrt(np.maximum(head, 0.0)) + along, np.nan)
    else:
        raise ValueError(f"unknown airspeed mode {mode!r}")
    return np.where(np.isnan(gs), np.nan, np.maximum(gs, min_speed))


def drone_airspeed(drone_speed_kmh: float, wind: WindDecomposition, mode: str = ADDITIVE,
                   min_speed: float = MIN_GROUND_SPEED_KMH) -> float:
    """Effective speed along the track once the wind is accounted for."""
    if not drone_speed_kmh > 0:
        raise ValueError("drone speed must be positive")
    gs = float(ground_speed_arrays(drone_speed_kmh, wind.along_track_kmh, wind.crosswind_kmh, mode, min_speed))
    if math.isnan(gs):
        raise UntraversableError(
            f"crosswind {wind.crosswind_kmh:.2f} km/h exceeds airspeed {drone_speed_kmh:.2f} km/h"
        )
    return gs


def flight_duration_min(distance_km: float, ground_speed_kmh: float) -> float:
    if distance_km < 0:
        raise ValueError("distance must be non-negative")
    if not ground_speed_kmh > 0:
        raise ValueError("ground speed must be positive")
    return distance_km / ground_speed_kmh * 60.0


def gate_codes(cloud_cover, temperature_c, visibility_km, humidity, dew_point_c, wind_kmh,
               temp_min_c, temp_max_c, max_wind_kmh):
    """0 where flyable, else 1 + index into GATE_REASONS of the first failed check."""
    checks = [
        np.asarray(cloud_cover) < CLOUD_COVER_MAX,
        (temp_min_c < np.asarray(temperature_c)) & (np.asarray(temperature_c) < temp_max_c),
        np.asarray(visibility_km) > VISIBILITY_MIN_KM,
        np.asarray(humidity) < HUMIDITY_MAX,
        np.asarray(dew_point_c) < DEW_POINT_MAX_C,
        np.asarray(wind_kmh) <= max_wind_kmh,
    ]
    code = np.zeros(np.broadcast(*checks).shape, dtype=np.int8)
    # reverse so the earliest failing check wins
    for i in range(len(checks) - 1, -1, -1):
        code = np.where(checks[i], code, i + 1)
    return code


def is_flyable(adjusted, drone: DroneType) -> tuple[bool, str | None]:
    """Check an already margin-adjusted weather record against every limit.

    All conditions must hold. On failure the first violated condition in the
    order cloud cover, temperature, visibility, humidity, dew point, wind is
    reported.
    """
    code = int(gate_codes(
        adjusted.cloud_cover,
        adjusted.temperature_c,
        adjusted.visibility_km,
        adjusted.humidity,
        adjusted.dew_point_c,
        ms_to_kmh(adjusted.wind_speed_ms),
        drone.temp_min_c,
        drone.temp_max_c,
        drone.max_wind_kmh,
    ))
    if code == 0:
        return True, None
    return False, GATE_REASONS[code - 1]
