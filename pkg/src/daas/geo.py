"""Spherical-earth geodesy helpers.

All angles are stored in degrees and only converted to radians inside the
trig calls.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EARTH_RADIUS_KM = 6371.0088


class CoincidentPointsError(ValueError):
    """Raised when a bearing is requested between identical points."""


@dataclass(frozen=True, order=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError(f"non-finite coordinate {self.lat!r}, {self.lon!r}")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")


def normalize_bearing(deg):
    """Wrap compass degrees into [0, 360). Works on scalars and arrays."""
    out = np.mod(deg, 360.0)
    # np.mod(-1e-17, 360) rounds to 360.0
    out = np.where(out >= 360.0, 0.0, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class Bearing:
    degrees: float

    def __post_init__(self):
        object.__setattr__(self, "degrees", normalize_bearing(self.degrees))

    def reversed(self) -> "Bearing":
        return Bearing(self.degrees + 180.0)

    def __float__(self):
        return self.degrees


def haversine_arrays(lat1, lon1, lat2, lon2):
    """Great-circle distance in km; vectorised over numpy inputs."""
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dphi = p2 - p1
    dlmb = np.radians(lon2) - np.radians(lon1)
    a = np.sin(dphi / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlmb / 2) ** 2
    a = np.clip(a, 0.0, 1.0)
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(a))


def bearing_arrays(lat1, lon1, lat2, lon2):
    """Initial great-circle bearing in compass degrees; vectorised."""
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dlmb = np.radians(lon2) - np.radians(lon1)
    y = np.sin(dlmb) * np.cos(p2)
    x = np.cos(p1) * np.sin(p2) - np.sin(p1) * np.cos(p2) * np.cos(dlmb)
    return normalize_bearing(np.degrees(np.arctan2(y, x)))


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    if a == b:
        return 0.0
    return float(haversine_arrays(a.lat, a.lon, b.lat, b.lon))


def compass_bearing(a: GeoPoint, b: GeoPoint) -> Bearing:
    """Initial bearing when leaving ``a`` on the great circle toward ``b``."""
    if a == b:
        raise CoincidentPointsError(f"bearing undefined for coincident points {a}")
    return Bearing(float(bearing_arrays(a.lat, a.lon, b.lat, b.lon)))


def destination_point(origin: GeoPoint, bearing_deg: float, distance_km: float) -> GeoPoint:
    """Point reached by travelling ``distance_km`` from ``origin`` along a great circle."""
    delta = distance_km / EARTH_RADIUS_KM
    theta = math.radians(bearing_deg)
    p1, l1 = math.radians(origin.lat), math.radians(origin.lon)
    p2 = math.asin(math.sin(p1) * math.cos(delta) + math.cos(p1) * math.sin(delta) * math.cos(theta))
    l2 = l1 + math.atan2(
        math.sin(theta) * math.sin(delta) * math.cos(p1),
        math.cos(delta) - math.sin(p1) * math.sin(p2),
    )
    lon = (math.degrees(l2) + 540.0) % 360.0 - 180.0
    return GeoPoint(math.degrees(p2), lon)
