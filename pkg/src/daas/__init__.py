"""Drone-as-a-Service composition over a Skyway network under weather uncertainty."""

__version__ = "0.1.0"
