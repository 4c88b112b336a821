"""Gestational-age estimation from ultrasound images and fly-to videos."""

__version__ = "0.1.0"
