"""Numerical core of geoshift."""
