"""Configuration module for geoshift."""
