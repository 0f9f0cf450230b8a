"""Shared utilities: exceptions and the metrics registry."""
