"""geoshift core services.

spatial and simulate build learning problems, shiftfns scores their shift,
dre, models and validate estimate errors, ingest and experiment drive runs.
"""
