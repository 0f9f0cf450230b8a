"""Centralized metrics registry for the application."""
from prometheus_client import Counter, Histogram, CollectorRegistry

# Process-local registry; nothing is served over HTTP
REGISTRY = CollectorRegistry(auto_describe=True)

SIMULATION_COUNT = Counter(
    'field_simulations_total',
    'Number of simulated Gaussian fields',
    ['method'],
    registry=REGISTRY,
)

LSIF_SOLVE_COUNT = Counter(
    'lsif_solves_total',
    'Number of LSIF quadratic program solves',
    ['status'],
    registry=REGISTRY,
)

FOLD_EVALUATION_COUNT = Counter(
    'fold_evaluations_total',
    'Number of folds trained and evaluated',
    ['strategy'],
    registry=REGISTRY,
)

DRV_STATUS_COUNT = Counter(
    'drv_estimates_total',
    'DRV estimates by status',
    ['status'],
    registry=REGISTRY,
)

SWEEP_CELL_TIME = Histogram(
    'sweep_cell_seconds',
    'Time spent on one sweep cell',
    ['model'],
    buckets=[0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0, 60.0],
    registry=REGISTRY,
)


def sample_value(name: str, **labels: str) -> float:
    """Read the current value of a metric sample, 0.0 when absent."""
    value = REGISTRY.get_sample_value(name, labels or None)
    return float(value) if value is not None else 0.0
