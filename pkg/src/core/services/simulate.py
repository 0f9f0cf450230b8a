"""Gaussian process simulation, covariate shifts and synthetic labels.

Random streams: every simulation seeds ``SeedSequence(seed)`` and spawns one
child per process column; each child drives its own ``Generator(PCG64)``.
"""
import math
from typing import Callable, Tuple

import numpy as np
from loguru import logger
from scipy.spatial.distance import cdist

from src.config.settings import get_settings_instance
from src.core.services.spatial import SpatialDataset, grid_sites
from src.schemas.simulation import (
    LabelingFunction,
    ShiftSpec,
    SimulationMethod,
    SimulationSpec,
)
from src.schemas.spatial import RegularGrid, VariogramKind, VariogramModel
from src.utils.exceptions import SimulationError, ValidationError
from src.utils.metrics_registry import SIMULATION_COUNT

# Stand-in range for r = 0: covariance vanishes at every nonzero lag
MIN_RANGE = 1e-9
# Times the embedding may double before giving up
_MAX_EMBEDDING_DOUBLINGS = 3


def generator_for(seed) -> np.random.Generator:
    """Portable PCG64 generator for an integer seed or a SeedSequence."""
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(*entropy: int) -> int:
    """64-bit seed derived from a tuple of nonnegative integers."""
    return int(np.random.SeedSequence(list(entropy)).generate_state(1, dtype=np.uint64)[0])


def target_params(shift: ShiftSpec) -> Tuple[float, float]:
    """Target mean and standard deviation for a source fixed at N(0, 1)."""
    return 3.0 * math.sqrt(2.0) * shift.delta, shift.tau


def variogram_for_range(r: float, sill: float = 1.0,
                        kind: VariogramKind = VariogramKind.gaussian) -> VariogramModel:
    """Variogram with correlation length ``r``; r = 0 means white noise."""
    return VariogramModel(kind=kind, range=max(float(r), MIN_RANGE), sill=sill)


def _embedding_eigenvalues(grid: RegularGrid, variogram: VariogramModel,
                           shape: Tuple[int, ...]) -> np.ndarray:
    lags = np.meshgrid(
        *[np.minimum(np.arange(m), m - np.arange(m)) * s for m, s in zip(shape, grid.spacing)],
        indexing="ij",
    )
    distance = np.sqrt(sum(lag ** 2 for lag in lags))
    return np.fft.fftn(variogram.covariance(distance)).real


def _circulant_embedding(grid: RegularGrid, variogram: VariogramModel) -> np.ndarray:
    """Nonnegative eigenvalues of a valid periodic embedding of the covariance."""
    tolerance = get_settings_instance().embedding_tolerance
    half = [max(n, math.ceil(3.0 * variogram.range / s)) for n, s in zip(grid.dims, grid.spacing)]
    for doubling in range(_MAX_EMBEDDING_DOUBLINGS + 1):
        shape = tuple(2 * h * 2 ** doubling for h in half)
        eigenvalues = _embedding_eigenvalues(grid, variogram, shape)
        peak = float(eigenvalues.max())
        lowest = float(eigenvalues.min())
        if lowest >= -tolerance * peak:
            logger.debug(f"Circulant embedding {shape} accepted (min eigenvalue {lowest:.3e})")
            return np.maximum(eigenvalues, 0.0)
        logger.debug(f"Circulant embedding {shape} rejected (min eigenvalue {lowest:.3e})")
    raise SimulationError(
        f"circulant embedding has negative eigenvalues beyond {tolerance:g} of the maximum"
    )


def _spectral_unit_fields(grid: RegularGrid, variogram: VariogramModel,
                          rngs) -> np.ndarray:
    unit = variogram.model_copy(update={"sill": 1.0})
    eigenvalues = _circulant_embedding(grid, unit)
    amplitude = np.sqrt(eigenvalues / eigenvalues.size)
    window = tuple(slice(0, n) for n in grid.dims)
    columns = []
    for rng in rngs:
        noise = rng.standard_normal(eigenvalues.shape) + 1j * rng.standard_normal(eigenvalues.shape)
        field = np.fft.fftn(amplitude * noise).real[window]
        columns.append(field.ravel(order="F"))
    return np.column_stack(columns)


def _lu_unit_fields(coords: np.ndarray, variogram: VariogramModel, rngs) -> np.ndarray:
    settings = get_settings_instance()
    if coords.shape[0] > settings.lu_max_sites:
        raise SimulationError(
            f"LU simulation limited to {settings.lu_max_sites} sites, got {coords.shape[0]}"
        )
    unit = variogram.model_copy(update={"sill": 1.0})
    covariance = unit.covariance(cdist(coords, coords))
    jitter = settings.jitter_start
    while True:
        try:
            factor = np.linalg.cholesky(covariance + jitter * np.eye(coords.shape[0]))
            break
        except np.linalg.LinAlgError:
            jitter *= 10.0
            if jitter > settings.jitter_max * (1 + 1e-9):
                raise SimulationError(
                    f"Cholesky factorization failed with diagonal jitter up to "
                    f"{settings.jitter_max:g} of the sill"
                )
            logger.debug(f"Cholesky failed, retrying with jitter {jitter:g}")
    return np.column_stack([factor @ rng.standard_normal(coords.shape[0]) for rng in rngs])


def _combine(unit: np.ndarray, variogram: VariogramModel, mean: float, rho: float) -> np.ndarray:
    if unit.shape[1] == 2 and rho != 0:
        unit = np.column_stack([unit[:, 0], rho * unit[:, 0] + math.sqrt(1.0 - rho ** 2) * unit[:, 1]])
    return mean + math.sqrt(variogram.sill) * unit


def simulate(spec: SimulationSpec) -> SpatialDataset:
    """Realizations of ``spec.n_processes`` Gaussian processes over the grid.

    Fields are drawn with unit sill and zero mean, mixed for the requested
    cross-correlation, then scaled by sqrt(sill) and shifted by the mean.
    """
    rngs = [generator_for(child) for child in np.random.SeedSequence(spec.seed).spawn(spec.n_processes)]
    coords = grid_sites(spec.grid)
    if spec.method == SimulationMethod.spectral:
        unit = _spectral_unit_fields(spec.grid, spec.variogram, rngs)
    else:
        unit = _lu_unit_fields(coords, spec.variogram, rngs)
    SIMULATION_COUNT.labels(method=spec.method.value).inc()
    return SpatialDataset(coords=coords, features=_combine(unit, spec.variogram, spec.mean, spec.rho))


def simulate_points(
    coords: np.ndarray,
    variogram: VariogramModel,
    mean: float = 0.0,
    n_processes: int = 1,
    rho: float = 0.0,
    method: SimulationMethod = SimulationMethod.lu,
    seed: int = 0,
) -> SpatialDataset:
    """Direct simulation at scattered locations; only the LU method applies."""
    if SimulationMethod(method) != SimulationMethod.lu:
        raise SimulationError("spectral simulation requires a regular grid")
    if rho != 0 and n_processes != 2:
        raise ValidationError("rho requires exactly two processes")
    coords = np.asarray(coords, dtype=float)
    rngs = [generator_for(child) for child in np.random.SeedSequence(seed).spawn(n_processes)]
    unit = _lu_unit_fields(coords, variogram, rngs)
    SIMULATION_COUNT.labels(method=SimulationMethod.lu.value).inc()
    return SpatialDataset(coords=coords, features=_combine(unit, variogram, mean, rho))


def label_features(lf: LabelingFunction, features: np.ndarray) -> np.ndarray:
    """Vectorized labeling: +1 where sin(w * ||x||_p) >= 0, else -1."""
    features = np.atleast_2d(np.asarray(features, dtype=float))
    norms = np.linalg.norm(features, ord=lf.p, axis=1)
    return np.where(np.sin(lf.w * norms) >= 0, 1, -1)


def label(lf: LabelingFunction, features) -> int:
    """Label of a single feature vector."""
    return int(label_features(lf, np.asarray(features, dtype=float)[None, :])[0])


def simulate_domain(
    mean: float,
    sigma: float,
    r: float,
    grid: RegularGrid,
    lf: LabelingFunction,
    seed: int,
) -> SpatialDataset:
    """Two independent processes N(mean, sigma^2) with range ``r``, labeled by ``lf``."""
    spec = SimulationSpec(
        grid=grid,
        variogram=variogram_for_range(r, sill=sigma ** 2),
        mean=mean,
        n_processes=2,
        rho=0.0,
        method=SimulationMethod.spectral,
        seed=seed,
    )
    data = simulate(spec)
    return data.with_labels(label_features(lf, data.features))


def make_problem(
    shift: ShiftSpec,
    r: float,
    grid: RegularGrid,
    lf: LabelingFunction,
    seed: int,
) -> Tuple[SpatialDataset, SpatialDataset]:
    """Labeled source N(0, 1) and target N(mu_t, tau^2) domains over the same grid."""
    source_seed, target_seed = (derive_seed(seed, i) for i in range(2))
    mu_t, sigma_t = target_params(shift)
    source = simulate_domain(0.0, 1.0, r, grid, lf, source_seed)
    target = simulate_domain(mu_t, sigma_t, r, grid, lf, target_seed)
    return source, target


def target_generator(
    shift: ShiftSpec,
    r: float,
    grid: RegularGrid,
    lf: LabelingFunction,
) -> Callable[[int], SpatialDataset]:
    """Seed -> fresh labeled target realization, for Monte Carlo error estimates."""
    mu_t, sigma_t = target_params(shift)

    def generate(seed: int) -> SpatialDataset:
        return simulate_domain(mu_t, sigma_t, r, grid, lf, seed)

    return generate
