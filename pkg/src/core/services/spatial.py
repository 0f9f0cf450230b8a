"""Spatial datasets, grid enumeration and empirical variograms."""
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy.optimize import least_squares
from scipy.spatial.distance import cdist

from src.config.settings import get_settings_instance
from src.schemas.spatial import RegularGrid, VariogramKind, VariogramModel
from src.utils.exceptions import ValidationError, VariogramFitError

# Rows per block when enumerating point pairs
_PAIR_CHUNK = 256


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class SpatialDataset:
    """Located samples: coordinates, features and optional labels."""
    coords: np.ndarray
    features: np.ndarray
    labels: Optional[np.ndarray] = None
    feature_names: Optional[Tuple[str, ...]] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        coords = np.asarray(self.coords, dtype=float)
        features = np.asarray(self.features, dtype=float)
        if coords.ndim == 1:
            coords = coords[:, None]
        if features.ndim == 1:
            features = features[:, None]
        if coords.ndim != 2 or features.ndim != 2:
            raise ValidationError("coords and features must be 2D matrices")
        if coords.shape[0] < 1:
            raise ValidationError("dataset must contain at least one sample")
        if coords.shape[0] != features.shape[0]:
            raise ValidationError(
                f"coords ({coords.shape[0]}) and features ({features.shape[0]}) row counts differ"
            )
        if not (np.all(np.isfinite(coords)) and np.all(np.isfinite(features))):
            raise ValidationError("coords and features must be finite")
        object.__setattr__(self, "coords", _frozen(coords))
        object.__setattr__(self, "features", _frozen(features))

        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (coords.shape[0],):
                raise ValidationError(f"labels must have length {coords.shape[0]}")
            object.__setattr__(self, "labels", _frozen(labels))
        if self.feature_names is not None:
            names = tuple(self.feature_names)
            if len(names) != features.shape[1]:
                raise ValidationError("feature_names must name every feature column")
            object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def has_labels(self) -> bool:
        return self.labels is not None

    def feature_name(self, index: int) -> str:
        if self.feature_names is not None:
            return self.feature_names[index]
        return f"feature_{index}"

    def subset(self, indices) -> "SpatialDataset":
        """Rows ``indices`` as a new dataset."""
        indices = np.asarray(indices)
        return SpatialDataset(
            coords=self.coords[indices],
            features=self.features[indices],
            labels=None if self.labels is None else self.labels[indices],
            feature_names=self.feature_names,
        )

    def with_features(self, features: np.ndarray) -> "SpatialDataset":
        return SpatialDataset(self.coords, features, self.labels, self.feature_names)

    def with_labels(self, labels: np.ndarray) -> "SpatialDataset":
        return SpatialDataset(self.coords, self.features, labels, self.feature_names)


@dataclass(frozen=True)
class EmpiricalVariogram:
    """Binned Matheron semivariance estimates.

    Empty bins keep ``count == 0`` and ``gamma == nan``.
    """
    lags: np.ndarray
    gammas: np.ndarray
    counts: np.ndarray
    bin_width: float

    @property
    def occupied(self) -> np.ndarray:
        return self.counts > 0

    @property
    def n_occupied(self) -> int:
        return int(np.count_nonzero(self.counts))


@dataclass(frozen=True)
class VariogramFit:
    """Fitted model plus diagnostics of the weighted least squares fit."""
    model: VariogramModel
    cost: float
    degenerate: bool


def grid_sites(grid: RegularGrid) -> np.ndarray:
    """Site coordinates, row ``i`` holding linear site ``i`` in column-major order."""
    index = np.unravel_index(np.arange(grid.n_sites), grid.dims, order="F")
    steps = np.column_stack(index).astype(float)
    return np.asarray(grid.origin) + steps * np.asarray(grid.spacing)


def site_index(grid: RegularGrid, coord: Sequence[float]) -> int:
    """Linear column-major index of the site at ``coord``."""
    steps = (np.asarray(coord, dtype=float) - np.asarray(grid.origin)) / np.asarray(grid.spacing)
    index = np.rint(steps).astype(int)
    if not np.allclose(steps, index) or np.any(index < 0) or np.any(index >= np.asarray(grid.dims)):
        raise ValidationError(f"{tuple(coord)} is not a site of the grid")
    return int(np.ravel_multi_index(tuple(index), grid.dims, order="F"))


def empirical_variogram(
    data: SpatialDataset,
    feature_index: int = 0,
    n_lags: int = 20,
    max_lag: Optional[float] = None,
) -> EmpiricalVariogram:
    """Matheron estimator over half-open lag bins of width ``max_lag / n_lags``.

    Each unordered pair is counted once; pairs at distance >= ``max_lag`` are
    discarded. ``max_lag`` defaults to half the bounding box diagonal.
    """
    if data.n < 2:
        raise ValidationError("variogram needs at least two samples")
    if n_lags < 1:
        raise ValidationError("n_lags must be at least 1")
    if not 0 <= feature_index < data.n_features:
        raise ValidationError(f"feature index {feature_index} out of range")
    if max_lag is None:
        max_lag = 0.5 * float(np.linalg.norm(np.ptp(data.coords, axis=0)))
    if max_lag <= 0:
        raise ValidationError("max_lag must be positive")

    coords = data.coords
    values = data.features[:, feature_index]
    width = max_lag / n_lags
    sums = np.zeros(n_lags)
    counts = np.zeros(n_lags, dtype=np.int64)

    for start in range(0, data.n - 1, _PAIR_CHUNK):
        stop = min(start + _PAIR_CHUNK, data.n - 1)
        dist = cdist(coords[start:stop], coords[start + 1:])
        # column j of row i pairs sample start+i with sample start+1+j
        upper = np.arange(dist.shape[1])[None, :] >= np.arange(stop - start)[:, None]
        keep = upper & (dist < max_lag)
        rows, cols = np.nonzero(keep)
        diffs = values[start + rows] - values[start + 1 + cols]
        bins = np.minimum((dist[rows, cols] / width).astype(np.int64), n_lags - 1)
        sums += np.bincount(bins, weights=0.5 * diffs ** 2, minlength=n_lags)
        counts += np.bincount(bins, minlength=n_lags)

    if not counts.any():
        raise ValidationError("no pairs within max_lag")

    with np.errstate(invalid="ignore", divide="ignore"):
        gammas = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    lags = (np.arange(n_lags) + 0.5) * width
    logger.debug(
        f"Empirical variogram: {int(counts.sum())} pairs in {int(np.count_nonzero(counts))}/{n_lags} bins"
    )
    return EmpiricalVariogram(lags=lags, gammas=gammas, counts=counts, bin_width=width)


def fit_variogram(
    ev: EmpiricalVariogram,
    model_kind: Union[VariogramKind, str] = VariogramKind.gaussian,
    max_nfev: Optional[int] = None,
) -> VariogramFit:
    """Count-weighted least squares fit of (range, sill) with a multi-start search."""
    kind = VariogramKind(model_kind)
    mask = ev.occupied
    if np.count_nonzero(mask) < 3:
        raise ValidationError("variogram fit needs at least 3 occupied bins")
    if max_nfev is None:
        max_nfev = get_settings_instance().variogram_max_iter

    lags = ev.lags[mask]
    gammas = ev.gammas[mask]
    root_weights = np.sqrt(ev.counts[mask].astype(float))
    sill_guess = max(float(np.average(gammas, weights=ev.counts[mask])), 1e-12)
    tiny = 1e-9 * ev.bin_width

    def residuals(params: np.ndarray) -> np.ndarray:
        model = VariogramModel(kind=kind, range=params[0], sill=params[1])
        return root_weights * (model.gamma(lags) - gammas)

    starts = np.geomspace(0.25 * ev.bin_width, lags[-1], num=6)
    best = None
    converged = False
    for start in starts:
        result = least_squares(
            residuals,
            x0=[start, sill_guess],
            bounds=([tiny, 1e-12], [np.inf, np.inf]),
            max_nfev=max_nfev,
        )
        ok = result.status > 0
        if best is None or (ok and not converged) or (ok == converged and result.cost < best.cost):
            best = result
            converged = converged or ok

    if not converged:
        logger.error(f"Variogram fit did not converge within {max_nfev} evaluations")
        raise VariogramFitError(
            f"{kind.value} variogram fit did not converge within {max_nfev} evaluations",
            best_params=tuple(best.x),
        )

    fitted_range, fitted_sill = (float(v) for v in best.x)
    degenerate = fitted_range <= ev.bin_width
    if degenerate:
        logger.warning(
            f"Fitted range {fitted_range:.4g} is below the lag bin width {ev.bin_width:.4g}: "
            "no resolvable spatial correlation"
        )
    model = VariogramModel(kind=kind, range=fitted_range, sill=fitted_sill)
    return VariogramFit(model=model, cost=float(best.cost), degenerate=degenerate)


def fit_range(
    ev: EmpiricalVariogram,
    model_kind: Union[VariogramKind, str] = VariogramKind.gaussian,
) -> VariogramModel:
    """Fitted variogram model; see ``fit_variogram`` for diagnostics."""
    return fit_variogram(ev, model_kind).model
