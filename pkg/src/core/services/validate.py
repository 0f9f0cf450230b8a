"""Fold construction and cross-validatory estimators of generalization error.

All estimators reduce to importance-weighted cross-validation:

    R = (1/k) sum_j (1/|E_j|) sum_{u in E_j} w(x_u)^l * 1[y_u != g_j(x_u)]

with w = 1 for CV and BCV and LSIF weights for DRV.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy.spatial import cKDTree

from src.core.services.dre import fit_ratio
from src.core.services.models import Classifier, ModelFactory
from src.core.services.simulate import derive_seed, generator_for
from src.core.services.spatial import SpatialDataset
from src.schemas.dre import LsifConfig
from src.utils.exceptions import FoldError, NumericalInstabilityError, ValidationError
from src.utils.metrics_registry import DRV_STATUS_COUNT, FOLD_EVALUATION_COUNT


class FoldStrategy(str, Enum):
    random = "random"
    block = "block"


class EstimateStatus(str, Enum):
    ok = "ok"
    degraded = "degraded"


@dataclass(frozen=True)
class FoldPartition:
    """(train indices, eval indices) pairs produced by a fold strategy."""
    folds: List[Tuple[np.ndarray, np.ndarray]]
    strategy: FoldStrategy
    n: int

    def __len__(self) -> int:
        return len(self.folds)

    @property
    def eval_sizes(self) -> List[int]:
        return [len(ev) for _, ev in self.folds]


@dataclass(frozen=True)
class ErrorEstimate:
    """Expected 0-1 loss estimate with its per-fold breakdown."""
    value: float
    per_fold: np.ndarray = field(default_factory=lambda: np.zeros(0))
    n_eval: int = 0
    status: EstimateStatus = EstimateStatus.ok
    reason: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.status == EstimateStatus.ok

    @property
    def n_folds(self) -> int:
        return len(self.per_fold)


def random_folds(n: int, k: int, seed: int = 0) -> FoldPartition:
    """k folds of a seeded permutation; eval sizes differ by at most one."""
    if k < 2:
        raise ValidationError("k must be at least 2")
    if k > n:
        raise ValidationError(f"k = {k} exceeds the {n} samples")
    permutation = generator_for(seed).permutation(n)
    everything = np.arange(n)
    folds = []
    for chunk in np.array_split(permutation, k):
        evaluation = np.sort(chunk)
        folds.append((np.setdiff1d(everything, evaluation, assume_unique=True), evaluation))
    return FoldPartition(folds=folds, strategy=FoldStrategy.random, n=n)


def block_keys(coords: np.ndarray, block_sides: Sequence[float]) -> np.ndarray:
    """Integer block index per sample, blocks anchored at the bounding box minimum."""
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    sides = np.broadcast_to(np.asarray(block_sides, dtype=float), (coords.shape[1],))
    if np.any(sides <= 0):
        raise ValidationError("block sides must be positive")
    return np.floor((coords - coords.min(axis=0)) / sides).astype(np.int64)


def count_blocks(coords: np.ndarray, block_sides: Sequence[float]) -> int:
    """Number of nonempty blocks covering ``coords``."""
    return int(np.unique(block_keys(coords, block_sides), axis=0).shape[0])


def block_folds(
    coords: np.ndarray,
    block_sides: Sequence[float],
    dead_zone_radius: float = 0.0,
) -> FoldPartition:
    """One fold per nonempty axis-aligned block of the bounding box.

    Training sets drop the block itself and, for a positive radius, every
    sample within ``dead_zone_radius`` of an evaluation sample.
    """
    if dead_zone_radius < 0:
        raise ValidationError("dead_zone_radius must be nonnegative")
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    keys = block_keys(coords, block_sides)
    _, membership = np.unique(keys, axis=0, return_inverse=True)
    membership = membership.ravel()
    n_blocks = int(membership.max()) + 1
    if n_blocks < 2:
        raise FoldError("single-fold partition: all samples fall in one block")

    n = coords.shape[0]
    folds = []
    for block in range(n_blocks):
        evaluation = np.flatnonzero(membership == block)
        excluded = membership == block
        if dead_zone_radius > 0:
            distance, _ = cKDTree(coords[evaluation]).query(
                coords, k=1, distance_upper_bound=dead_zone_radius * (1 + 1e-12)
            )
            excluded |= distance <= dead_zone_radius
        folds.append((np.flatnonzero(~excluded), evaluation))
    logger.debug(f"Block partition: {n_blocks} folds over {n} samples")
    return FoldPartition(folds=folds, strategy=FoldStrategy.block, n=n)


def iwcv(
    model_factory: ModelFactory,
    data: SpatialDataset,
    folds: FoldPartition,
    weights: Optional[np.ndarray] = None,
    l: float = 1.0,
) -> ErrorEstimate:
    """Importance-weighted cross-validation with 0-1 loss.

    ``l = 0`` or absent weights give the plain unweighted estimator.
    """
    if not data.has_labels:
        raise ValidationError("cross-validation needs labels")
    if not 0 <= l <= 1:
        raise ValidationError("exponent l must lie in [0, 1]")
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (data.n,):
            raise ValidationError(f"weights must have length {data.n}")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ValidationError("weights must be finite and nonnegative")
    scale = None if weights is None or l == 0 else weights ** l

    per_fold = np.empty(len(folds))
    n_eval = 0
    for j, (train, evaluation) in enumerate(folds.folds):
        if len(train) == 0 or len(evaluation) == 0:
            raise FoldError(f"fold {j} has an empty train or eval set", fold_index=j)
        model: Classifier = model_factory(j)
        model.train(data.features[train], data.labels[train])
        loss = (model.predict(data.features[evaluation]) != data.labels[evaluation]).astype(float)
        if scale is not None:
            loss = loss * scale[evaluation]
        per_fold[j] = loss.mean()
        n_eval += len(evaluation)
        FOLD_EVALUATION_COUNT.labels(strategy=folds.strategy.value).inc()
    return ErrorEstimate(value=float(per_fold.mean()), per_fold=per_fold, n_eval=n_eval)


def estimate_cv(model_factory: ModelFactory, data: SpatialDataset, k: int, seed: int = 0) -> ErrorEstimate:
    """Random k-fold cross-validation."""
    return iwcv(model_factory, data, random_folds(data.n, k, seed))


def estimate_bcv(
    model_factory: ModelFactory,
    data: SpatialDataset,
    block_sides: Union[float, Sequence[float]],
    dead_zone_radius: float = 0.0,
) -> ErrorEstimate:
    """Block cross-validation over the bounding box of ``data``."""
    return iwcv(model_factory, data, block_folds(data.coords, block_sides, dead_zone_radius))


def importance_weights(
    source: SpatialDataset,
    target_features,
    lsif_cfg: LsifConfig,
    normalize: bool = False,
) -> np.ndarray:
    """LSIF weights at the source samples, optionally rescaled to mean one."""
    ratio = fit_ratio(source, target_features, lsif_cfg)
    weights = ratio(source.features)
    if normalize:
        total = weights.mean()
        if total <= 0:
            raise NumericalInstabilityError("importance weights vanish on the source", residual=0.0)
        weights = weights / total
    return weights


def estimate_drv(
    model_factory: ModelFactory,
    source: SpatialDataset,
    target_features,
    lsif_cfg: LsifConfig,
    folds: FoldPartition,
    l: float = 1.0,
    normalize_weights: bool = False,
) -> ErrorEstimate:
    """Density ratio validation: LSIF weights fitted once, reused across folds.

    Solver instability yields a degraded estimate with a NaN value.
    """
    try:
        weights = importance_weights(source, target_features, lsif_cfg, normalize_weights)
    except NumericalInstabilityError as e:
        logger.warning(f"DRV omitted: {e}")
        DRV_STATUS_COUNT.labels(status="unstable").inc()
        return ErrorEstimate(value=float("nan"), status=EstimateStatus.degraded, reason=str(e))
    DRV_STATUS_COUNT.labels(status="ok").inc()
    return iwcv(model_factory, source, folds, weights=weights, l=l)


def zero_one_error(model: Classifier, data: SpatialDataset) -> float:
    """Misclassification rate of a trained model on labeled data."""
    return float(np.mean(model.predict(data.features) != data.labels))


def true_error(
    model: Classifier,
    problem_generator: Callable[[int], SpatialDataset],
    n_realizations: int,
    seed: int = 0,
) -> float:
    """Monte Carlo mean 0-1 loss of a frozen model over fresh target realizations."""
    if n_realizations < 1:
        raise ValidationError("n_realizations must be at least 1")
    losses = [
        zero_one_error(model, problem_generator(derive_seed(seed, i)))
        for i in range(n_realizations)
    ]
    return float(np.mean(losses))
