"""Least squares importance fitting of the density ratio p_target(x) / p_source(x).

The ratio is modelled as w(x) = sum_i alpha_i * exp(-||x - c_i||^2 / (2 sigma^2))
with centers c_i drawn from the target sample and alpha >= 0 obtained from

    minimize 0.5 * a'Ha - h'a + lambda * 1'a   subject to   a >= 0.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np
from loguru import logger
from scipy.spatial.distance import cdist

from src.core.services.spatial import SpatialDataset
from src.schemas.dre import LsifConfig
from src.utils.exceptions import NumericalInstabilityError, ValidationError
from src.utils.metrics_registry import LSIF_SOLVE_COUNT

# Coefficients beyond this size mean the source barely covers the centers
ALPHA_CEILING = 1e8
_MIN_STEP = 1e-30

FeatureInput = Union[SpatialDataset, np.ndarray]


@dataclass(frozen=True)
class RatioModel:
    """Fitted density ratio, evaluable as ``model(x)``."""
    centers: np.ndarray
    sigma: float
    alpha: np.ndarray

    def __call__(self, features: np.ndarray) -> np.ndarray:
        return gaussian_kernel(np.atleast_2d(features), self.centers, self.sigma) @ self.alpha


@dataclass
class QPResult:
    """Solution of the nonnegative QP with its convergence record."""
    alpha: np.ndarray
    n_iter: int
    kkt_residual: float
    objective_history: List[float] = field(default_factory=list)


def _features(data: FeatureInput) -> np.ndarray:
    if isinstance(data, SpatialDataset):
        return data.features
    return np.atleast_2d(np.asarray(data, dtype=float))


def gaussian_kernel(features: np.ndarray, centers: np.ndarray, sigma: float) -> np.ndarray:
    """n x b design matrix exp(-||x - c||^2 / (2 sigma^2))."""
    return np.exp(-cdist(features, centers, "sqeuclidean") / (2.0 * sigma ** 2))


def estimate_Hh(
    source_features: np.ndarray,
    target_features: np.ndarray,
    centers: np.ndarray,
    sigma: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """Sample averages H = mean(phi phi') over the source and h = mean(phi) over the target."""
    phi_source = gaussian_kernel(np.atleast_2d(source_features), centers, sigma)
    phi_target = gaussian_kernel(np.atleast_2d(target_features), centers, sigma)
    if phi_source.shape[0] < 1 or phi_target.shape[0] < 1:
        raise ValidationError("source and target must each contain a sample")
    H = phi_source.T @ phi_source / phi_source.shape[0]
    h = phi_target.mean(axis=0)
    return 0.5 * (H + H.T), h


def lsif_objective(H: np.ndarray, h: np.ndarray, lam: float, alpha: np.ndarray) -> float:
    return float(0.5 * alpha @ H @ alpha - h @ alpha + lam * alpha.sum())


def kkt_residual(alpha: np.ndarray, gradient: np.ndarray) -> float:
    """Largest violation of the KKT conditions of the nonnegative QP."""
    violation = np.where(alpha > 0, np.abs(gradient), np.maximum(-gradient, 0.0))
    return float(violation.max()) if violation.size else 0.0


def projected_gradient_qp(
    H: np.ndarray,
    h: np.ndarray,
    lam: float = 1e-3,
    tol: float = 1e-8,
    max_iter: int = 100_000,
) -> QPResult:
    """Projected gradient descent with backtracking and free-set Newton refinement.

    Each iteration takes a backtracked projected gradient step, then tries a
    Newton step restricted to the positive coordinates and keeps it only if
    the objective does not increase, so the objective is monotone.
    """
    H = np.asarray(H, dtype=float)
    h = np.asarray(h, dtype=float)
    if lam < 0:
        raise ValidationError("lambda must be nonnegative")
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(h))):
        raise ValidationError("H and h must be finite")

    curvature = max(float(np.linalg.eigvalsh(H).max()), np.finfo(float).tiny)
    base_step = 1.0 / curvature
    alpha = np.zeros_like(h)
    value = lsif_objective(H, h, lam, alpha)
    history = [value]
    residual = np.inf

    for iteration in range(max_iter):
        gradient = H @ alpha - h + lam
        residual = kkt_residual(alpha, gradient)
        if residual <= tol:
            LSIF_SOLVE_COUNT.labels(status="ok").inc()
            return QPResult(alpha=alpha, n_iter=iteration, kkt_residual=residual,
                            objective_history=history)

        step = base_step
        while True:
            candidate = np.maximum(alpha - step * gradient, 0.0)
            move = candidate - alpha
            candidate_value = lsif_objective(H, h, lam, candidate)
            bound = value + gradient @ move + (move @ move) / (2.0 * step)
            if candidate_value <= bound + 1e-15 * abs(value) or step < _MIN_STEP:
                break
            step *= 0.5
        if candidate_value > value:
            candidate, candidate_value = alpha, value

        free = candidate > 0
        if free.any():
            free_gradient = (H @ candidate - h + lam)[free]
            direction = np.linalg.lstsq(H[np.ix_(free, free)], -free_gradient, rcond=None)[0]
            newton = candidate.copy()
            newton[free] = np.maximum(candidate[free] + direction, 0.0)
            newton_value = lsif_objective(H, h, lam, newton)
            if newton_value <= candidate_value:
                candidate, candidate_value = newton, newton_value

        if not np.all(np.isfinite(candidate)) or candidate.max(initial=0.0) > ALPHA_CEILING:
            LSIF_SOLVE_COUNT.labels(status="unstable").inc()
            raise NumericalInstabilityError(
                f"LSIF coefficients diverged beyond {ALPHA_CEILING:g} at iteration {iteration}",
                best_iterate=alpha,
                residual=residual,
            )
        alpha, value = candidate, candidate_value
        history.append(value)

    LSIF_SOLVE_COUNT.labels(status="unstable").inc()
    raise NumericalInstabilityError(
        f"LSIF solver stopped after {max_iter} iterations with KKT residual {residual:.3e}",
        best_iterate=alpha,
        residual=residual,
    )


def solve_lsif(
    H: np.ndarray,
    h: np.ndarray,
    lam: float = 1e-3,
    tol: float = 1e-8,
    max_iter: int = 100_000,
) -> np.ndarray:
    """Nonnegative coefficients alpha* of the LSIF quadratic program."""
    return projected_gradient_qp(H, h, lam, tol, max_iter).alpha


def fit_ratio(source: FeatureInput, target: FeatureInput, cfg: Optional[LsifConfig] = None) -> RatioModel:
    """Fit w(x) with ``cfg.b`` centers drawn without replacement from the target."""
    cfg = cfg or LsifConfig()
    source_features = _features(source)
    target_features = _features(target)
    if source_features.shape[1] != target_features.shape[1]:
        raise ValidationError(
            f"feature dimensions differ: {source_features.shape[1]} vs {target_features.shape[1]}"
        )
    if cfg.b > target_features.shape[0]:
        raise ValidationError(f"b = {cfg.b} exceeds the {target_features.shape[0]} target samples")

    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    centers = target_features[np.sort(rng.choice(target_features.shape[0], size=cfg.b, replace=False))]
    H, h = estimate_Hh(source_features, target_features, centers, cfg.sigma)
    result = projected_gradient_qp(H, h, cfg.lambda_, cfg.solver_tol, cfg.solver_max_iter)
    logger.debug(
        f"LSIF fit: {int(np.count_nonzero(result.alpha))}/{cfg.b} active kernels "
        f"after {result.n_iter} iterations"
    )
    return RatioModel(centers=centers, sigma=cfg.sigma, alpha=result.alpha)
