"""Closed-form shift functions of (delta, tau) for isotropic 2D Gaussians.

Source and target are pictured as circles of radius 3 and 3 * tau centred at
0 * 1 and mu_t * 1 in the plane, so the centre distance is sqrt(2) * mu_t,
i.e. 6 * delta.
"""
import math
from typing import Tuple

from src.schemas.experiment import ShiftConfig
from src.schemas.simulation import ShiftSpec

SOURCE_RADIUS = 3.0
# Rounding slack at the partial-configuration boundaries
_RADICAND_TOLERANCE = 1e-12


def classify(shift: ShiftSpec) -> ShiftConfig:
    """Overlap configuration; ties go to inside first, then outside."""
    if 2 * shift.delta <= 1 - shift.tau:
        return ShiftConfig.inside
    if 2 * shift.delta >= 1 + shift.tau:
        return ShiftConfig.outside
    return ShiftConfig.partial


def kl(shift: ShiftSpec) -> float:
    """delta^2 + tau^2 - ln(tau^4) - 1."""
    return shift.delta ** 2 + shift.tau ** 2 - math.log(shift.tau ** 4) - 1.0


def center_distance(shift: ShiftSpec) -> float:
    return 6.0 * shift.delta


def lens_terms(shift: ShiftSpec) -> Tuple[float, float, float]:
    """The two circular-segment terms and the kite term of a partial overlap.

    Only meaningful in the partial configuration, where the square-root
    argument of the kite term is nonnegative.
    """
    r_a, r_b = SOURCE_RADIUS, SOURCE_RADIUS * shift.tau
    d = center_distance(shift)
    c1 = r_a ** 2 * math.acos(_clip((d ** 2 + r_a ** 2 - r_b ** 2) / (2 * d * r_a)))
    c2 = r_b ** 2 * math.acos(_clip((d ** 2 + r_b ** 2 - r_a ** 2) / (2 * d * r_b)))
    radicand = ((r_a + r_b) ** 2 - d ** 2) * (d ** 2 - (r_a - r_b) ** 2)
    if radicand < -_RADICAND_TOLERANCE * (r_a + r_b) ** 4:
        raise ValueError(f"lens terms undefined outside partial overlap: {shift}")
    c3 = 0.5 * math.sqrt(max(radicand, 0.0))
    return c1, c2, c3


def areas(shift: ShiftSpec) -> Tuple[float, float, float]:
    """|A|, |B| and |A intersect B| for the source (A) and target (B) circles."""
    area_a = math.pi * SOURCE_RADIUS ** 2
    area_b = math.pi * (SOURCE_RADIUS * shift.tau) ** 2
    config = classify(shift)
    if config == ShiftConfig.inside:
        overlap = area_b
    elif config == ShiftConfig.outside:
        overlap = 0.0
    else:
        c1, c2, c3 = lens_terms(shift)
        overlap = min(max(c1 + c2 - c3, 0.0), area_b)
    return area_a, area_b, overlap


def jaccard(shift: ShiftSpec) -> float:
    """Jaccard distance 1 - |A n B| / |A u B|."""
    area_a, area_b, overlap = areas(shift)
    return _unit(1.0 - overlap / (area_a + area_b - overlap))


def novelty(shift: ShiftSpec) -> float:
    """(N(B/A) + 1) / 2 with N(B/A) = (|B - A n B| - |A n B|) / |B|."""
    _, area_b, overlap = areas(shift)
    raw = ((area_b - overlap) - overlap) / area_b
    return _unit((raw + 1.0) / 2.0)


def _clip(x: float) -> float:
    return min(1.0, max(-1.0, x))


def _unit(x: float) -> float:
    return min(1.0, max(0.0, x))
