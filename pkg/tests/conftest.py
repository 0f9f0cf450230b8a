"""Test configuration and fixtures."""
import os
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from src.config import settings as settings_module
from src.core.services.simulate import generator_for
from src.core.services.spatial import SpatialDataset
from src.schemas.ingest import ColumnSchema
from src.schemas.spatial import RegularGrid


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    """Isolate every test from GEOSHIFT_* variables and the cached settings."""
    for name in list(os.environ):
        if name.startswith("GEOSHIFT_"):
            monkeypatch.delenv(name)
    monkeypatch.setattr(settings_module, "_settings_instance", None)
    yield
    settings_module._settings_instance = None


@pytest.fixture
def rng():
    """Seeded generator for test data."""
    return generator_for(12345)


@pytest.fixture
def small_grid():
    """20 x 20 unit grid."""
    return RegularGrid(dims=(20, 20))


@pytest.fixture
def blob_dataset(rng):
    """200 samples, two features, labels from a linear rule."""
    features = rng.standard_normal((200, 2))
    coords = rng.uniform(0, 100, size=(200, 2))
    labels = np.where(features[:, 0] + features[:, 1] >= 0, 1, -1)
    return SpatialDataset(coords=coords, features=features, labels=labels)


@pytest.fixture
def well_schema():
    """Column roles of the synthetic two-domain tables."""
    return ColumnSchema(
        coord_columns=["X", "Y", "Z"],
        feature_columns=["F1", "F2"],
        label_column="FORMATION",
        domain_column="ONSHORE",
    )


def band_flip_labels(features: np.ndarray, rng) -> np.ndarray:
    """Sign of F1, flipped inside the band 1 < F2 < 5.

    About 16% of a N(0, I) source falls in the band. Targets centered at
    F2 = 7.5 lie beyond it, where the plain sign of F1 holds again.
    """
    flip = (features[:, 1] > 1.0) & (features[:, 1] < 5.0)
    upper = (features[:, 0] >= 0) != flip
    return np.where(upper, "UPPER", "LOWER")


def noisy_labels(features: np.ndarray, rng) -> np.ndarray:
    """Linear rule with additive noise: Bayes error 0.25 on standard normal features."""
    value = features[:, 0] + features[:, 1] + rng.normal(0.0, np.sqrt(2.0), size=features.shape[0])
    return np.where(value >= 0, "UPPER", "LOWER")


LABELERS = {"band_flip": band_flip_labels, "noisy": noisy_labels}


@pytest.fixture
def make_two_domain_table():
    """Factory for well-log style tables: source N(0, I), target N(center, I)."""

    def make(n_source=1000, n_target=500, target_center=(6.0, -6.0), labeler="noisy", seed=0):
        gen = generator_for(seed)
        n = n_source + n_target
        features = np.vstack([
            gen.standard_normal((n_source, 2)),
            gen.standard_normal((n_target, 2)) + np.asarray(target_center),
        ])
        coords = np.column_stack([
            gen.uniform(0.0, 1000.0, n),
            gen.uniform(0.0, 1000.0, n),
            gen.uniform(0.0, 50.0, n),
        ])
        return pd.DataFrame({
            "X": coords[:, 0],
            "Y": coords[:, 1],
            "Z": coords[:, 2],
            "F1": features[:, 0],
            "F2": features[:, 1],
            "FORMATION": LABELERS[labeler](features, gen),
            "ONSHORE": np.r_[np.ones(n_source, dtype=int), np.zeros(n_target, dtype=int)],
        })

    return make


@pytest.fixture
def write_table(tmp_path):
    """Write a DataFrame to a CSV file under tmp_path."""

    def write(table: pd.DataFrame, name: str = "wells.csv") -> Path:
        path = tmp_path / name
        table.to_csv(path, index=False)
        return path

    return write
