"""Tests for CSV ingestion, balancing, normalization and domain splits."""
import numpy as np
import pandas as pd
import pytest

from src.core.services.ingest import (
    clean_and_balance,
    clean_and_balance_table,
    drop_incomplete,
    load_csv,
    most_frequent_classes,
    resample_domains,
    split_domains,
    to_dataset,
    zscore_normalize,
)
from src.core.services.spatial import SpatialDataset
from src.schemas.ingest import ColumnSchema
from src.utils.exceptions import IngestError, ValidationError

HEADER = "X,Y,Z,F1,F2,FORMATION,ONSHORE\n"


def _write(tmp_path, body, name="wells.csv"):
    path = tmp_path / name
    path.write_text(HEADER + body, encoding="utf-8")
    return path


def _labeled_table(counts, seed=0):
    gen = np.random.Generator(np.random.PCG64(seed))
    labels = np.concatenate([[name] * n for name, n in counts.items()])
    n = len(labels)
    return pd.DataFrame({
        "X": gen.uniform(0, 100, n),
        "Y": gen.uniform(0, 100, n),
        "Z": gen.uniform(0, 10, n),
        "F1": gen.standard_normal(n),
        "F2": gen.standard_normal(n),
        "FORMATION": labels,
        "ONSHORE": np.arange(n) % 2,
    })


def test_load_csv_parses_missing_markers(tmp_path, well_schema):
    """Test NaN, empty and unparsable cells all become missing."""
    path = _write(tmp_path, (
        "1,2,3,0.5,1.5,SAND,1\n"
        "1,2,3,NaN,1.5,SAND,1\n"
        "1,2,,0.5,1.5,SHALE,0\n"
        "1,2,3,abc,1.5,SHALE,0\n"
        "1,2,3,0.5,1.5,NaN,0\n"
    ))
    table = load_csv(path, well_schema)

    assert len(table) == 5
    assert table["F1"].isna().tolist() == [False, True, False, True, False]
    assert table["Z"].isna().tolist() == [False, False, True, False, False]
    assert len(drop_incomplete(table, well_schema)) == 1


def test_load_csv_header_only(tmp_path, well_schema):
    with pytest.raises(IngestError, match="no data rows"):
        load_csv(_write(tmp_path, ""), well_schema)


def test_load_csv_empty_file(tmp_path, well_schema):
    path = tmp_path / "empty.csv"
    path.write_text("", encoding="utf-8")
    with pytest.raises(IngestError, match="no header"):
        load_csv(path, well_schema)


def test_load_csv_names_missing_column(tmp_path):
    schema = ColumnSchema(
        coord_columns=["X", "Y"], feature_columns=["GR"], label_column="FORMATION", domain_column="ONSHORE"
    )
    with pytest.raises(IngestError, match="GR"):
        load_csv(_write(tmp_path, "1,2,3,0.5,1.5,SAND,1\n"), schema)


def test_schema_roles_must_be_disjoint():
    with pytest.raises(ValueError):
        ColumnSchema(coord_columns=["X"], feature_columns=["X"], label_column="L")


def test_balance_downsamples_majority(well_schema):
    """Test 100 / 60 rows give 60 of each class in original order."""
    table = _labeled_table({"SAND": 100, "SHALE": 60})
    balanced = clean_and_balance_table(table, well_schema, seed=1)

    assert balanced["FORMATION"].value_counts().to_dict() == {"SAND": 60, "SHALE": 60}
    assert balanced.index.is_monotonic_increasing
    assert (balanced[balanced["FORMATION"] == "SHALE"].index == table.index[100:]).all()


def test_balance_is_seeded(well_schema):
    table = _labeled_table({"SAND": 100, "SHALE": 60})
    first = clean_and_balance_table(table, well_schema, seed=1)
    second = clean_and_balance_table(table, well_schema, seed=1)
    third = clean_and_balance_table(table, well_schema, seed=2)

    assert first.index.tolist() == second.index.tolist()
    assert first.index.tolist() != third.index.tolist()


def test_balance_defaults_to_two_most_frequent(well_schema):
    table = _labeled_table({"LIME": 10, "SAND": 50, "SHALE": 30})

    assert most_frequent_classes(table, well_schema) == ("SAND", "SHALE")
    data = clean_and_balance(table, well_schema)
    assert isinstance(data, SpatialDataset)
    assert sorted(np.unique(data.labels).tolist()) == ["SAND", "SHALE"]
    assert data.n == 60


def test_balance_requires_present_classes(well_schema):
    table = _labeled_table({"SAND": 10, "SHALE": 10})
    with pytest.raises(IngestError, match="LIME"):
        clean_and_balance_table(table, well_schema, classes=["SAND", "LIME"])
    with pytest.raises(ValidationError):
        clean_and_balance_table(table, well_schema, classes=["SAND"])


def test_zscore_uses_training_statistics():
    """Test values {0, 2} map to -1 and +1 and other sets reuse those statistics."""
    train = SpatialDataset(coords=[[0.0], [1.0]], features=[[0.0], [2.0]])
    other = SpatialDataset(coords=[[0.0]], features=[[4.0]])

    normalized, (applied,), stats = zscore_normalize(train, [other])

    assert normalized.features.ravel().tolist() == [-1.0, 1.0]
    assert applied.features.ravel().tolist() == [3.0]
    assert stats.mean.tolist() == [1.0]


def test_zscore_rejects_constant_feature():
    train = SpatialDataset(coords=[[0.0], [1.0]], features=[[1.0, 0.0], [1.0, 2.0]], feature_names=("GR", "RHOB"))
    with pytest.raises(ValidationError, match="GR"):
        zscore_normalize(train)


def test_split_domains(well_schema):
    table = _labeled_table({"SAND": 6, "SHALE": 4})
    source, target = split_domains(table, well_schema)

    assert len(source) == len(target) == 5
    assert set(source.index).isdisjoint(target.index)
    assert (source["ONSHORE"] == 1).all()


def test_split_domains_custom_predicate(well_schema):
    table = _labeled_table({"SAND": 6, "SHALE": 4})
    source, target = split_domains(table, well_schema, lambda values: values.astype(int) == 0)

    assert (source["ONSHORE"] == 0).all()
    assert (target["ONSHORE"] == 1).all()


def test_split_domains_one_sided(well_schema):
    table = _labeled_table({"SAND": 6, "SHALE": 4}).assign(ONSHORE=1)
    with pytest.raises(IngestError, match="one-sided"):
        split_domains(table, well_schema)


def test_resample_domains_preserves_rows(well_schema):
    """Test resampling redraws disjoint domains from the pooled rows."""
    table = _labeled_table({"SAND": 60, "SHALE": 40})
    source, target = split_domains(table, well_schema)

    new_source, new_target = resample_domains(source, target, seed=3)
    assert len(new_source) == len(source)
    assert sorted(new_source.index.tolist() + new_target.index.tolist()) == list(range(100))

    small_source, small_target = resample_domains(source, target, seed=3, proportion=(3.0, 1.0))
    assert (len(small_source), len(small_target)) == (75, 25)

    with pytest.raises(ValidationError):
        resample_domains(source, target, proportion=(0.0, 1.0))


def test_to_dataset_keeps_string_labels(well_schema):
    data = to_dataset(_labeled_table({"SAND": 3, "SHALE": 2}), well_schema)

    assert data.coords.shape == (5, 3)
    assert data.features.shape == (5, 2)
    assert data.labels.tolist() == ["SAND"] * 3 + ["SHALE"] * 2
