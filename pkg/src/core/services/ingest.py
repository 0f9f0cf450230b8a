"""CSV ingestion, cleaning, balancing and normalization of well-log style tables."""
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger

from src.core.services.simulate import generator_for
from src.core.services.spatial import SpatialDataset
from src.schemas.ingest import ColumnSchema
from src.utils.exceptions import IngestError, ValidationError

MISSING_MARKERS = ["", "NaN", "nan", "NA", "N/A", "null"]
TRUTHY = {"1", "true", "t", "yes", "y", "1.0"}


@dataclass(frozen=True)
class ZScoreStats:
    """Per-feature standardization statistics."""
    mean: np.ndarray
    std: np.ndarray

    def apply(self, data: SpatialDataset) -> SpatialDataset:
        return data.with_features((data.features - self.mean) / self.std)


def load_csv(path: Union[str, Path], schema: ColumnSchema) -> pd.DataFrame:
    """Comma-separated UTF-8 file with a header; numeric cells that fail to parse become NaN."""
    try:
        table = pd.read_csv(
            path,
            sep=",",
            decimal=".",
            quotechar='"',
            encoding="utf-8",
            dtype=str,
            keep_default_na=False,
            na_values=MISSING_MARKERS,
        )
    except pd.errors.EmptyDataError as e:
        raise IngestError(f"{path}: no header row") from e

    missing = [name for name in schema.required_columns if name not in table.columns]
    if missing:
        raise IngestError(f"{path}: missing declared column(s) {', '.join(missing)}")
    if table.empty:
        raise IngestError(f"{path}: no data rows")

    for name in schema.numeric_columns:
        table[name] = pd.to_numeric(table[name].str.strip(), errors="coerce")
    table[schema.label_column] = table[schema.label_column].str.strip()
    logger.info(f"Loaded {len(table)} rows from {path}")
    return table


def drop_incomplete(table: pd.DataFrame, schema: ColumnSchema) -> pd.DataFrame:
    """Rows with every coordinate, feature and the label present and finite."""
    numeric = table[schema.numeric_columns].to_numpy(dtype=float)
    complete = np.all(np.isfinite(numeric), axis=1) & table[schema.label_column].notna().to_numpy()
    dropped = int((~complete).sum())
    if dropped:
        logger.info(f"Dropped {dropped} rows with missing values")
    return table.loc[complete]


def most_frequent_classes(table: pd.DataFrame, schema: ColumnSchema, n: int = 2) -> Tuple[str, ...]:
    counts = table[schema.label_column].value_counts(sort=False)
    ordered = sorted(counts.items(), key=lambda item: (-item[1], str(item[0])))
    return tuple(label for label, _ in ordered[:n])


def clean_and_balance_table(
    table: pd.DataFrame,
    schema: ColumnSchema,
    classes: Optional[Sequence[str]] = None,
    seed: int = 0,
) -> pd.DataFrame:
    """Drop incomplete rows, keep two classes and downsample the majority class.

    ``classes`` defaults to the two most frequent labels after filtering.
    Surviving rows keep their original order.
    """
    complete = drop_incomplete(table, schema)
    if classes is None:
        classes = most_frequent_classes(complete, schema)
    classes = tuple(classes)
    if len(classes) != 2:
        raise ValidationError("exactly two classes are required")

    labels = complete[schema.label_column].to_numpy()
    positions = [np.flatnonzero(labels == c) for c in classes]
    for name, rows in zip(classes, positions):
        if len(rows) == 0:
            raise IngestError(f"class '{name}' absent after filtering")

    size = min(len(rows) for rows in positions)
    rng = generator_for(seed)
    kept = np.sort(np.concatenate([
        rows if len(rows) == size else rng.choice(rows, size=size, replace=False)
        for rows in positions
    ]))
    logger.info(f"Balanced classes {classes[0]}/{classes[1]} at {size} rows each")
    return complete.iloc[kept]


def to_dataset(table: pd.DataFrame, schema: ColumnSchema) -> SpatialDataset:
    return SpatialDataset(
        coords=table[schema.coord_columns].to_numpy(dtype=float),
        features=table[schema.feature_columns].to_numpy(dtype=float),
        labels=table[schema.label_column].to_numpy(dtype=str),
        feature_names=tuple(schema.feature_columns),
    )


def clean_and_balance(
    table: pd.DataFrame,
    schema: ColumnSchema,
    classes: Optional[Sequence[str]] = None,
    seed: int = 0,
) -> SpatialDataset:
    """Labeled dataset with equal counts of the two classes."""
    return to_dataset(clean_and_balance_table(table, schema, classes, seed), schema)


def zscore_normalize(
    train: SpatialDataset,
    apply_to: Sequence[SpatialDataset] = (),
) -> Tuple[SpatialDataset, List[SpatialDataset], ZScoreStats]:
    """Standardize with statistics of ``train`` only and apply them everywhere."""
    mean = train.features.mean(axis=0)
    std = train.features.std(axis=0)
    for index in np.flatnonzero(std <= 0):
        raise ValidationError(f"feature '{train.feature_name(int(index))}' has zero variance")
    stats = ZScoreStats(mean=mean, std=std)
    return stats.apply(train), [stats.apply(d) for d in apply_to], stats


def truthy(values: pd.Series) -> pd.Series:
    """Default source predicate: 1/true/yes style flags."""
    return values.astype(str).str.strip().str.lower().isin(TRUTHY)


def split_domains(
    table: pd.DataFrame,
    schema: ColumnSchema,
    source_predicate: Callable[[pd.Series], pd.Series] = truthy,
) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Disjoint, exhaustive source/target split on the domain column."""
    if schema.domain_column is None:
        raise IngestError("no domain column declared")
    mask = np.asarray(source_predicate(table[schema.domain_column]), dtype=bool)
    source, target = table.loc[mask], table.loc[~mask]
    if source.empty or target.empty:
        raise IngestError(
            f"domain split is one-sided: {len(source)} source rows, {len(target)} target rows"
        )
    logger.info(f"Split domains: {len(source)} source rows, {len(target)} target rows")
    return source, target


def resample_domains(
    source: pd.DataFrame,
    target: pd.DataFrame,
    seed: int = 0,
    proportion: Optional[Tuple[float, float]] = None,
) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Pool both domains and redraw two disjoint subsets without covariate shift.

    Sizes follow ``proportion`` (source : target) or, by default, the
    original domain sizes.
    """
    pooled = pd.concat([source, target])
    total = len(pooled)
    if proportion is None:
        n_source = len(source)
    else:
        share_source, share_target = proportion
        if share_source <= 0 or share_target <= 0:
            raise ValidationError("proportion entries must be positive")
        n_source = int(np.floor(total * share_source / (share_source + share_target)))
    if not 0 < n_source < total:
        raise ValidationError(f"cannot draw {n_source} of {total} rows into two nonempty domains")

    order = generator_for(seed).permutation(total)
    new_source = pooled.iloc[np.sort(order[:n_source])]
    new_target = pooled.iloc[np.sort(order[n_source:])]
    return new_source, new_target
