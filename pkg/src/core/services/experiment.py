"""Experiment orchestration: the Gaussian (delta, tau, r) sweep and the tabular ranking workflow."""
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger
from scipy.stats import kendalltau

from src.config.settings import get_settings_instance
from src.core.services import ingest, shiftfns
from src.core.services.models import canonical_model_name, model_factory
from src.core.services.simulate import derive_seed, make_problem, target_generator
from src.core.services.validate import (
    count_blocks,
    estimate_bcv,
    estimate_drv,
    importance_weights,
    iwcv,
    random_folds,
    true_error,
    zero_one_error,
)
from src.schemas.dre import LsifConfig
from src.schemas.experiment import (
    RESULT_COLUMNS,
    DrvStatus,
    ResultRow,
    SweepSpec,
    TabularMode,
)
from src.schemas.ingest import ColumnSchema
from src.schemas.simulation import ShiftSpec
from src.schemas.spatial import RegularGrid
from src.utils.exceptions import NumericalInstabilityError, ValidationError
from src.utils.metrics_registry import DRV_STATUS_COUNT, SWEEP_CELL_TIME

TABULAR_MODELS = ["logistic", "knn", "gaussian_nb", "tree", "dummy"]
CellIndex = Tuple[int, int, int, int]


@dataclass(frozen=True)
class CellResult:
    """One sweep cell with its fold bookkeeping."""
    index: CellIndex
    row: ResultRow
    cv_folds: int
    bcv_folds: int


@dataclass(frozen=True)
class Ranking:
    """Models ordered by ascending estimated error; non-finite entries excluded."""
    order: List[str]
    excluded: List[str] = field(default_factory=list)


@dataclass
class TabularReport:
    estimates: pd.DataFrame
    ranks: pd.DataFrame
    agreement: pd.DataFrame
    paths: Dict[str, Path] = field(default_factory=dict)


# ---------------------------------------------------------------- parsing


def parse_range(text: str) -> List[float]:
    """``a:b:n`` -> n evenly spaced values from a to b; also accepts ``x`` or ``x,y,z``."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValidationError(f"range '{text}' must look like a:b:n")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise ValidationError(f"range '{text}' needs at least one value")
        return [float(v) for v in np.linspace(start, stop, count)]
    return parse_floats(text)


def parse_floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ValidationError(f"cannot parse number list '{text}'") from e


def parse_names(text: str) -> List[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def parse_grid(text: str) -> Tuple[int, ...]:
    """``100x100`` -> (100, 100)."""
    try:
        dims = tuple(int(v) for v in text.lower().split("x"))
    except ValueError as e:
        raise ValidationError(f"grid '{text}' must look like 100x100") from e
    if len(dims) not in (2, 3) or any(d < 1 for d in dims):
        raise ValidationError(f"grid '{text}' must have 2 or 3 positive sizes")
    return dims


# ---------------------------------------------------------------- CSV output


def format_float(value: Optional[float]) -> str:
    """Shortest round-trip decimal; missing values become an empty cell."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return repr(float(value))


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Write with floats in shortest round-trip form so reruns are byte-identical."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = frame.copy()
    for column in text.columns:
        if pd.api.types.is_float_dtype(text[column]) or text[column].map(
            lambda v: isinstance(v, float) or v is None
        ).all():
            text[column] = text[column].map(format_float)
    text.to_csv(path, index=False, lineterminator="\n")
    return path


# ---------------------------------------------------------------- sweep


def cv_fold_count(grid: RegularGrid, block_side: float) -> int:
    """k for random CV: the number of blocks BCV would use on the same grid."""
    return int(np.prod([math.ceil(n * s / block_side) for n, s in zip(grid.dims, grid.spacing)]))


def sweep_cells(spec: SweepSpec) -> List[CellIndex]:
    return list(itertools.product(
        range(len(spec.delta_values)),
        range(len(spec.tau_values)),
        range(len(spec.r_values)),
        range(len(spec.models)),
    ))


def run_cell(spec: SweepSpec, index: CellIndex) -> CellResult:
    """Simulate one problem and estimate the error of one model with CV, BCV and DRV.

    All models of a (delta, tau, r) cell see the same source and target
    realizations; model randomness and folds derive from the full index.
    """
    i_delta, i_tau, i_r, i_model = index
    delta, tau, r = spec.delta_values[i_delta], spec.tau_values[i_tau], spec.r_values[i_r]
    model_name = canonical_model_name(spec.models[i_model])
    settings = get_settings_instance()

    with SWEEP_CELL_TIME.labels(model=model_name).time():
        shift = ShiftSpec(delta=delta, tau=tau)
        grid = RegularGrid(dims=spec.grid_dims)
        problem_seed = derive_seed(spec.seed, i_delta, i_tau, i_r)
        cell_seed = derive_seed(spec.seed, i_delta, i_tau, i_r, i_model)
        source, target = make_problem(shift, r, grid, spec.labeling, problem_seed)
        factory = model_factory(model_name, cell_seed)

        folds = random_folds(source.n, cv_fold_count(grid, spec.block_side), derive_seed(cell_seed, 1))
        cv = iwcv(factory, source, folds)
        bcv = estimate_bcv(factory, source, spec.block_side, spec.dead_zone_radius)
        lsif_cfg = LsifConfig(
            b=spec.lsif_b,
            sigma=spec.lsif_sigma,
            lambda_=spec.lsif_lambda,
            seed=derive_seed(cell_seed, 2),
            solver_tol=settings.lsif_tol,
            solver_max_iter=settings.lsif_max_iter,
        )
        drv = estimate_drv(factory, source, target.features, lsif_cfg, folds,
                           l=spec.drv_exponent, normalize_weights=spec.normalize_weights)

        model = factory(-1).train(source.features, source.labels)
        error = true_error(model, target_generator(shift, r, grid, spec.labeling), spec.n_mc,
                           seed=derive_seed(problem_seed, 2))

    row = ResultRow(
        delta=delta,
        tau=tau,
        r=r,
        model=model_name,
        config=shiftfns.classify(shift),
        novelty=shiftfns.novelty(shift),
        kl=shiftfns.kl(shift),
        jaccard=shiftfns.jaccard(shift),
        cv=cv.value,
        bcv=bcv.value,
        drv=drv.value if drv.ok else None,
        drv_status=DrvStatus.ok if drv.ok else DrvStatus.unstable,
        true_error=error,
    )
    logger.debug(
        f"Cell delta={delta} tau={tau} r={r} {model_name}: cv={cv.value:.3f} "
        f"bcv={bcv.value:.3f} drv={row.drv} true={error:.3f}"
    )
    return CellResult(index=index, row=row, cv_folds=len(folds), bcv_folds=bcv.n_folds)


def _run_cell_args(args: Tuple[SweepSpec, CellIndex]) -> CellResult:
    return run_cell(*args)


def results_frame(results: Sequence[CellResult]) -> pd.DataFrame:
    records = [r.row.model_dump(mode="json") for r in sorted(results, key=lambda r: r.index)]
    return pd.DataFrame.from_records(records, columns=RESULT_COLUMNS)


def run_sweep(spec: SweepSpec, out_path: Union[str, Path], n_jobs: Optional[int] = None) -> pd.DataFrame:
    """Run every (delta, tau, r, model) cell and write one CSV row per cell.

    Rows are sorted by cell index before writing, so the file does not
    depend on ``n_jobs``.
    """
    n_jobs = n_jobs or get_settings_instance().n_jobs
    cells = sweep_cells(spec)
    logger.info(f"Sweep: {len(cells)} cells on a {spec.grid_dims} grid with {n_jobs} worker(s)")

    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_run_cell_args, [(spec, cell) for cell in cells]))
    else:
        results = [run_cell(spec, cell) for cell in cells]

    unstable = sum(r.row.drv_status == DrvStatus.unstable for r in results)
    if unstable:
        logger.warning(f"DRV unstable in {unstable} of {len(results)} cells")
    frame = results_frame(results)
    write_csv(frame, out_path)
    logger.info(f"Sweep results written to {out_path}")
    return frame


# ---------------------------------------------------------------- ranking


def emit_rank(estimates: Mapping[str, Optional[float]]) -> Ranking:
    """Ascending error order with ties broken by model name."""
    if len(estimates) < 2:
        raise ValidationError("ranking needs at least two models")
    finite = {m: v for m, v in estimates.items() if v is not None and math.isfinite(v)}
    excluded = sorted(m for m in estimates if m not in finite)
    return Ranking(order=sorted(finite, key=lambda m: (finite[m], m)), excluded=excluded)


def kendall_tau(rank_a: Sequence[str], rank_b: Sequence[str]) -> float:
    """Kendall tau between two orderings over their common models."""
    common = [m for m in rank_a if m in set(rank_b)]
    if len(common) < 2:
        return float("nan")
    position_b = {m: i for i, m in enumerate(rank_b)}
    statistic = kendalltau(np.arange(len(common)), [position_b[m] for m in common])[0]
    return float(statistic)


def drv_column(l: float, first: bool) -> str:
    return "drv" if first else f"drv_l{l:g}"


# ---------------------------------------------------------------- tabular


def prepare_domains(
    csv_path: Union[str, Path],
    schema: ColumnSchema,
    mode: TabularMode,
    classes: Optional[Sequence[str]],
    seed: int,
    proportion: Optional[Tuple[float, float]] = None,
):
    """Load, balance, split (or resample) and normalize with source statistics."""
    table = ingest.load_csv(csv_path, schema)
    balanced = ingest.clean_and_balance_table(table, schema, classes, seed)
    source_table, target_table = ingest.split_domains(balanced, schema)
    if TabularMode(mode) == TabularMode.resampled:
        source_table, target_table = ingest.resample_domains(
            source_table, target_table, seed=derive_seed(seed, 1), proportion=proportion
        )
    source, targets, _ = ingest.zscore_normalize(
        ingest.to_dataset(source_table, schema), [ingest.to_dataset(target_table, schema)]
    )
    return source, targets[0]


def run_tabular(
    csv_path: Union[str, Path],
    schema: ColumnSchema,
    out_prefix: Union[str, Path],
    mode: TabularMode = TabularMode.shifted,
    classes: Optional[Sequence[str]] = None,
    models: Optional[Sequence[str]] = None,
    block_sides: Sequence[float] = (10000.0, 10000.0, 500.0),
    k: Union[int, str] = "auto",
    lsif_cfg: Optional[LsifConfig] = None,
    exponents: Sequence[float] = (1.0,),
    dead_zone_radius: float = 0.0,
    normalize_weights: bool = False,
    proportion: Optional[Tuple[float, float]] = None,
    seed: int = 0,
) -> TabularReport:
    """Estimate, rank and compare models on a two-domain table.

    Writes ``<prefix>_estimates.csv``, ``<prefix>_rank.csv`` and
    ``<prefix>_agreement.csv``. The target error trains each model on the
    whole source and scores it on the held-out target labels.
    """
    models = [canonical_model_name(m) for m in (models or TABULAR_MODELS)]
    if len(set(models)) != len(models):
        raise ValidationError("model list contains duplicates")
    exponents = list(exponents) or [1.0]
    source, target = prepare_domains(csv_path, schema, mode, classes, seed, proportion)

    sides = list(block_sides)
    if len(sides) == 1:
        sides = sides * source.coords.shape[1]
    if len(sides) != source.coords.shape[1]:
        raise ValidationError(f"{len(sides)} block sides given for {source.coords.shape[1]} coordinates")
    n_folds = count_blocks(source.coords, sides) if k == "auto" else int(k)
    logger.info(f"Tabular run ({TabularMode(mode).value}): {source.n} source, {target.n} target, k = {n_folds}")
    folds = random_folds(source.n, n_folds, derive_seed(seed, 2))

    cfg = lsif_cfg or LsifConfig(seed=derive_seed(seed, 3))
    try:
        weights = importance_weights(source, target.features, cfg, normalize_weights)
        DRV_STATUS_COUNT.labels(status="ok").inc()
    except NumericalInstabilityError as e:
        logger.warning(f"DRV omitted for every model: {e}")
        DRV_STATUS_COUNT.labels(status="unstable").inc()
        weights = None

    records = []
    for index, name in enumerate(models):
        factory = model_factory(name, derive_seed(seed, 4, index))
        full = factory(-1).train(source.features, source.labels)
        record = {
            "model": name,
            "source_error": zero_one_error(full, source),
            "target_error": zero_one_error(full, target),
            "cv": iwcv(factory, source, folds).value,
            "bcv": estimate_bcv(factory, source, sides, dead_zone_radius).value,
        }
        for position, l in enumerate(exponents):
            column = drv_column(l, position == 0)
            record[column] = float("nan") if weights is None else iwcv(factory, source, folds, weights, l).value
        record["drv_status"] = (DrvStatus.ok if weights is not None else DrvStatus.unstable).value
        records.append(record)
        logger.info(
            f"{name}: target={record['target_error']:.3f} cv={record['cv']:.3f} bcv={record['bcv']:.3f}"
        )
    estimates = pd.DataFrame.from_records(records)

    estimators = ["target_error", "cv", "bcv"] + [drv_column(l, i == 0) for i, l in enumerate(exponents)]
    rankings = {
        column: emit_rank(dict(zip(estimates["model"], estimates[column])))
        for column in estimators
    }
    ranks = pd.DataFrame({"rank": np.arange(1, len(models) + 1)})
    for column, ranking in rankings.items():
        ranks[column.replace("_error", "")] = ranking.order + [""] * (len(models) - len(ranking.order))

    target_order = rankings["target_error"].order
    agreement = pd.DataFrame.from_records([
        {
            "estimator": column,
            "kendall_tau": kendall_tau(ranking.order, target_order),
            "n_ranked": len(ranking.order),
            "excluded": ";".join(ranking.excluded),
        }
        for column, ranking in rankings.items()
        if column != "target_error"
    ])

    prefix = str(out_prefix)
    paths = {
        "estimates": write_csv(estimates, f"{prefix}_estimates.csv"),
        "rank": write_csv(ranks, f"{prefix}_rank.csv"),
        "agreement": write_csv(agreement, f"{prefix}_agreement.csv"),
    }
    logger.info(f"Tabular results written with prefix {prefix}")
    return TabularReport(estimates=estimates, ranks=ranks, agreement=agreement, paths=paths)
