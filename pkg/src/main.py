"""Command line entry point: sweep, tabular, shiftfn, variogram and simulate."""
import argparse
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd
from loguru import logger

from src.config.logging import configure_logging
from src.config.settings import get_settings_instance
from src.core.services import experiment, shiftfns
from src.core.services.simulate import derive_seed, simulate, variogram_for_range
from src.core.services.spatial import SpatialDataset, empirical_variogram, fit_variogram
from src.schemas.dre import LsifConfig
from src.schemas.experiment import SweepSpec, TabularMode
from src.schemas.ingest import ColumnSchema
from src.schemas.simulation import LabelingFunction, ShiftSpec, SimulationMethod, SimulationSpec
from src.schemas.spatial import RegularGrid, VariogramKind
from src.utils.exceptions import ConfigError, GeoShiftError, ValidationError


def _add_lsif_flags(parser: argparse.ArgumentParser, settings) -> None:
    parser.add_argument("--lsif-sigma", type=float, default=settings.lsif_sigma, help="LSIF kernel width")
    parser.add_argument("--lsif-b", type=int, default=settings.lsif_b, help="Number of LSIF kernels")
    parser.add_argument("--lsif-lambda", type=float, default=settings.lsif_lambda, help="LSIF L1 penalty")
    parser.add_argument("--normalize-weights", action="store_true",
                        help="Rescale importance weights to mean one")
    parser.add_argument("--dead-zone", type=float, default=settings.dead_zone_radius,
                        help="BCV dead zone radius")


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings_instance()
    parser = argparse.ArgumentParser(
        prog="geoshift",
        description="Estimate generalization error of geostatistical models under covariate shift",
        allow_abbrev=False,
    )
    parser.add_argument("--log-level", default=settings.log_level, help="Log level")
    parser.add_argument("--log-file", default=settings.log_file, help="Optional rotating log file")
    commands = parser.add_subparsers(dest="command", required=True)

    sweep = commands.add_parser(
        "sweep", help="Gaussian process (delta, tau, r) experiment", allow_abbrev=False
    )
    sweep.add_argument("--deltas", default="0:1:5", help="Mean shifts as a:b:n or a list")
    sweep.add_argument("--taus", default="0.2:1:5", help="Variance shifts as a:b:n or a list")
    sweep.add_argument("--ranges", default="0,10,20", help="Variogram ranges")
    sweep.add_argument("--grid", default="100x100", help="Grid size, e.g. 100x100")
    sweep.add_argument("--models", default="knn,tree", help="Comma-separated model names")
    sweep.add_argument("--p", type=int, default=1, help="Norm of the labeling function")
    sweep.add_argument("--w", type=float, default=4.0, help="Angular frequency of the labeling function")
    sweep.add_argument("--mc", type=int, default=100, help="Monte Carlo target realizations")
    sweep.add_argument("--block-side", type=float, default=settings.block_side, help="BCV block side")
    sweep.add_argument("--l", type=float, default=settings.drv_exponent, help="DRV weight exponent")
    _add_lsif_flags(sweep, settings)
    sweep.add_argument("--jobs", type=int, default=settings.n_jobs, help="Worker processes")
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--out", default="results.csv", help="Result CSV path")

    tabular = commands.add_parser(
        "tabular", help="Rank models on a two-domain table", allow_abbrev=False
    )
    tabular.add_argument("--csv", required=True, help="Input CSV file")
    tabular.add_argument("--coords", required=True, help="Coordinate columns, e.g. X,Y,Z")
    tabular.add_argument("--features", required=True, help="Feature columns")
    tabular.add_argument("--label", required=True, help="Label column")
    tabular.add_argument("--domain-col", required=True, help="Column flagging source rows")
    tabular.add_argument("--mode", choices=[m.value for m in TabularMode], default=TabularMode.shifted.value)
    tabular.add_argument("--classes", default=None, help="The two classes to keep (default: most frequent)")
    tabular.add_argument("--models", default=",".join(experiment.TABULAR_MODELS), help="Models to rank")
    tabular.add_argument("--block-sides", default="10000,10000,500", help="BCV block sides per axis")
    tabular.add_argument("--k", default="auto", help="CV folds, or 'auto' for the source block count")
    tabular.add_argument("--l", type=float, action="append", default=None,
                         help="DRV exponent; repeat for extra drv_l<value> columns")
    tabular.add_argument("--proportion", default=None, help="Source:target sizes for resampled mode")
    _add_lsif_flags(tabular, settings)
    tabular.add_argument("--seed", type=int, default=0)
    tabular.add_argument("--out-prefix", default="run", help="Prefix of the output CSV files")

    shiftfn = commands.add_parser(
        "shiftfn", help="Print config,kl,jaccard,novelty for a shift", allow_abbrev=False
    )
    shiftfn.add_argument("--delta", type=float, required=True)
    shiftfn.add_argument("--tau", type=float, required=True)

    variogram = commands.add_parser(
        "variogram", help="Empirical variogram and fitted range", allow_abbrev=False
    )
    variogram.add_argument("--csv", default=None, help="Input CSV; omit to simulate a field")
    variogram.add_argument("--coords", default="X,Y", help="Coordinate columns")
    variogram.add_argument("--feature", default=None, help="Feature column")
    variogram.add_argument("--grid", default="100x100", help="Simulated grid size")
    variogram.add_argument("--range", type=float, default=20.0, help="Simulated variogram range")
    variogram.add_argument("--model", choices=[k.value for k in VariogramKind], default="gaussian")
    variogram.add_argument("--lags", type=int, default=20, help="Number of lag bins")
    variogram.add_argument("--max-lag", type=float, default=None, help="Largest lag considered")
    variogram.add_argument("--seed", type=int, default=0)

    sim = commands.add_parser(
        "simulate", help="Write a simulated field to CSV", allow_abbrev=False
    )
    sim.add_argument("--grid", default="100x100", help="Grid size")
    sim.add_argument("--range", type=float, default=20.0, help="Variogram range")
    sim.add_argument("--model", choices=[k.value for k in VariogramKind], default="gaussian")
    sim.add_argument("--sill", type=float, default=1.0)
    sim.add_argument("--mean", type=float, default=0.0)
    sim.add_argument("--processes", type=int, default=1)
    sim.add_argument("--rho", type=float, default=0.0, help="Correlation of two processes")
    sim.add_argument("--method", choices=[m.value for m in SimulationMethod], default="spectral")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", default="field.csv", help="Output CSV path")
    return parser


def run_sweep_command(args: argparse.Namespace) -> None:
    spec = SweepSpec(
        delta_values=experiment.parse_range(args.deltas),
        tau_values=experiment.parse_range(args.taus),
        r_values=experiment.parse_floats(args.ranges),
        grid_dims=experiment.parse_grid(args.grid),
        labeling=LabelingFunction(p=args.p, w=args.w),
        models=experiment.parse_names(args.models),
        n_mc=args.mc,
        seed=args.seed,
        block_side=args.block_side,
        dead_zone_radius=args.dead_zone,
        lsif_sigma=args.lsif_sigma,
        lsif_b=args.lsif_b,
        lsif_lambda=args.lsif_lambda,
        drv_exponent=args.l,
        normalize_weights=args.normalize_weights,
    )
    experiment.run_sweep(spec, args.out, n_jobs=args.jobs)


def _parse_proportion(text: Optional[str]):
    if text is None:
        return None
    parts = text.split(":")
    if len(parts) != 2:
        raise ValidationError(f"proportion '{text}' must look like 300000:50000")
    return float(parts[0]), float(parts[1])


def run_tabular_command(args: argparse.Namespace) -> None:
    settings = get_settings_instance()
    schema = ColumnSchema(
        coord_columns=experiment.parse_names(args.coords),
        feature_columns=experiment.parse_names(args.features),
        label_column=args.label,
        domain_column=args.domain_col,
    )
    k = args.k if args.k == "auto" else int(args.k)
    report = experiment.run_tabular(
        args.csv,
        schema,
        args.out_prefix,
        mode=TabularMode(args.mode),
        classes=experiment.parse_names(args.classes) if args.classes else None,
        models=experiment.parse_names(args.models),
        block_sides=experiment.parse_floats(args.block_sides),
        k=k,
        lsif_cfg=LsifConfig(
            b=args.lsif_b,
            sigma=args.lsif_sigma,
            lambda_=args.lsif_lambda,
            seed=derive_seed(args.seed, 3),
            solver_tol=settings.lsif_tol,
            solver_max_iter=settings.lsif_max_iter,
        ),
        exponents=args.l or [settings.drv_exponent],
        dead_zone_radius=args.dead_zone,
        normalize_weights=args.normalize_weights,
        proportion=_parse_proportion(args.proportion),
        seed=args.seed,
    )
    print(report.agreement.to_csv(index=False, lineterminator="\n"), end="")


def run_shiftfn_command(args: argparse.Namespace) -> None:
    shift = ShiftSpec(delta=args.delta, tau=args.tau)
    values = [shiftfns.kl(shift), shiftfns.jaccard(shift), shiftfns.novelty(shift)]
    print(",".join([shiftfns.classify(shift).value] + [experiment.format_float(v) for v in values]))


def _variogram_data(args: argparse.Namespace) -> SpatialDataset:
    if args.csv is None:
        spec = SimulationSpec(
            grid=RegularGrid(dims=experiment.parse_grid(args.grid)),
            variogram=variogram_for_range(args.range, kind=VariogramKind(args.model)),
            seed=args.seed,
        )
        return simulate(spec)
    if args.feature is None:
        raise ValidationError("--feature is required with --csv")
    coords = experiment.parse_names(args.coords)
    table = pd.read_csv(args.csv, usecols=coords + [args.feature]).dropna()
    return SpatialDataset(
        coords=table[coords].to_numpy(dtype=float),
        features=table[[args.feature]].to_numpy(dtype=float),
        feature_names=(args.feature,),
    )


def run_variogram_command(args: argparse.Namespace) -> None:
    ev = empirical_variogram(_variogram_data(args), n_lags=args.lags, max_lag=args.max_lag)
    print("lag,gamma,count")
    for lag, gamma, count in zip(ev.lags, ev.gammas, ev.counts):
        print(f"{experiment.format_float(lag)},{experiment.format_float(gamma)},{int(count)}")
    fit = fit_variogram(ev, args.model)
    print(f"# model={fit.model.kind.value} range={fit.model.range:.6g} "
          f"sill={fit.model.sill:.6g} degenerate={str(fit.degenerate).lower()}")


def run_simulate_command(args: argparse.Namespace) -> None:
    spec = SimulationSpec(
        grid=RegularGrid(dims=experiment.parse_grid(args.grid)),
        variogram=variogram_for_range(args.range, sill=args.sill, kind=VariogramKind(args.model)),
        mean=args.mean,
        n_processes=args.processes,
        rho=args.rho,
        method=SimulationMethod(args.method),
        seed=args.seed,
    )
    data = simulate(spec)
    columns = ["x", "y", "z"][: data.coords.shape[1]] + [f"Z{i + 1}" for i in range(data.n_features)]
    frame = pd.DataFrame(np.column_stack([data.coords, data.features]), columns=columns)
    experiment.write_csv(frame, args.out)
    logger.info(f"Simulated field written to {args.out}")


COMMANDS = {
    "sweep": run_sweep_command,
    "tabular": run_tabular_command,
    "shiftfn": run_shiftfn_command,
    "variogram": run_variogram_command,
    "simulate": run_simulate_command,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Run one command; returns the process exit code."""
    try:
        parser = build_parser()
    except ConfigError as e:
        logger.error(str(e))
        return 1
    args = parser.parse_args(argv)
    configure_logging(args.log_level, Path(args.log_file) if args.log_file else None)
    try:
        COMMANDS[args.command](args)
    except (GeoShiftError, ValueError) as e:
        logger.error(f"{args.command} failed: {e}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
