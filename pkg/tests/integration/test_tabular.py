"""End-to-end tests of the two-domain tabular ranking workflow."""
import math

import pandas as pd
import pytest

from src.core.services.experiment import run_tabular
from src.schemas.dre import LsifConfig
from src.schemas.experiment import TabularMode
from src.utils.exceptions import IngestError, ValidationError

BLOCK_SIDES = (250.0, 250.0, 100.0)


def test_tabular_writes_estimates_ranks_and_agreement(tmp_path, make_two_domain_table, write_table, well_schema):
    """Test output files and the permutation property of every rank column."""
    path = write_table(make_two_domain_table(n_source=300, n_target=200, target_center=(1.0, -1.0),
                                             labeler="noisy", seed=3))
    models = ["dummy", "logistic", "tree"]

    report = run_tabular(path, well_schema, tmp_path / "run", models=models, block_sides=BLOCK_SIDES,
                         exponents=(1.0, 0.5), seed=1)

    assert set(report.paths) == {"estimates", "rank", "agreement"}
    assert all(p.exists() for p in report.paths.values())
    assert list(report.estimates.columns) == [
        "model", "source_error", "target_error", "cv", "bcv", "drv", "drv_l0.5", "drv_status",
    ]
    assert report.estimates["model"].tolist() == models
    assert list(report.ranks.columns) == ["rank", "target", "cv", "bcv", "drv", "drv_l0.5"]
    for column in report.ranks.columns[1:]:
        assert sorted(report.ranks[column]) == sorted(models)
    assert report.agreement["estimator"].tolist() == ["cv", "bcv", "drv", "drv_l0.5"]
    assert (report.agreement["n_ranked"] == 3).all()

    written = pd.read_csv(report.paths["estimates"])
    assert written["cv"].tolist() == pytest.approx(report.estimates["cv"].tolist())


def test_tabular_is_deterministic(tmp_path, make_two_domain_table, write_table, well_schema):
    path = write_table(make_two_domain_table(n_source=200, n_target=150, labeler="noisy", seed=4))
    kwargs = dict(models=["gaussian_nb", "knn"], block_sides=BLOCK_SIDES, seed=9)

    first = run_tabular(path, well_schema, tmp_path / "a", **kwargs)
    second = run_tabular(path, well_schema, tmp_path / "b", **kwargs)

    for name in ("estimates", "rank", "agreement"):
        assert first.paths[name].read_bytes() == second.paths[name].read_bytes()


def test_unstable_weights_drop_drv_for_every_model(tmp_path, make_two_domain_table, write_table, well_schema):
    """Test a failed LSIF solve leaves DRV empty and excluded instead of aborting."""
    path = write_table(make_two_domain_table(n_source=200, n_target=150, labeler="noisy", seed=5))
    models = ["dummy", "knn"]

    report = run_tabular(path, well_schema, tmp_path / "run", models=models, block_sides=BLOCK_SIDES,
                         lsif_cfg=LsifConfig(solver_tol=1e-300, solver_max_iter=1), seed=2)

    assert report.estimates["drv"].isna().all()
    assert (report.estimates["drv_status"] == "unstable").all()
    assert report.ranks["drv"].tolist() == ["", ""]
    drv_row = report.agreement.set_index("estimator").loc["drv"]
    assert math.isnan(drv_row["kendall_tau"])
    assert drv_row["excluded"] == "dummy;knn"
    assert "dummy;knn" in report.paths["agreement"].read_text()


def test_explicit_fold_count(tmp_path, make_two_domain_table, write_table, well_schema):
    path = write_table(make_two_domain_table(n_source=200, n_target=150, labeler="noisy", seed=6))

    report = run_tabular(path, well_schema, tmp_path / "run", models=["dummy", "tree"],
                         block_sides=BLOCK_SIDES, k=5, seed=0)

    assert report.estimates["cv"].between(0, 1).all()


def test_default_blocks_cover_a_small_survey(tmp_path, make_two_domain_table, write_table, well_schema):
    """Test field-scale block sides on a 1 km survey leave a single block and fail."""
    path = write_table(make_two_domain_table(n_source=200, n_target=150, labeler="noisy", seed=6))
    with pytest.raises(ValidationError):
        run_tabular(path, well_schema, tmp_path / "run", models=["dummy", "tree"], seed=0)


def test_one_sided_domains_fail(tmp_path, make_two_domain_table, write_table, well_schema):
    table = make_two_domain_table(n_source=100, n_target=50, labeler="noisy").assign(ONSHORE=1)
    with pytest.raises(IngestError, match="one-sided"):
        run_tabular(write_table(table), well_schema, tmp_path / "run", models=["dummy", "knn"])


@pytest.mark.slow
def test_cv_prefers_overfit_models_under_shift(tmp_path, make_two_domain_table, write_table, well_schema):
    """Test CV puts tree and knn on top while the target rank pushes them down.

    Both models fit the flipped band of the source and carry it into the
    target, which lies past the band where linear models stay right.
    """
    path = write_table(make_two_domain_table(n_source=1000, n_target=500, target_center=(0.0, 7.5),
                                             labeler="band_flip", seed=0))

    report = run_tabular(path, well_schema, tmp_path / "shifted", mode=TabularMode.shifted,
                         models=["logistic", "gaussian_nb", "dummy", "knn", "tree"], block_sides=BLOCK_SIDES,
                         seed=0)

    cv_order = report.ranks["cv"].tolist()
    target_order = report.ranks["target"].tolist()
    target_error = report.estimates.set_index("model")["target_error"]
    assert set(cv_order[:2]) == {"knn", "tree"}
    assert {"knn", "tree"} <= set(target_order[2:])
    assert target_error["knn"] > 0.5
    assert target_error["tree"] > 0.5
    assert target_error["logistic"] < target_error[["knn", "tree"]].min()


@pytest.mark.slow
def test_estimators_rank_correctly_without_shift(tmp_path, make_two_domain_table, write_table, well_schema):
    """Test every estimator ranks models like the target once domains are resampled."""
    path = write_table(make_two_domain_table(n_source=3000, n_target=2000, target_center=(1.0, -1.0),
                                             labeler="noisy", seed=1))

    report = run_tabular(path, well_schema, tmp_path / "resampled", mode=TabularMode.resampled,
                         models=["dummy", "logistic", "gaussian_nb", "knn", "tree"],
                         block_sides=BLOCK_SIDES, proportion=(3.0, 2.0), seed=1)

    taus = report.agreement.set_index("estimator")["kendall_tau"]
    for estimator in ("cv", "bcv", "drv"):
        assert taus[estimator] >= 0.7
