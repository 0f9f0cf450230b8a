"""Tests for spatial datasets, grids and variograms."""
import numpy as np
import pydantic
import pytest

from src.core.services.spatial import (
    EmpiricalVariogram,
    SpatialDataset,
    empirical_variogram,
    fit_range,
    fit_variogram,
    grid_sites,
    site_index,
)
from src.schemas.spatial import RegularGrid, VariogramKind, VariogramModel
from src.utils.exceptions import ValidationError, VariogramFitError


def test_grid_sites_column_major():
    """Test that the first axis varies fastest."""
    grid = RegularGrid(dims=(3, 2))
    sites = grid_sites(grid)

    assert sites.shape == (6, 2)
    assert sites[:4].tolist() == [[0, 0], [1, 0], [2, 0], [0, 1]]


def test_site_index_inverts_grid_sites():
    """Test exact round trip on a 3D grid with spacing and origin."""
    grid = RegularGrid(dims=(4, 3, 2), spacing=(2.0, 1.0, 0.5), origin=(1.0, 0.0, -1.0))
    sites = grid_sites(grid)

    assert [site_index(grid, site) for site in sites] == list(range(grid.n_sites))
    with pytest.raises(ValidationError):
        site_index(grid, (2.0, 0.0, -1.0))


@pytest.mark.parametrize("dims", [(0, 5), (10,), (2, 2, 2, 2)])
def test_grid_rejects_bad_dims(dims):
    """Test grid axis validation."""
    with pytest.raises(pydantic.ValidationError):
        RegularGrid(dims=dims)


def test_grid_spacing_must_be_positive():
    with pytest.raises(pydantic.ValidationError):
        RegularGrid(dims=(2, 2), spacing=(1.0, 0.0))


@pytest.mark.parametrize("kind", list(VariogramKind))
def test_variogram_model_shape(kind):
    """Test gamma(0) = 0, covariance(0) = sill and the plateau at large lags."""
    model = VariogramModel(kind=kind, range=10.0, sill=2.0)

    assert model.gamma(0.0) == pytest.approx(0.0)
    assert model.covariance(0.0) == pytest.approx(2.0)
    assert model.gamma(100.0) == pytest.approx(2.0, abs=1e-6)
    assert np.all(np.diff(model.gamma(np.linspace(0, 30, 50))) >= -1e-12)


def test_effective_range_convention():
    """Test gaussian and exponential models reach 95% of the sill at the range."""
    for kind in (VariogramKind.gaussian, VariogramKind.exponential):
        model = VariogramModel(kind=kind, range=7.0)
        assert model.gamma(7.0) == pytest.approx(1 - np.exp(-3))


def test_variogram_model_rejects_nugget():
    with pytest.raises(pydantic.ValidationError):
        VariogramModel(range=1.0, nugget=0.1)


def test_dataset_validation():
    """Test shape and finiteness checks on construction."""
    with pytest.raises(ValidationError):
        SpatialDataset(coords=np.zeros((3, 2)), features=np.zeros((2, 1)))
    with pytest.raises(ValidationError):
        SpatialDataset(coords=np.zeros((2, 2)), features=np.array([[0.0], [np.nan]]))
    with pytest.raises(ValidationError):
        SpatialDataset(coords=np.zeros((2, 2)), features=np.zeros((2, 1)), labels=[1])


def test_dataset_is_read_only(blob_dataset):
    with pytest.raises(ValueError):
        blob_dataset.features[0, 0] = 10.0


def test_dataset_subset(blob_dataset):
    part = blob_dataset.subset([0, 5, 7])

    assert part.n == 3
    assert part.labels.tolist() == blob_dataset.labels[[0, 5, 7]].tolist()


def test_empirical_variogram_single_pair():
    """Test one pair at distance 1 lands in the half-open bin [1, 2)."""
    data = SpatialDataset(coords=[[0.0, 0.0], [1.0, 0.0]], features=[0.0, 2.0])
    ev = empirical_variogram(data, n_lags=2, max_lag=2.0)

    assert ev.counts.tolist() == [0, 1]
    assert np.isnan(ev.gammas[0])
    assert ev.gammas[1] == pytest.approx(2.0)
    assert ev.lags.tolist() == [0.5, 1.5]


def test_empirical_variogram_counts_each_pair_once():
    """Test 1D transect: values equal to position give gamma(h) = h^2 / 2."""
    coords = np.column_stack([np.arange(600.0), np.zeros(600)])
    data = SpatialDataset(coords=coords, features=np.arange(600.0))
    ev = empirical_variogram(data, n_lags=4, max_lag=4.0)

    assert ev.counts.tolist() == [0, 599, 598, 597]
    assert ev.gammas[1:].tolist() == pytest.approx([0.5, 2.0, 4.5])


def test_empirical_variogram_errors():
    data = SpatialDataset(coords=[[0.0, 0.0], [10.0, 0.0]], features=[0.0, 1.0])
    with pytest.raises(ValidationError, match="no pairs"):
        empirical_variogram(data, n_lags=2, max_lag=5.0)
    with pytest.raises(ValidationError):
        empirical_variogram(data.subset([0]))


def _exact_variogram(model: VariogramModel, n_lags: int = 20, width: float = 2.0) -> EmpiricalVariogram:
    lags = (np.arange(n_lags) + 0.5) * width
    return EmpiricalVariogram(
        lags=lags,
        gammas=model.gamma(lags),
        counts=np.full(n_lags, 100),
        bin_width=width,
    )


@pytest.mark.parametrize("kind", list(VariogramKind))
def test_fit_recovers_noiseless_model(kind):
    """Test the weighted fit recovers range and sill from exact semivariances."""
    truth = VariogramModel(kind=kind, range=15.0, sill=1.5)
    fit = fit_variogram(_exact_variogram(truth), kind)

    assert fit.model.range == pytest.approx(15.0, rel=1e-3)
    assert fit.model.sill == pytest.approx(1.5, rel=1e-3)
    assert not fit.degenerate


def test_fit_flags_white_noise_as_degenerate():
    """Test a flat variogram collapses the range below the bin width."""
    ev = EmpiricalVariogram(
        lags=(np.arange(10) + 0.5) * 2.0,
        gammas=np.ones(10),
        counts=np.full(10, 50),
        bin_width=2.0,
    )
    fit = fit_variogram(ev, VariogramKind.gaussian)

    assert fit.degenerate
    assert fit.model.range <= 2.0


def test_fit_needs_three_bins():
    ev = EmpiricalVariogram(
        lags=np.array([0.5, 1.5]), gammas=np.array([0.1, 0.2]), counts=np.array([3, 3]), bin_width=1.0
    )
    with pytest.raises(ValidationError):
        fit_range(ev)


def test_fit_failure_reports_best_params():
    """Test an evaluation budget too small to converge raises with the best iterate."""
    ev = _exact_variogram(VariogramModel(range=15.0, sill=1.5))
    noisy = EmpiricalVariogram(
        lags=ev.lags,
        gammas=ev.gammas + 0.3 * np.sin(ev.lags),
        counts=ev.counts,
        bin_width=ev.bin_width,
    )
    with pytest.raises(VariogramFitError) as info:
        fit_variogram(noisy, VariogramKind.gaussian, max_nfev=1)
    assert len(info.value.best_params) == 2


def _noise_field(seed: int, dims=(30, 30)) -> SpatialDataset:
    grid = RegularGrid(dims=dims)
    values = np.random.Generator(np.random.PCG64(seed)).standard_normal(grid.n_sites)
    return SpatialDataset(coords=grid_sites(grid), features=values)


def test_empirical_variogram_ignores_offset_and_scales_quadratically():
    """Test adding a constant leaves gammas unchanged and scaling by s multiplies them by s^2."""
    data = _noise_field(4)
    shifted = SpatialDataset(coords=data.coords, features=data.features + 7.5)
    scaled = SpatialDataset(coords=data.coords, features=3.0 * data.features)

    base = empirical_variogram(data, n_lags=8, max_lag=8.0)

    assert empirical_variogram(shifted, n_lags=8, max_lag=8.0).gammas == pytest.approx(base.gammas, rel=1e-9)
    assert empirical_variogram(scaled, n_lags=8, max_lag=8.0).gammas == pytest.approx(9.0 * base.gammas,
                                                                                      rel=1e-9)


def test_white_noise_variogram_sits_at_the_variance():
    """Test i.i.d. unit normal fields on 50 x 50 give gamma close to 1 in well-populated bins."""
    runs = [empirical_variogram(_noise_field(seed, dims=(50, 50)), n_lags=10, max_lag=10.0)
            for seed in range(20)]
    counts = runs[0].counts
    mean_gamma = np.mean([ev.gammas for ev in runs], axis=0)

    assert counts.max() >= 1000
    assert np.all(np.abs(mean_gamma[counts >= 1000] - 1.0) <= 0.1)
