import numpy as np
import pytest

from nirhub.errors import ConfigError
from nirhub.spectra import (
    AbsorptionBand,
    MaterialRecipe,
    PipelineConfig,
    simulate_scan,
    validate,
)


def test_band_depth_at_center():
    recipe = MaterialRecipe(
        baseline=1.0, bands=(AbsorptionBand(center_nm=1200, amplitude=0.4, width_nm=50),)
    )
    cfg = PipelineConfig(grid_start_nm=900, grid_end_nm=1700, grid_points=801)
    spec = simulate_scan(recipe, noise_sigma=0.0, config=cfg)
    at_center = spec.intensities[np.where(spec.wavelengths_nm == 1200.0)][0]
    assert at_center == pytest.approx(0.6, abs=1e-12)


def test_no_bands_gives_flat_baseline():
    spec = simulate_scan(MaterialRecipe(baseline=0.85), noise_sigma=0.0)
    assert np.allclose(spec.intensities, 0.85, atol=0)


def test_same_seed_identical_spectra():
    recipe = MaterialRecipe(
        baseline=1.0, bands=(AbsorptionBand(1100, 0.4, 60), AbsorptionBand(1500, 0.2, 40))
    )
    a = simulate_scan(recipe, noise_sigma=0.05, seed=42)
    b = simulate_scan(recipe, noise_sigma=0.05, seed=42)
    assert np.array_equal(a.intensities, b.intensities)
    assert np.array_equal(a.wavelengths_nm, b.wavelengths_nm)
    assert a.meta == b.meta


def test_different_seeds_differ():
    recipe = MaterialRecipe(baseline=1.0)
    a = simulate_scan(recipe, noise_sigma=0.05, seed=1)
    b = simulate_scan(recipe, noise_sigma=0.05, seed=2)
    assert not np.array_equal(a.intensities, b.intensities)


def test_simulated_spectrum_is_valid():
    recipe = MaterialRecipe(baseline=1.0, bands=(AbsorptionBand(1300, 0.4, 60),))
    assert validate(simulate_scan(recipe, noise_sigma=0.01, seed=3)) == []


def test_negative_noise_rejected():
    with pytest.raises(ConfigError):
        simulate_scan(MaterialRecipe(), noise_sigma=-0.1)


@pytest.mark.parametrize("amplitude,width", [(0.0, 50.0), (-0.4, 50.0), (0.4, 0.0), (0.4, -1.0)])
def test_nonpositive_band_parameters_rejected(amplitude, width):
    with pytest.raises(ConfigError):
        AbsorptionBand(center_nm=1200, amplitude=amplitude, width_nm=width)
