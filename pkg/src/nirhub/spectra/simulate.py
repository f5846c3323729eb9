"""Synthetic scanner: Gaussian absorption bands on a flat baseline.

Stands in for scanner hardware so sessions, training, and tests can run
anywhere. Deterministic: the same (recipe, sigma, seed) always yields the
same spectrum, including metadata.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from nirhub.errors import ConfigError
from nirhub.spectra.spectrum import (
    AcquisitionMeta,
    PipelineConfig,
    Spectrum,
    SpectrumSource,
)

# Fixed capture instant so simulated scans are pure functions of their inputs.
SIMULATED_CAPTURE = datetime(2000, 1, 1, tzinfo=timezone.utc)

SIMULATOR_DEVICE_ID = "simulator"


@dataclass(frozen=True)
class AbsorptionBand:
    """One Gaussian dip: center (nm), depth, and width (nm, one sigma)."""

    center_nm: float
    amplitude: float
    width_nm: float

    def __post_init__(self) -> None:
        if self.amplitude <= 0:
            raise ConfigError(f"band amplitude must be positive, got {self.amplitude}")
        if self.width_nm <= 0:
            raise ConfigError(f"band width must be positive, got {self.width_nm}")


@dataclass(frozen=True)
class MaterialRecipe:
    """Baseline reflectance level plus the material's absorption bands."""

    baseline: float = 1.0
    bands: tuple[AbsorptionBand, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "bands", tuple(self.bands))


def simulate_scan(
    recipe: MaterialRecipe,
    noise_sigma: float = 0.0,
    seed: int = 0,
    *,
    config: PipelineConfig | None = None,
    device_id: str = SIMULATOR_DEVICE_ID,
    label: str | None = None,
    source: SpectrumSource = SpectrumSource.IDENTIFY_SCAN,
) -> Spectrum:
    """Evaluate the recipe on the grid and add seeded Gaussian noise.

    intensity(w) = baseline - sum_i A_i * exp(-(w - c_i)^2 / (2 * width_i^2)) + noise
    """
    if noise_sigma < 0:
        raise ConfigError(f"noise_sigma must be >= 0, got {noise_sigma}")
    grid = (config or PipelineConfig()).grid()
    intensities = np.full_like(grid, float(recipe.baseline))
    for band in recipe.bands:
        intensities -= band.amplitude * np.exp(
            -((grid - band.center_nm) ** 2) / (2.0 * band.width_nm**2)
        )
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        intensities = intensities + rng.normal(0.0, noise_sigma, size=grid.shape)
    return Spectrum(
        wavelengths_nm=grid,
        intensities=intensities,
        meta=AcquisitionMeta(
            device_id=device_id,
            captured_at=SIMULATED_CAPTURE,
            source=source,
            label=label,
        ),
    )
