"""Canonical preprocessing: grid resampling, Savitzky-Golay, SNV.

All functions are pure; the composition :func:`preprocess` turns a raw
spectrum into the feature vector the classifier consumes.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.signal import savgol_filter

from nirhub.errors import ConfigError, CoverageError, DegenerateSpectrumError
from nirhub.spectra.spectrum import PipelineConfig, Spectrum

SNV_MIN_STD = 1e-12


def resample(spectrum: Spectrum, config: PipelineConfig) -> Spectrum:
    """Interpolate a spectrum onto the canonical uniform grid.

    Piecewise-linear, never extrapolating: the measured range must cover the
    grid or a :class:`CoverageError` is raised. Metadata is preserved.
    """
    wl = spectrum.wavelengths_nm
    if wl[0] > config.grid_start_nm or wl[-1] < config.grid_end_nm:
        raise CoverageError(
            f"spectrum covers [{wl[0]:g}, {wl[-1]:g}] nm but the grid needs "
            f"[{config.grid_start_nm:g}, {config.grid_end_nm:g}] nm",
            details={
                "spectrum_range": [float(wl[0]), float(wl[-1])],
                "grid_range": [config.grid_start_nm, config.grid_end_nm],
            },
        )
    grid = config.grid()
    return Spectrum(
        wavelengths_nm=grid,
        intensities=np.interp(grid, wl, spectrum.intensities),
        meta=spectrum.meta,
    )


def savitzky_golay(
    intensities: ArrayLike, window: int, polyorder: int, derivative: int = 0
) -> NDArray[np.float64]:
    """Least-squares polynomial smoothing / differentiation (unit sample spacing).

    Each output point is the ``derivative``-th derivative of the polynomial of
    degree ``polyorder`` fit over the centered window; points too close to the
    edge use the fit of the nearest full window evaluated at their offset, so
    the output has the same length as the input.
    """
    values = np.asarray(intensities, dtype=float)
    if window % 2 == 0 or window < 3:
        raise ConfigError(f"window must be an odd integer >= 3, got {window}")
    if not (0 <= polyorder < window):
        raise ConfigError(f"polyorder must be in [0, window), got {polyorder}")
    if not (0 <= derivative <= polyorder):
        raise ConfigError(
            f"derivative must be in [0, polyorder], got {derivative}"
        )
    if values.ndim != 1 or len(values) < window:
        raise ConfigError(
            f"input must be a 1-d array of length >= window ({window}), "
            f"got length {values.size}"
        )
    return savgol_filter(values, window, polyorder, deriv=derivative, delta=1.0, mode="interp")


def snv(intensities: ArrayLike) -> NDArray[np.float64]:
    """Standard normal variate: center and scale to population std 1."""
    values = np.asarray(intensities, dtype=float)
    std = float(np.std(values))
    if std <= SNV_MIN_STD:
        raise DegenerateSpectrumError(
            f"spectrum is flat (population std {std:.3g}); scan carries no shape information"
        )
    return (values - np.mean(values)) / std


def preprocess(spectrum: Spectrum, config: PipelineConfig) -> NDArray[np.float64]:
    """Resample, then Savitzky-Golay, then SNV (if enabled).

    Deterministic: identical inputs give bitwise-identical feature vectors of
    length ``config.grid_points``. Stage errors (CoverageError, ConfigError,
    DegenerateSpectrumError) propagate unchanged.
    """
    resampled = resample(spectrum, config)
    features = savitzky_golay(
        resampled.intensities,
        window=config.sg_window,
        polyorder=config.sg_polyorder,
        derivative=config.sg_derivative,
    )
    if config.apply_snv:
        features = snv(features)
    return features


def stage_of(exc: Exception) -> str:
    """Name the pipeline stage a propagated preprocessing error came from."""
    if isinstance(exc, CoverageError):
        return "resample"
    if isinstance(exc, DegenerateSpectrumError):
        return "snv"
    return "savitzky_golay"
