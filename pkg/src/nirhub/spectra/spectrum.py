"""Spectrum data model: one scan's wavelength/intensity pairs plus metadata."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone

import numpy as np
from numpy.typing import NDArray

from nirhub.errors import ConfigError

NIR_BAND_MIN_NM = 780.0
NIR_BAND_MAX_NM = 2500.0
MIN_POINTS = 8


class SpectrumSource(str, enum.Enum):
    """How a spectrum entered the system."""

    REFERENCE_UPLOAD = "reference_upload"
    IN_SITU_TRAINING = "in_situ_training"
    IDENTIFY_SCAN = "identify_scan"
    FEEDBACK = "feedback"


# Sources that only make sense with a class label attached.
LABELED_SOURCES = frozenset(
    {SpectrumSource.REFERENCE_UPLOAD, SpectrumSource.IN_SITU_TRAINING}
)


@dataclass
class AcquisitionMeta:
    """Where, when, and why a spectrum was captured."""

    device_id: str
    captured_at: datetime
    source: SpectrumSource
    label: str | None = None

    def __post_init__(self) -> None:
        if isinstance(self.source, str):
            self.source = SpectrumSource(self.source)
        if self.captured_at.tzinfo is None:
            self.captured_at = self.captured_at.replace(tzinfo=timezone.utc)


@dataclass
class Spectrum:
    """Wavelength/intensity pairs from one scan. Treat as immutable.

    Construction only coerces types; call :func:`validate` to check the
    contract (strictly increasing wavelengths inside the NIR band, matching
    lengths, finite intensities) so that malformed inputs can be inspected
    rather than rejected at parse time.
    """

    wavelengths_nm: NDArray[np.float64]
    intensities: NDArray[np.float64]
    meta: AcquisitionMeta

    def __post_init__(self) -> None:
        self.wavelengths_nm = np.asarray(self.wavelengths_nm, dtype=float)
        self.intensities = np.asarray(self.intensities, dtype=float)

    def __len__(self) -> int:
        return len(self.wavelengths_nm)

    def with_meta(self, **changes) -> "Spectrum":
        return Spectrum(
            wavelengths_nm=self.wavelengths_nm,
            intensities=self.intensities,
            meta=replace(self.meta, **changes),
        )


def validate(spectrum: Spectrum) -> list[str]:
    """Return every violated invariant; an empty list means the spectrum is ok."""
    violations: list[str] = []
    wl = spectrum.wavelengths_nm
    inten = spectrum.intensities

    if wl.ndim != 1 or inten.ndim != 1:
        violations.append("wavelengths and intensities must be one-dimensional")
        return violations

    if len(wl) != len(inten):
        violations.append(
            f"length mismatch: {len(wl)} wavelengths vs {len(inten)} intensities"
        )
    if len(wl) < MIN_POINTS:
        violations.append(f"fewer than {MIN_POINTS} points")
    if len(wl) >= 2 and not bool(np.all(np.diff(wl) > 0)):
        violations.append("wavelengths not strictly increasing")
    if len(wl) > 0 and not bool(
        np.all((wl >= NIR_BAND_MIN_NM) & (wl <= NIR_BAND_MAX_NM))
    ):
        violations.append(
            f"wavelength outside [{NIR_BAND_MIN_NM:g}, {NIR_BAND_MAX_NM:g}] nm"
        )
    if not bool(np.all(np.isfinite(inten))):
        violations.append("non-finite intensity")
    if spectrum.meta.source in LABELED_SOURCES and not spectrum.meta.label:
        violations.append(f"missing label for source {spectrum.meta.source.value}")
    return violations


@dataclass(frozen=True)
class PipelineConfig:
    """Canonical grid and preprocessing parameters for one application."""

    grid_start_nm: float = 900.0
    grid_end_nm: float = 1700.0
    grid_points: int = 228
    sg_window: int = 9
    sg_polyorder: int = 2
    sg_derivative: int = 0
    apply_snv: bool = True

    def __post_init__(self) -> None:
        if not (NIR_BAND_MIN_NM <= self.grid_start_nm < self.grid_end_nm <= NIR_BAND_MAX_NM):
            raise ConfigError(
                "grid must satisfy "
                f"{NIR_BAND_MIN_NM:g} <= start < end <= {NIR_BAND_MAX_NM:g}, "
                f"got [{self.grid_start_nm}, {self.grid_end_nm}]"
            )
        if not isinstance(self.grid_points, int) or self.grid_points < 1:
            raise ConfigError(f"grid_points must be a positive integer, got {self.grid_points}")
        if self.sg_window % 2 == 0 or self.sg_window < 5:
            raise ConfigError(f"sg_window must be an odd integer >= 5, got {self.sg_window}")
        if not (2 <= self.sg_polyorder < self.sg_window):
            raise ConfigError(
                f"sg_polyorder must be >= 2 and < sg_window, got {self.sg_polyorder}"
            )
        if self.sg_derivative not in (0, 1, 2):
            raise ConfigError(f"sg_derivative must be 0, 1 or 2, got {self.sg_derivative}")

    def grid(self) -> NDArray[np.float64]:
        return np.linspace(self.grid_start_nm, self.grid_end_nm, self.grid_points)

    def to_json(self) -> dict:
        return {
            "grid_start_nm": self.grid_start_nm,
            "grid_end_nm": self.grid_end_nm,
            "grid_points": self.grid_points,
            "sg_window": self.sg_window,
            "sg_polyorder": self.sg_polyorder,
            "sg_derivative": self.sg_derivative,
            "apply_snv": self.apply_snv,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PipelineConfig":
        known = {f: obj[f] for f in cls.__dataclass_fields__ if f in obj}
        unknown = set(obj) - set(known)
        if unknown:
            raise ConfigError(f"unknown pipeline fields: {sorted(unknown)}")
        return cls(**known)
