"""Spectrum data model, preprocessing pipeline, scanner simulation, file formats."""

from nirhub.spectra.formats import (
    build_reference_csv,
    parse_reference_csv,
    spectrum_from_json,
    spectrum_to_json,
)
from nirhub.spectra.pipeline import preprocess, resample, savitzky_golay, snv, stage_of
from nirhub.spectra.simulate import AbsorptionBand, MaterialRecipe, simulate_scan
from nirhub.spectra.spectrum import (
    AcquisitionMeta,
    PipelineConfig,
    Spectrum,
    SpectrumSource,
    validate,
)

__all__ = [
    "AbsorptionBand",
    "AcquisitionMeta",
    "MaterialRecipe",
    "PipelineConfig",
    "Spectrum",
    "SpectrumSource",
    "build_reference_csv",
    "parse_reference_csv",
    "preprocess",
    "resample",
    "savitzky_golay",
    "simulate_scan",
    "snv",
    "spectrum_from_json",
    "spectrum_to_json",
    "stage_of",
    "validate",
]
