"""Error taxonomy shared by the spectra core, classifier, server, and client.

Every error carries a stable ``error_code`` so the HTTP layer and the CLI can
map failures without string matching.
"""

from __future__ import annotations

from typing import Any


class NirhubError(Exception):
    """Base class; ``details`` holds structured, JSON-serializable context."""

    error_code = "error"

    def __init__(self, message: str, details: dict[str, Any] | None = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}


class ConfigError(NirhubError):
    """Invalid pipeline, filter, or classifier configuration."""

    error_code = "config"


class CoverageError(NirhubError):
    """Resampling grid extends beyond the measured wavelength range."""

    error_code = "coverage"


class DegenerateSpectrumError(NirhubError):
    """Flat spectrum with no shape information (failed scan)."""

    error_code = "degenerate_spectrum"


class DimensionError(NirhubError):
    """Feature vector length does not match the model's grid."""

    error_code = "dimension_mismatch"


class InsufficientDataError(NirhubError):
    """Training blocked; ``details['deficits']`` maps class name to count."""

    error_code = "insufficient_data"


class ValidationError(NirhubError):
    """Malformed input; ``details`` may carry per-field violations."""

    error_code = "validation"


class NotFoundError(NirhubError):
    error_code = "not_found"


class InvalidStateError(NirhubError):
    """Operation not legal in the session's or instance's current state."""

    error_code = "invalid_state"


class ModelUnavailableError(NirhubError):
    """Identify requested before any model has been trained."""

    error_code = "model_unavailable"


class PreprocessError(NirhubError):
    """Preprocessing failed; ``details['stage']`` names the failing stage."""

    error_code = "preprocess_failed"


class NetworkError(NirhubError):
    """Client could not reach the server."""

    error_code = "network"


class ManifestError(NirhubError):
    """Registration URL did not yield a usable manifest."""

    error_code = "manifest"
