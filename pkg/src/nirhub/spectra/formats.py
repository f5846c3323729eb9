"""Spectrum serialization: the JSON wire/storage format and the CSV bulk format.

JSON document shape (used on the wire and in the event log):

    {"wavelengths_nm": [...], "intensities": [...],
     "meta": {"device_id": "...", "captured_at": "...-..T..:..:..+00:00",
              "source": "reference_upload", "label": "aspirin"}}

CSV bulk format (dashboard upload): header ``wavelength_nm,<label1>,...``,
one column per reference spectrum, one wavelength per row.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from nirhub.errors import ValidationError
from nirhub.spectra.spectrum import (
    AcquisitionMeta,
    Spectrum,
    SpectrumSource,
    validate,
)

CSV_HEADER_FIRST = "wavelength_nm"


def format_timestamp(ts: datetime) -> str:
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).isoformat()


def parse_timestamp(raw: str) -> datetime:
    try:
        ts = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except (ValueError, TypeError, AttributeError):
        raise ValidationError(f"invalid timestamp: {raw!r}")
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


def spectrum_to_json(spectrum: Spectrum) -> dict:
    meta = {
        "device_id": spectrum.meta.device_id,
        "captured_at": format_timestamp(spectrum.meta.captured_at),
        "source": spectrum.meta.source.value,
    }
    if spectrum.meta.label is not None:
        meta["label"] = spectrum.meta.label
    return {
        "wavelengths_nm": [float(w) for w in spectrum.wavelengths_nm],
        "intensities": [float(x) for x in spectrum.intensities],
        "meta": meta,
    }


def spectrum_from_json(obj: object, require_valid: bool = True) -> Spectrum:
    """Parse the wire document; raises ValidationError on malformed or
    (by default) invariant-violating spectra."""
    if not isinstance(obj, dict):
        raise ValidationError("spectrum document must be a JSON object")
    missing = {"wavelengths_nm", "intensities", "meta"} - set(obj)
    if missing:
        raise ValidationError(f"spectrum document missing fields: {sorted(missing)}")
    meta_obj = obj["meta"]
    if not isinstance(meta_obj, dict):
        raise ValidationError("spectrum meta must be a JSON object")
    for req in ("device_id", "captured_at", "source"):
        if req not in meta_obj:
            raise ValidationError(f"spectrum meta missing field: {req}")
    try:
        source = SpectrumSource(meta_obj["source"])
    except ValueError:
        raise ValidationError(f"unknown spectrum source: {meta_obj['source']!r}")
    try:
        wl = np.asarray(obj["wavelengths_nm"], dtype=float)
        inten = np.asarray(obj["intensities"], dtype=float)
    except (TypeError, ValueError):
        raise ValidationError("wavelengths_nm and intensities must be numeric arrays")
    spectrum = Spectrum(
        wavelengths_nm=wl,
        intensities=inten,
        meta=AcquisitionMeta(
            device_id=str(meta_obj["device_id"]),
            captured_at=parse_timestamp(meta_obj["captured_at"]),
            source=source,
            label=meta_obj.get("label"),
        ),
    )
    if require_valid:
        violations = validate(spectrum)
        if violations:
            raise ValidationError(
                "invalid spectrum: " + "; ".join(violations),
                details={"violations": violations},
            )
    return spectrum


@dataclass
class CsvRowError:
    """One rejected CSV row or column, with the reason."""

    where: str  # "row N" or "column LABEL"
    message: str

    def to_json(self) -> dict:
        return {"where": self.where, "message": self.message}


def parse_reference_csv(
    text: str,
    device_id: str = "bulk-upload",
    captured_at: datetime | None = None,
) -> tuple[list[Spectrum], list[CsvRowError]]:
    """Parse the bulk CSV format into labeled reference spectra.

    Malformed rows are skipped and reported; columns that end up violating
    spectrum invariants are reported as column errors. Surviving spectra
    carry source ``reference_upload`` with the column label.
    """
    captured_at = captured_at or datetime.now(timezone.utc)
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValidationError("empty CSV document")
    header = [h.strip() for h in header]
    if not header or header[0] != CSV_HEADER_FIRST:
        raise ValidationError(
            f"CSV header must start with '{CSV_HEADER_FIRST}', got {header[:1]}"
        )
    labels = header[1:]
    if not labels:
        raise ValidationError("CSV has no spectrum columns")
    for label in labels:
        if not label:
            raise ValidationError("CSV has an empty column label")

    errors: list[CsvRowError] = []
    rows: list[list[float]] = []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            errors.append(
                CsvRowError(
                    where=f"row {line_no}",
                    message=f"expected {len(header)} columns, got {len(row)}",
                )
            )
            continue
        try:
            rows.append([float(cell) for cell in row])
        except ValueError:
            errors.append(
                CsvRowError(where=f"row {line_no}", message="non-numeric value")
            )

    spectra: list[Spectrum] = []
    if rows:
        matrix = np.asarray(rows, dtype=float)
        for col, label in enumerate(labels, start=1):
            spectrum = Spectrum(
                wavelengths_nm=matrix[:, 0],
                intensities=matrix[:, col],
                meta=AcquisitionMeta(
                    device_id=device_id,
                    captured_at=captured_at,
                    source=SpectrumSource.REFERENCE_UPLOAD,
                    label=label,
                ),
            )
            violations = validate(spectrum)
            if violations:
                errors.append(
                    CsvRowError(where=f"column {label}", message="; ".join(violations))
                )
            else:
                spectra.append(spectrum)
    else:
        errors.append(CsvRowError(where="document", message="no data rows"))
    return spectra, errors


def build_reference_csv(spectra: list[Spectrum]) -> str:
    """Inverse of :func:`parse_reference_csv`; all spectra must share a grid."""
    if not spectra:
        raise ValidationError("no spectra to export")
    grid = spectra[0].wavelengths_nm
    for s in spectra[1:]:
        if not np.array_equal(s.wavelengths_nm, grid):
            raise ValidationError("CSV export requires identical wavelength grids")
    for s in spectra:
        if not s.meta.label:
            raise ValidationError("CSV export requires labeled spectra")
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([CSV_HEADER_FIRST] + [s.meta.label for s in spectra])
    for i, w in enumerate(grid):
        writer.writerow([repr(float(w))] + [repr(float(s.intensities[i])) for s in spectra])
    return out.getvalue()
