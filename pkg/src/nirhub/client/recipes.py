"""Material recipes for the simulated scanner.

Two spellings: a named preset from a TOML file, or an inline definition like
``baseline=1.0,band=1100:0.4:60,band=1450:0.2:40`` (band = center:amplitude:width).
"""

from __future__ import annotations

import sys
from pathlib import Path

from nirhub.errors import ConfigError, ValidationError
from nirhub.spectra import AbsorptionBand, MaterialRecipe

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def parse_inline_recipe(text: str) -> MaterialRecipe:
    baseline = 1.0
    bands: list[AbsorptionBand] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ValidationError(f"bad recipe term {part!r}; expected key=value")
        key, value = part.split("=", 1)
        key = key.strip()
        if key == "baseline":
            try:
                baseline = float(value)
            except ValueError:
                raise ValidationError(f"bad baseline value {value!r}")
        elif key == "band":
            fields = value.split(":")
            if len(fields) != 3:
                raise ValidationError(
                    f"bad band {value!r}; expected center:amplitude:width"
                )
            try:
                center, amplitude, width = (float(f) for f in fields)
            except ValueError:
                raise ValidationError(f"bad band {value!r}; values must be numbers")
            try:
                bands.append(AbsorptionBand(center, amplitude, width))
            except ConfigError as exc:
                raise ValidationError(exc.message)
        else:
            raise ValidationError(f"unknown recipe key {key!r}")
    return MaterialRecipe(baseline=baseline, bands=tuple(bands))


def load_recipes(path: str | Path) -> dict[str, MaterialRecipe]:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"recipes file not found: {path}")
    with open(path, "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ValidationError(f"bad recipes file {path}: {exc}")
    materials = doc.get("materials", {})
    recipes = {}
    for name, spec in materials.items():
        try:
            bands = tuple(
                AbsorptionBand(float(c), float(a), float(w))
                for c, a, w in spec.get("bands", [])
            )
            recipes[name] = MaterialRecipe(
                baseline=float(spec.get("baseline", 1.0)), bands=bands
            )
        except (ConfigError, TypeError, ValueError) as exc:
            message = exc.message if isinstance(exc, ConfigError) else str(exc)
            raise ValidationError(f"bad recipe {name!r} in {path}: {message}")
    return recipes


def resolve_recipe(spec: str, recipes_path: str | Path | None) -> MaterialRecipe:
    """Inline definitions contain '='; anything else is a preset name."""
    if "=" in spec:
        return parse_inline_recipe(spec)
    if recipes_path is None:
        raise ValidationError(
            f"recipe {spec!r} is not inline and no --recipes file was given"
        )
    recipes = load_recipes(recipes_path)
    if spec not in recipes:
        raise ValidationError(
            f"unknown recipe {spec!r}; file defines {sorted(recipes)}"
        )
    return recipes[spec]
