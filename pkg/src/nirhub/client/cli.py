"""Command-line client: registers instances and drives the scan protocol.

Exit codes: 0 ok, 1 partial success, 2 local validation, 3 server-reported
error, 4 network failure. Local validation always runs before any network
traffic. With --json, results are printed as one deterministic JSON document
embedding the server responses verbatim.
"""

from __future__ import annotations

import json
import re
import sys
from datetime import datetime, timezone
from pathlib import Path

import click
import httpx

from nirhub import PROTOCOL_VERSION
from nirhub.client.recipes import resolve_recipe
from nirhub.client.registry import Registration, Registry
from nirhub.errors import (
    ManifestError,
    NetworkError,
    NirhubError,
    ValidationError,
)
from nirhub.spectra import (
    PipelineConfig,
    SpectrumSource,
    simulate_scan,
    spectrum_from_json,
    spectrum_to_json,
)

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_LOCAL = 2
EXIT_SERVER = 3
EXIT_NETWORK = 4

HTTP_TIMEOUT = 30.0

MANIFEST_URL_RE = re.compile(r"^(?P<base>.+)/api/instances/(?P<slug>[a-z0-9-]+)/manifest/?$")


class ServerError(NirhubError):
    """The server answered with an error document."""

    error_code = "server"


def exit_code_for(err: NirhubError) -> int:
    return {"network": EXIT_NETWORK, "manifest": EXIT_SERVER, "server": EXIT_SERVER}.get(
        err.error_code, EXIT_LOCAL
    )


def fail(err: NirhubError, as_json: bool) -> None:
    if as_json:
        doc = {"error_code": err.error_code, "message": err.message, "details": err.details}
        click.echo(json.dumps(doc, sort_keys=True), err=True)
    else:
        click.echo(f"error: {err.message}", err=True)
    sys.exit(exit_code_for(err))


def emit_json(doc: dict) -> None:
    click.echo(json.dumps(doc, sort_keys=True, separators=(",", ":")))


def _request(method: str, url: str, **kwargs) -> httpx.Response:
    try:
        return httpx.request(method, url, timeout=HTTP_TIMEOUT, **kwargs)
    except httpx.TransportError as exc:
        raise NetworkError(f"cannot reach {url}: {exc}") from exc


def api(method: str, url: str, **kwargs) -> dict | list | None:
    resp = _request(method, url, **kwargs)
    if resp.status_code >= 400:
        try:
            doc = resp.json()
            raise ServerError(
                doc.get("message", resp.text),
                details={"error_code": doc.get("error_code"), **(doc.get("details") or {})},
            )
        except (json.JSONDecodeError, ValueError):
            raise ServerError(f"HTTP {resp.status_code}: {resp.text[:200]}")
    if resp.status_code == 204:
        return None
    return resp.json()


def fetch_manifest(manifest_url: str) -> dict:
    resp = _request("GET", manifest_url)
    if resp.status_code != 200:
        raise ManifestError(f"manifest request failed with HTTP {resp.status_code}: {resp.text[:200]}")
    try:
        manifest = resp.json()
    except (json.JSONDecodeError, ValueError):
        raise ManifestError("manifest is not valid JSON")
    missing = {"protocol_version", "slug", "name", "instructions", "pipeline"} - set(manifest)
    if missing:
        raise ManifestError(f"manifest missing fields: {sorted(missing)}")
    if manifest["protocol_version"] != PROTOCOL_VERSION:
        raise ManifestError(
            f"unsupported protocol version {manifest['protocol_version']} "
            f"(client speaks {PROTOCOL_VERSION})"
        )
    return manifest


def refresh_registration(registry: Registry, slug: str) -> tuple[Registration, dict]:
    """Re-fetch the manifest so grid checks never use a stale cache."""
    reg = registry.get(slug)
    if reg is None:
        raise ValidationError(f"{slug!r} is not registered; run `nirhub register <url>` first")
    manifest = fetch_manifest(reg.manifest_url)
    reg = Registration(
        slug=manifest["slug"],
        name=manifest["name"],
        manifest_url=reg.manifest_url,
        base_url=reg.base_url,
        manifest=manifest,
        registered_at=reg.registered_at,
    )
    registry.upsert(reg)
    return reg, manifest


def parse_feedback_spec(spec: str) -> tuple[str, str | None]:
    if spec == "correct":
        return "correct", None
    if spec.startswith("incorrect:") and spec.split(":", 1)[1]:
        return "incorrect", spec.split(":", 1)[1]
    raise ValidationError(
        f"bad feedback {spec!r}; expected 'correct' or 'incorrect:<label>'"
    )


@click.group()
@click.option(
    "--registry",
    "registry_path",
    envvar="NIRHUB_REGISTRY",
    default=None,
    help="Registry file (default: per-user config directory).",
)
@click.pass_context
def main(ctx, registry_path):
    """Client for nirhub servers: register instances, scan, train, identify."""
    if registry_path is None:
        registry_path = Path(click.get_app_dir("nirhub")) / "registry.json"
    ctx.obj = Registry(registry_path)


@main.command()
@click.argument("url")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@click.pass_obj
def register(registry: Registry, url, as_json):
    """Register an instance by its manifest URL."""
    try:
        match = MANIFEST_URL_RE.match(url)
        if not match:
            raise ManifestError(
                "URL does not look like a registration URL "
                "(expected .../api/instances/<slug>/manifest)"
            )
        manifest = fetch_manifest(url)
        reg = Registration(
            slug=manifest["slug"],
            name=manifest["name"],
            manifest_url=url,
            base_url=match.group("base"),
            manifest=manifest,
            registered_at=datetime.now(timezone.utc).isoformat(),
        )
        registry.upsert(reg)
    except NirhubError as err:
        fail(err, as_json)
    if as_json:
        emit_json({"slug": reg.slug, "name": reg.name, "base_url": reg.base_url})
    else:
        click.echo(f"registered {reg.name} [{reg.slug}] at {reg.base_url}")


@main.command()
@click.argument("slug")
@click.pass_obj
def unregister(registry: Registry, slug):
    """Remove a registered instance."""
    if not registry.remove(slug):
        fail(ValidationError(f"{slug!r} is not registered"), as_json=False)
    click.echo(f"unregistered {slug}")


@main.command(name="list")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def list_registrations(registry: Registry, as_json):
    """List registered instances."""
    regs = registry.all()
    if as_json:
        emit_json(
            {
                "registrations": [
                    {
                        "slug": r.slug,
                        "name": r.name,
                        "manifest_url": r.manifest_url,
                        "model_available": r.manifest.get("model_available"),
                    }
                    for r in regs
                ]
            }
        )
        return
    if not regs:
        click.echo("(no registered instances)")
        return
    for r in regs:
        model = "model ready" if r.manifest.get("model_available") else "no model"
        click.echo(f"{r.slug}  {r.name}  [{model}]  {r.manifest_url}")


def _load_spectrum_file(path: Path):
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read spectrum file {path}: {exc}")
    return spectrum_from_json(doc)


def _check_grid_coverage(spectrum, pipeline: PipelineConfig) -> None:
    wl = spectrum.wavelengths_nm
    if wl[0] > pipeline.grid_start_nm or wl[-1] < pipeline.grid_end_nm:
        raise ValidationError(
            f"spectrum covers [{wl[0]:g}, {wl[-1]:g}] nm but the instance grid is "
            f"[{pipeline.grid_start_nm:g}, {pipeline.grid_end_nm:g}] nm"
        )


@main.command()
@click.argument("slug")
@click.option("--mode", type=click.Choice(["train", "identify"]), required=True)
@click.option("--label", default=None, help="Class label (train mode).")
@click.option("--file", "file_path", type=click.Path(path_type=Path), default=None,
              help="Spectrum JSON file to upload.")
@click.option("--simulate", "recipe_spec", default=None,
              help="Recipe preset name or inline 'baseline=..,band=c:a:w,..'.")
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--noise", default=0.0, type=float, show_default=True)
@click.option("--recipes", "recipes_path", envvar="NIRHUB_RECIPES",
              type=click.Path(path_type=Path), default=None,
              help="TOML file with named recipe presets.")
@click.option("--feedback", "feedback_spec", default=None,
              help="'correct' or 'incorrect:<label>' sent after the result.")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def scan(registry, slug, mode, label, file_path, recipe_spec, seed, noise,
         recipes_path, feedback_spec, as_json):
    """Run one session: start, scan once, print the result, optional feedback."""
    try:
        # local validation, before any network traffic
        if mode == "train" and not label:
            raise ValidationError("--mode train requires --label")
        if mode == "identify" and label:
            raise ValidationError("--label is only valid with --mode train")
        if (file_path is None) == (recipe_spec is None):
            raise ValidationError("exactly one of --file or --simulate is required")
        verdict = corrected = None
        if feedback_spec is not None:
            verdict, corrected = parse_feedback_spec(feedback_spec)
        recipe = None
        spectrum = None
        if recipe_spec is not None:
            recipe = resolve_recipe(recipe_spec, recipes_path)
            if noise < 0:
                raise ValidationError("--noise must be >= 0")
        else:
            spectrum = _load_spectrum_file(file_path)

        # network starts here
        reg, manifest = refresh_registration(registry, slug)
        pipeline = PipelineConfig.from_json(manifest["pipeline"])
        if recipe is not None:
            source = (
                SpectrumSource.IN_SITU_TRAINING if mode == "train"
                else SpectrumSource.IDENTIFY_SCAN
            )
            spectrum = simulate_scan(
                recipe, noise_sigma=noise, seed=seed, config=pipeline,
                label=label, source=source,
            )
        else:
            _check_grid_coverage(spectrum, pipeline)

        session = api(
            "POST", f"{reg.base_url}/api/instances/{slug}/sessions", json={"mode": mode}
        )
        body = {"spectrum": spectrum_to_json(spectrum)}
        if label:
            body["label"] = label
        result = api("POST", f"{reg.base_url}/api/sessions/{session['session_id']}/scan", json=body)

        feedback_result = None
        if verdict is not None:
            payload = {"verdict": verdict}
            if corrected is not None:
                payload["corrected_label"] = corrected
            feedback_result = api(
                "POST",
                f"{reg.base_url}/api/sessions/{session['session_id']}/feedback",
                json=payload,
            )
    except NirhubError as err:
        fail(err, as_json)

    if as_json:
        emit_json(
            {
                "slug": slug,
                "mode": mode,
                "instructions": session["instructions"],
                "scan": result,
                "feedback": feedback_result,
            }
        )
        return
    click.echo(session["instructions"])
    if result["kind"] == "prediction":
        click.echo(
            f"label: {result['label']} (confidence {result['confidence']:.2f}, "
            f"model v{result['model_version']})"
        )
    else:
        counts = ", ".join(f"{c}={n}" for c, n in result["counts"].items())
        met = "yes" if result["threshold_met"] else "no"
        click.echo(f"scan stored; counts: {counts}; threshold met: {met}")
    if feedback_result is not None:
        click.echo(f"feedback recorded (stored as {feedback_result['stored_label']!r})")


@main.command(name="batch-train")
@click.argument("slug")
@click.argument("directory", type=click.Path(path_type=Path))
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def batch_train(registry, slug, directory, as_json):
    """Submit every labeled spectrum JSON file in DIRECTORY in one train session."""
    failures: list[dict] = []
    last_ack = None
    accepted = 0
    try:
        if not directory.is_dir():
            raise ValidationError(f"{directory} is not a directory")
        files = sorted(directory.glob("*.json"))
        if not files:
            raise ValidationError(f"no spectra found in {directory}")

        loadable = []
        for path in files:
            try:
                spectrum = _load_spectrum_file(path)
                if not spectrum.meta.label:
                    raise ValidationError("spectrum file has no meta.label")
                loadable.append((path, spectrum))
            except NirhubError as exc:
                failures.append({"file": path.name, "message": exc.message})

        if loadable:
            reg, manifest = refresh_registration(registry, slug)
            session = api(
                "POST",
                f"{reg.base_url}/api/instances/{slug}/sessions",
                json={"mode": "train"},
            )
            for path, spectrum in loadable:
                body = {
                    "spectrum": spectrum_to_json(spectrum),
                    "label": spectrum.meta.label,
                }
                try:
                    last_ack = api(
                        "POST",
                        f"{reg.base_url}/api/sessions/{session['session_id']}/scan",
                        json=body,
                    )
                    accepted += 1
                except ServerError as exc:
                    failures.append({"file": path.name, "message": exc.message})
    except NirhubError as err:
        fail(err, as_json)

    summary = {
        "slug": slug,
        "accepted": accepted,
        "failures": failures,
        "counts": last_ack["counts"] if last_ack else {},
        "threshold_met": last_ack["threshold_met"] if last_ack else False,
    }
    if as_json:
        emit_json(summary)
    else:
        counts = ", ".join(f"{c}={n}" for c, n in summary["counts"].items()) or "none"
        met = "yes" if summary["threshold_met"] else "no"
        click.echo(f"accepted {accepted} scans; counts: {counts}; threshold met: {met}")
        for failure in failures:
            click.echo(f"rejected {failure['file']}: {failure['message']}", err=True)
    sys.exit(EXIT_PARTIAL if failures else EXIT_OK)


@main.command()
@click.argument("slug")
@click.option("--include-unverified", is_flag=True,
              help="Also train on unreviewed crowdsourced spectra.")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def retrain(registry, slug, include_unverified, as_json):
    """Retrain the instance's model from its knowledge-base."""
    try:
        reg, _ = refresh_registration(registry, slug)
        result = api(
            "POST",
            f"{reg.base_url}/api/instances/{slug}/retrain",
            json={"include_unverified": include_unverified},
        )
    except NirhubError as err:
        fail(err, as_json)
    if as_json:
        emit_json({"slug": slug, "retrain": result})
    else:
        click.echo(
            f"model v{result['version']} trained; leave-one-out accuracy "
            f"{result['loo_accuracy']:.3f} ({result['examples']} examples, "
            f"{len(result['classes'])} classes)"
        )


if __name__ == "__main__":
    main()
