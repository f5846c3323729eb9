"""Acceptance suite: one test per release criterion, with stated tolerances.

Each test prints "[acceptance] <criterion>: PASS (elapsed)" on success.
Criteria that require real sockets (end-to-end, concurrency, durability,
protocol golden files) run against a server subprocess on loopback; the
rest use in-process surfaces for speed.
"""

import json
import subprocess
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import httpx
import numpy as np
import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from conftest import ServerProcess
from nirhub.chemometrics import TrainingSet, classify, leave_one_out, train
from nirhub.client.cli import main as cli_main
from nirhub.server.app import create_app
from nirhub.spectra import (
    AbsorptionBand,
    AcquisitionMeta,
    MaterialRecipe,
    PipelineConfig,
    Spectrum,
    SpectrumSource,
    preprocess,
    savitzky_golay,
    simulate_scan,
    snv,
    spectrum_to_json,
)
from oracles import cosine, euclidean, knn_reference, loo_reference

GOLDEN_FILE = Path(__file__).parent / "data" / "golden_protocol.jsonl"

ASPIRIN = "baseline=1.0,band=1100:0.4:60"
IBUPROFEN = "baseline=1.0,band=1400:0.4:60"


def report(name: str, started: float, budget: float | None = None) -> None:
    elapsed = time.monotonic() - started
    if budget is not None:
        assert elapsed < budget, f"{name} took {elapsed:.2f}s, budget {budget}s"
    print(f"[acceptance] {name}: PASS ({elapsed:.2f}s)")


def recipe(center_nm: float) -> MaterialRecipe:
    return MaterialRecipe(baseline=1.0, bands=(AbsorptionBand(center_nm, 0.4, 60),))


def scan_payload(material: MaterialRecipe, seed: int, label=None, noise=0.01) -> dict:
    spec = simulate_scan(material, noise_sigma=noise, seed=seed)
    payload = {"spectrum": spectrum_to_json(spec)}
    if label is not None:
        payload["label"] = label
    return payload


def run_train_session(client, base, slug, material, label, count, seed0):
    resp = client.post(f"{base}/api/instances/{slug}/sessions", json={"mode": "train"})
    assert resp.status_code == 201, resp.text
    sid = resp.json()["session_id"]
    for i in range(count):
        resp = client.post(
            f"{base}/api/sessions/{sid}/scan",
            json=scan_payload(material, seed0 + i, label=label),
        )
        assert resp.status_code == 200, resp.text


def test_training_gate_exactly_twelve(tmp_path):
    """Retrain is blocked while any class is below 12 eligible spectra and
    unblocks at exactly 12 per class, under the default configuration."""
    app = create_app(tmp_path / "data")
    with TestClient(app) as client:
        started = time.monotonic()
        slug = client.post("/api/instances", json={"name": "Gate"}).json()["slug"]
        run_train_session(client, "", slug, recipe(1100), "aspirin", 12, seed0=0)
        run_train_session(client, "", slug, recipe(1400), "ibuprofen", 11, seed0=100)

        resp = client.post(f"/api/instances/{slug}/retrain")
        assert resp.status_code == 409
        body = resp.json()
        assert body["error_code"] == "insufficient_data"
        assert body["details"]["deficits"] == {"ibuprofen": 11}

        run_train_session(client, "", slug, recipe(1400), "ibuprofen", 1, seed0=111)
        resp = client.post(f"/api/instances/{slug}/retrain")
        assert resp.status_code == 200, resp.text
        assert resp.json()["version"] == 1
        report("training gate at 12 spectra per class", started, budget=1.0)


def test_preprocessing_invariants_randomized():
    """SNV moments, SG polynomial reproduction, and affine invariance hold
    to 1e-9 over 1,000 randomized spectra."""
    started = time.monotonic()
    rng = np.random.default_rng(2026)
    cfg = PipelineConfig()
    meta = AcquisitionMeta(
        device_id="rand",
        captured_at=datetime(2026, 1, 1, tzinfo=timezone.utc),
        source=SpectrumSource.IDENTIFY_SCAN,
    )
    for trial in range(1000):
        n = int(rng.integers(240, 400))
        wl = np.linspace(
            float(rng.uniform(810, 900)), float(rng.uniform(1700, 1790)), n
        )
        smooth = np.cumsum(rng.normal(0, 0.02, n))
        intensities = 1.0 + 0.3 * np.sin(wl / rng.uniform(40, 200)) + smooth

        out = snv(intensities)
        assert abs(float(np.mean(out))) < 1e-9
        assert abs(float(np.std(out)) - 1.0) < 1e-9

        i = np.arange(int(rng.integers(16, 120)), dtype=float)
        c0, c1, c2 = rng.uniform(-5, 5), rng.uniform(-0.1, 0.1), rng.uniform(-2e-4, 2e-4)
        poly = c0 + c1 * i + c2 * i**2
        sg = savitzky_golay(poly, window=9, polyorder=2, derivative=0)
        assert np.max(np.abs(sg - poly)) < 1e-9

        alpha = float(rng.uniform(0.1, 10.0))
        beta = float(rng.uniform(-5.0, 5.0))
        spec = Spectrum(wavelengths_nm=wl, intensities=intensities, meta=meta)
        scaled = Spectrum(
            wavelengths_nm=wl, intensities=alpha * intensities + beta, meta=meta
        )
        a = preprocess(spec, cfg)
        b = preprocess(scaled, cfg)
        assert np.max(np.abs(a - b)) < 1e-9
    report("preprocessing invariants over 1000 random spectra", started, budget=10.0)


def test_classifier_matches_bruteforce_oracle():
    """classify and leave_one_out agree exactly with an independent
    brute-force implementation on 100 random training sets (N <= 50)."""
    started = time.monotonic()
    rng = np.random.default_rng(404)
    checked = 0
    while checked < 100:
        n = int(rng.integers(4, 51))
        d = int(rng.integers(2, 30))
        k = int(rng.choice([1, 3, 5]))
        if k > n - 1:
            continue
        # half the sets live on a small integer grid to force distance ties
        if rng.random() < 0.5:
            vectors = rng.integers(0, 3, size=(n, d)).astype(float)
        else:
            vectors = np.round(rng.normal(size=(n, d)), 3)
        labels = [str(rng.choice(["a", "b", "c", "d"])) for _ in range(n)]
        if len(set(labels)) < 2:
            continue
        distance = str(rng.choice(["euclidean", "cosine"]))
        metric = euclidean if distance == "euclidean" else cosine

        ts = TrainingSet(
            vectors=vectors,
            labels=labels,
            pipeline=PipelineConfig(grid_points=d),
            min_spectra_per_class=1,
        )
        assert leave_one_out(ts, k=k, distance=distance) == loo_reference(
            [list(v) for v in vectors], labels, k, metric
        )
        model = train(ts, k=k, distance=distance)
        for _ in range(5):
            if rng.random() < 0.5:
                query = rng.integers(0, 3, size=d).astype(float)
            else:
                query = np.round(rng.normal(size=d), 3)
            pred = classify(model, query)
            label, confidence, _ = knn_reference(
                [list(v) for v in vectors], labels, list(query), k, metric
            )
            assert (pred.label, pred.confidence) == (label, confidence)
        checked += 1
    report("classifier equals brute-force oracle on 100 random sets", started, budget=30.0)


CLASS_BANDS = {"amber": 1100.0, "cobalt": 1300.0, "rust": 1500.0}


def write_training_files(directory: Path, per_class=12, noise=0.01) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for idx, (label, center) in enumerate(CLASS_BANDS.items()):
        for i in range(per_class):
            spec = simulate_scan(
                recipe(center), noise_sigma=noise, seed=idx * 1000 + i,
                label=label, source=SpectrumSource.IN_SITU_TRAINING,
            )
            (directory / f"{label}-{i:02d}.json").write_text(
                json.dumps(spectrum_to_json(spec))
            )


def test_desk_scale_end_to_end_accuracy(tmp_path):
    """Three synthetic materials, 12 training + 20 held-out spectra each,
    full HTTP round-trip through the CLI: >=95% correct, confidence >=0.6."""
    started = time.monotonic()
    server = ServerProcess(tmp_path / "server-data").start()
    try:
        registry = tmp_path / "registry.json"
        runner = CliRunner()

        def cli(*args):
            result = runner.invoke(cli_main, ["--registry", str(registry), *args])
            assert result.exit_code == 0, result.output
            return result.output

        created = httpx.post(
            f"{server.base_url}/api/instances", json={"name": "Desk Scale"}
        ).json()
        cli("register", created["manifest_url"])

        train_dir = tmp_path / "train"
        write_training_files(train_dir, per_class=12, noise=0.01)
        cli("batch-train", created["slug"], str(train_dir))
        retrain_out = json.loads(cli("retrain", created["slug"], "--json"))
        assert retrain_out["retrain"]["version"] == 1

        # held-out identification through the CLI, 20 scans per class
        predictions = []
        for idx, (label, center) in enumerate(CLASS_BANDS.items()):
            inline = f"baseline=1.0,band={center:g}:0.4:60"
            for i in range(20):
                seed = idx * 1000 + 500 + i
                out = json.loads(
                    cli(
                        "scan", created["slug"], "--mode", "identify",
                        "--simulate", inline, "--seed", str(seed),
                        "--noise", "0.01", "--json",
                    )
                )
                predictions.append((label, out["scan"]))

        correct = [p for want, p in predictions if p["label"] == want]
        accuracy = len(correct) / len(predictions)
        assert accuracy >= 0.95, f"accuracy {accuracy:.3f}"
        assert all(p["confidence"] >= 0.6 for p in correct)

        # cross-check the server's answers against the brute-force oracle
        cfg = PipelineConfig()
        train_vectors, train_labels = [], []
        for idx, (label, center) in enumerate(CLASS_BANDS.items()):
            for i in range(12):
                spec = simulate_scan(recipe(center), noise_sigma=0.01, seed=idx * 1000 + i)
                train_vectors.append(list(preprocess(spec, cfg)))
                train_labels.append(label)
        oracle_hits = 0
        position = 0
        for idx, (label, center) in enumerate(CLASS_BANDS.items()):
            for i in range(20):
                seed = idx * 1000 + 500 + i
                spec = simulate_scan(recipe(center), noise_sigma=0.01, seed=seed)
                features = list(preprocess(spec, cfg))
                oracle_label, _, _ = knn_reference(train_vectors, train_labels, features, 5)
                server_label = predictions[position][1]["label"]
                assert oracle_label == server_label
                if oracle_label == label:
                    oracle_hits += 1
                position += 1
        assert oracle_hits / len(predictions) >= 0.95
    finally:
        server.stop()
    report("desk-scale end-to-end accuracy >= 95%", started, budget=60.0)


def test_concurrent_identify_during_retrain(tmp_path):
    """Identify responses during a concurrent retrain all carry model version
    v or v+1, and no accepted train scan is ever lost."""
    started = time.monotonic()
    server = ServerProcess(tmp_path / "server-data").start()
    try:
        base = server.base_url
        with httpx.Client(timeout=30.0) as client:
            slug = client.post(
                f"{base}/api/instances", json={"name": "Concurrent"}
            ).json()["slug"]
            for idx, (label, center) in enumerate(CLASS_BANDS.items()):
                run_train_session(
                    client, base, slug, recipe(center), label, 30, seed0=idx * 1000
                )
            assert client.post(f"{base}/api/instances/{slug}/retrain").json()["version"] == 1
            kb_before = len(client.get(f"{base}/api/instances/{slug}/spectra").json())

            identify_sessions = [
                client.post(f"{base}/api/instances/{slug}/sessions", json={"mode": "identify"}).json()["session_id"]
                for _ in range(10)
            ]
            train_sessions = [
                client.post(f"{base}/api/instances/{slug}/sessions", json={"mode": "train"}).json()["session_id"]
                for _ in range(10)
            ]

        def do_identify(args):
            sid, seed = args
            with httpx.Client(timeout=30.0) as c:
                resp = c.post(
                    f"{base}/api/sessions/{sid}/scan",
                    json=scan_payload(recipe(1100), seed),
                )
                assert resp.status_code == 200, resp.text
                return resp.json()

        def do_retrain():
            with httpx.Client(timeout=30.0) as c:
                resp = c.post(f"{base}/api/instances/{slug}/retrain")
                assert resp.status_code == 200, resp.text
                return resp.json()

        def do_train_scan(args):
            sid, seed = args
            with httpx.Client(timeout=30.0) as c:
                resp = c.post(
                    f"{base}/api/sessions/{sid}/scan",
                    json=scan_payload(recipe(1300), seed, label="cobalt"),
                )
                return resp.status_code == 200

        with ThreadPoolExecutor(max_workers=24) as pool:
            retrain_future = pool.submit(do_retrain)
            identify_futures = [
                pool.submit(do_identify, (sid, 5000 + i))
                for i, sid in enumerate(identify_sessions)
            ]
            train_futures = [
                pool.submit(do_train_scan, (sid, 6000 + i))
                for i, sid in enumerate(train_sessions)
            ]
            retrain_result = retrain_future.result()
            identify_results = [f.result() for f in identify_futures]
            accepted_train = sum(1 for f in train_futures if f.result())

        assert retrain_result["version"] == 2
        versions = {r["model_version"] for r in identify_results}
        assert versions <= {1, 2}, f"unexpected versions {versions}"
        assert all(isinstance(r["model_version"], int) for r in identify_results)

        with httpx.Client(timeout=30.0) as client:
            kb_after = len(client.get(f"{base}/api/instances/{slug}/spectra").json())
        assert kb_after == kb_before + accepted_train
        assert accepted_train == 10
    finally:
        server.stop()
    report("concurrent identify during retrain is version-consistent", started, budget=30.0)


def test_durability_across_kill(tmp_path):
    """SIGKILL mid-workload loses nothing acknowledged: instances, spectra,
    and the latest model version recover; manifests replay byte-identical."""
    started = time.monotonic()
    server = ServerProcess(tmp_path / "server-data").start()
    base = server.base_url
    try:
        with httpx.Client(timeout=30.0) as client:
            slug_a = client.post(f"{base}/api/instances", json={"name": "Durable A"}).json()["slug"]
            slug_b = client.post(f"{base}/api/instances", json={"name": "Durable B"}).json()["slug"]
            run_train_session(client, base, slug_a, recipe(1100), "amber", 12, seed0=0)
            run_train_session(client, base, slug_a, recipe(1400), "rust", 12, seed0=100)
            assert client.post(f"{base}/api/instances/{slug_a}/retrain").json()["version"] == 1
            manifest_a = client.get(f"{base}/api/instances/{slug_a}/manifest").content
            manifest_b = client.get(f"{base}/api/instances/{slug_b}/manifest").content
            kb_start = len(client.get(f"{base}/api/instances/{slug_a}/spectra").json())

        acked = []
        stop_requested = threading.Event()

        def hammer():
            with httpx.Client(timeout=5.0) as c:
                resp = c.post(f"{base}/api/instances/{slug_a}/sessions", json={"mode": "train"})
                sid = resp.json()["session_id"]
                seed = 9000
                while not stop_requested.is_set():
                    try:
                        r = c.post(
                            f"{base}/api/sessions/{sid}/scan",
                            json=scan_payload(recipe(1100), seed, label="amber"),
                        )
                        if r.status_code == 200:
                            acked.append(seed)
                    except httpx.TransportError:
                        return
                    seed += 1

        writer = threading.Thread(target=hammer)
        writer.start()
        time.sleep(0.4)  # let the workload run, then pull the plug
        server.kill()
        stop_requested.set()
        writer.join(timeout=10)
        assert acked, "workload never got going; test is vacuous"

        server.restart()
        with httpx.Client(timeout=30.0) as client:
            slugs = {s["slug"] for s in client.get(f"{base}/api/instances").json()}
            assert {slug_a, slug_b} <= slugs
            assert client.get(f"{base}/api/instances/{slug_a}/manifest").content == manifest_a
            assert client.get(f"{base}/api/instances/{slug_b}/manifest").content == manifest_b

            records = client.get(f"{base}/api/instances/{slug_a}/spectra").json()
            recovered = len(records) - kb_start
            # every acknowledged scan must be present; at most one in-flight
            # scan may have been persisted without its ack getting out
            assert len(acked) <= recovered <= len(acked) + 1
            manifest = client.get(f"{base}/api/instances/{slug_a}/manifest").json()
            assert manifest["model_version"] == 1
            # versions continue monotonically after recovery
            assert client.post(f"{base}/api/instances/{slug_a}/retrain").json()["version"] == 2
    finally:
        server.stop()
    report("durability across kill -9", started)


GOLDEN_SCRIPT_NOTE = """The golden script drives one fresh server through
train, retrain, identify, and feedback with fixed seeds; every --json line
must be byte-identical across runs and match the committed golden file."""


def run_golden_script(tmp_path: Path, tag: str) -> bytes:
    server = ServerProcess(tmp_path / f"golden-{tag}").start()
    try:
        registry = tmp_path / f"registry-{tag}.json"
        created = httpx.post(
            f"{server.base_url}/api/instances", json={"name": "Golden Pills"}
        ).json()
        slug = created["slug"]
        train_dir = tmp_path / f"train-{tag}"
        train_dir.mkdir()
        for label, inline_center, seed0 in (
            ("aspirin", 1100, 0),
            ("ibuprofen", 1400, 100),
        ):
            for i in range(12):
                spec = simulate_scan(
                    recipe(inline_center), noise_sigma=0.01, seed=seed0 + i,
                    label=label, source=SpectrumSource.IN_SITU_TRAINING,
                )
                (train_dir / f"{label}-{i:02d}.json").write_text(
                    json.dumps(spectrum_to_json(spec))
                )

        def run(*args) -> bytes:
            proc = subprocess.run(
                [sys.executable, "-m", "nirhub.client.cli",
                 "--registry", str(registry), *args],
                capture_output=True,
            )
            assert proc.returncode == 0, proc.stderr.decode()
            return proc.stdout

        run("register", created["manifest_url"])
        lines = [
            run("batch-train", slug, str(train_dir), "--json"),
            run("retrain", slug, "--json"),
            run("scan", slug, "--mode", "train", "--label", "aspirin",
                "--simulate", ASPIRIN, "--seed", "42", "--noise", "0.01", "--json"),
            run("scan", slug, "--mode", "identify",
                "--simulate", ASPIRIN, "--seed", "43", "--noise", "0.01", "--json"),
            run("scan", slug, "--mode", "identify",
                "--simulate", IBUPROFEN, "--seed", "44", "--noise", "0.01",
                "--feedback", "correct", "--json"),
            run("scan", slug, "--mode", "identify",
                "--simulate", ASPIRIN, "--seed", "45", "--noise", "0.01",
                "--feedback", "incorrect:ibuprofen", "--json"),
            run("retrain", slug, "--include-unverified", "--json"),
        ]
        return b"".join(lines)
    finally:
        server.stop()


def test_protocol_golden_files(tmp_path):
    started = time.monotonic()
    first = run_golden_script(tmp_path, "run1")
    second = run_golden_script(tmp_path, "run2")
    assert first == second, "seeded protocol output differs between runs"
    golden = GOLDEN_FILE.read_bytes()
    assert first == golden, (
        "protocol output no longer matches the committed golden file; "
        "if the change is intentional, regenerate tests/data/golden_protocol.jsonl"
    )
    report("protocol golden files byte-identical", started)
