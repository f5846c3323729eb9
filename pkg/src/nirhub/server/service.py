"""Domain logic for the hosting service: instances, sessions, knowledge-base,
feedback, and model lifecycle.

Concurrency: one RLock per instance serializes writes (knowledge-base appends,
moderation, model swaps). Reads take no instance lock: the manifest is pure,
and identify grabs one reference to the current immutable model, so every
response is consistent with exactly one model version.
"""

from __future__ import annotations

import re
import threading
import time
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from nirhub import PROTOCOL_VERSION
from nirhub.chemometrics import (
    DEFAULT_K,
    DEFAULT_MIN_SPECTRA_PER_CLASS,
    DISTANCES,
    Model,
    Prediction,
    TrainingSet,
    classify,
    model_from_json,
    model_to_json,
    train,
)
from nirhub.errors import (
    ConfigError,
    CoverageError,
    DegenerateSpectrumError,
    InvalidStateError,
    ModelUnavailableError,
    NotFoundError,
    PreprocessError,
    ValidationError,
)
from nirhub.spectra import (
    PipelineConfig,
    Spectrum,
    SpectrumSource,
    parse_reference_csv,
    preprocess,
    spectrum_from_json,
    spectrum_to_json,
    validate,
)
from nirhub.spectra.formats import format_timestamp, parse_timestamp
from nirhub.spectra.pipeline import stage_of
from nirhub.server.storage import SNAPSHOT_INTERVAL, EventLog, InstanceStore

STATUS_REFERENCE = "reference"
STATUS_UNVERIFIED = "crowdsourced_unverified"
STATUS_VERIFIED = "crowdsourced_verified"
STATUSES = (STATUS_REFERENCE, STATUS_UNVERIFIED, STATUS_VERIFIED)
CROWDSOURCED_STATUSES = (STATUS_UNVERIFIED, STATUS_VERIFIED)

# spectra counted toward training unless include_unverified is set
ELIGIBLE_DEFAULT = frozenset({STATUS_REFERENCE, STATUS_VERIFIED})

MODE_TRAIN = "train"
MODE_IDENTIFY = "identify"
MODES = (MODE_TRAIN, MODE_IDENTIFY)

VERDICT_CORRECT = "correct"
VERDICT_INCORRECT = "incorrect"

DEFAULT_SESSION_TIMEOUT_S = 30 * 60

DEFAULT_INSTRUCTIONS = {
    MODE_TRAIN: (
        "Place a labeled sample flat on the scanning window, enter its "
        "name, and press scan. Repeat until every class reaches the "
        "training threshold."
    ),
    MODE_IDENTIFY: "Place the sample flat on the scanning window and press scan.",
}

_SLUG_RE = re.compile(r"^[a-z0-9-]{1,64}$")


def slugify(name: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-")
    return slug[:64].rstrip("-")


@dataclass
class StoredSpectrum:
    """One knowledge-base entry."""

    spectrum_id: str
    spectrum: Spectrum
    label: str
    status: str
    added_at: datetime

    def to_json(self) -> dict:
        return {
            "spectrum_id": self.spectrum_id,
            "label": self.label,
            "status": self.status,
            "added_at": format_timestamp(self.added_at),
            "spectrum": spectrum_to_json(self.spectrum),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "StoredSpectrum":
        return cls(
            spectrum_id=obj["spectrum_id"],
            spectrum=spectrum_from_json(obj["spectrum"]),
            label=obj["label"],
            status=obj["status"],
            added_at=parse_timestamp(obj["added_at"]),
        )


@dataclass
class InstanceState:
    slug: str
    name: str
    instructions: dict[str, str]
    pipeline: PipelineConfig
    min_spectra_per_class: int
    knn_k: int
    knn_distance: str
    in_situ_status: str
    created_at: datetime
    records: dict[str, StoredSpectrum] = field(default_factory=dict)
    model: Model | None = None

    def config_json(self) -> dict:
        return {
            "slug": self.slug,
            "name": self.name,
            "instructions": dict(self.instructions),
            "pipeline": self.pipeline.to_json(),
            "min_spectra_per_class": self.min_spectra_per_class,
            "knn_k": self.knn_k,
            "knn_distance": self.knn_distance,
            "in_situ_status": self.in_situ_status,
            "created_at": format_timestamp(self.created_at),
        }

    @classmethod
    def from_config_json(cls, obj: dict) -> "InstanceState":
        return cls(
            slug=obj["slug"],
            name=obj["name"],
            instructions=dict(obj["instructions"]),
            pipeline=PipelineConfig.from_json(obj["pipeline"]),
            min_spectra_per_class=int(obj["min_spectra_per_class"]),
            knn_k=int(obj["knn_k"]),
            knn_distance=obj["knn_distance"],
            in_situ_status=obj["in_situ_status"],
            created_at=parse_timestamp(obj["created_at"]),
        )

    def to_snapshot(self) -> dict:
        return {
            "config": self.config_json(),
            "records": [r.to_json() for r in self.records.values()],
            "model": model_to_json(self.model) if self.model else None,
        }

    @classmethod
    def from_snapshot(cls, obj: dict) -> "InstanceState":
        state = cls.from_config_json(obj["config"])
        for rec in obj["records"]:
            stored = StoredSpectrum.from_json(rec)
            state.records[stored.spectrum_id] = stored
        if obj.get("model"):
            state.model = model_from_json(obj["model"])
        return state


def apply_event(state: InstanceState | None, event: dict) -> InstanceState:
    etype, data = event["type"], event["data"]
    if etype == "instance_created":
        return InstanceState.from_config_json(data)
    if state is None:
        raise NotFoundError(f"event {etype} before instance_created")
    if etype == "spectrum_added":
        stored = StoredSpectrum.from_json(data)
        state.records[stored.spectrum_id] = stored
    elif etype == "spectrum_status_changed":
        rec = state.records.get(data["spectrum_id"])
        if rec is not None:
            rec.status = data["status"]
    elif etype == "spectrum_deleted":
        state.records.pop(data["spectrum_id"], None)
    elif etype == "model_trained":
        state.model = model_from_json(data["model"])
    elif etype == "feedback_recorded":
        pass  # audit trail only; the spectrum copy is its own event
    else:
        raise NotFoundError(f"unknown event type {etype!r}")
    return state


@dataclass
class ScanRecord:
    spectrum: Spectrum
    label: str | None
    prediction: Prediction | None
    model_version: int | None


@dataclass
class Session:
    session_id: str
    slug: str
    mode: str
    state: str  # started | scanned | closed
    created_at: datetime
    last_activity: float  # monotonic clock
    scans: list[ScanRecord] = field(default_factory=list)
    feedback_given: bool = False

    @property
    def last_prediction(self) -> Prediction | None:
        for scan in reversed(self.scans):
            if scan.prediction is not None:
                return scan.prediction
        return None


class _Instance:
    """An InstanceState plus its write lock and event log."""

    def __init__(self, state: InstanceState, log: EventLog):
        self.state = state
        self.log = log
        self.lock = threading.RLock()
        self.snapshot_seq = 0

    def maybe_snapshot(self) -> None:
        if self.log.last_seq - self.snapshot_seq >= SNAPSHOT_INTERVAL:
            self.snapshot()

    def snapshot(self) -> None:
        self.log.write_snapshot(self.state.to_snapshot())
        self.snapshot_seq = self.log.last_seq


class NirhubService:
    """All server operations, independent of the HTTP layer."""

    def __init__(
        self,
        storage_root: str | Path,
        session_timeout_s: float = DEFAULT_SESSION_TIMEOUT_S,
    ):
        self.store = InstanceStore(Path(storage_root))
        self.session_timeout_s = session_timeout_s
        self._instances: dict[str, _Instance] = {}
        self._sessions: dict[str, Session] = {}
        self._sessions_lock = threading.Lock()
        self._create_lock = threading.Lock()
        self._load()

    def _load(self) -> None:
        for slug in self.store.slugs():
            log = self.store.log_for(slug)
            snapshot, tail = log.load()
            state = InstanceState.from_snapshot(snapshot["state"]) if snapshot else None
            for event in tail:
                state = apply_event(state, event)
            if state is None:
                log.close()  # directory without a created event; ignore
                continue
            inst = _Instance(state, log)
            inst.snapshot_seq = snapshot["last_seq"] if snapshot else 0
            self._instances[slug] = inst

    def close(self) -> None:
        for inst in self._instances.values():
            with inst.lock:
                inst.snapshot()
                inst.log.close()

    # -- helpers ---------------------------------------------------------

    def _instance(self, slug: str) -> _Instance:
        inst = self._instances.get(slug)
        if inst is None:
            raise NotFoundError(f"no instance with slug {slug!r}")
        return inst

    def _session(self, session_id: str) -> Session:
        with self._sessions_lock:
            session = self._sessions.get(session_id)
            if session is not None and self._expired(session):
                del self._sessions[session_id]
                session = None
            if session is None:
                raise NotFoundError(f"no active session {session_id!r}")
            session.last_activity = time.monotonic()
            return session

    def _expired(self, session: Session) -> bool:
        return time.monotonic() - session.last_activity > self.session_timeout_s

    def _prune_sessions(self) -> None:
        with self._sessions_lock:
            dead = [sid for sid, s in self._sessions.items() if self._expired(s)]
            for sid in dead:
                del self._sessions[sid]

    @staticmethod
    def _threshold_report(state: InstanceState, include_unverified: bool = False) -> dict:
        statuses = set(ELIGIBLE_DEFAULT)
        if include_unverified:
            statuses.add(STATUS_UNVERIFIED)
        counts: dict[str, int] = {}
        for rec in state.records.values():
            if rec.status in statuses:
                counts[rec.label] = counts.get(rec.label, 0) + 1
        counts = dict(sorted(counts.items()))
        deficient = sorted(
            cls for cls, n in counts.items() if n < state.min_spectra_per_class
        )
        met = len(counts) >= 2 and not deficient
        return {
            "counts": counts,
            "threshold_met": met,
            "deficient_classes": deficient,
            "min_spectra_per_class": state.min_spectra_per_class,
        }

    @staticmethod
    def _preprocess_or_error(spectrum: Spectrum, pipeline: PipelineConfig):
        try:
            return preprocess(spectrum, pipeline)
        except (CoverageError, DegenerateSpectrumError, ConfigError) as exc:
            raise PreprocessError(
                f"{stage_of(exc)}: {exc.message}",
                details={"stage": stage_of(exc), **exc.details},
            ) from exc

    def _store_spectrum(
        self, inst: _Instance, spectrum: Spectrum, label: str, status: str
    ) -> StoredSpectrum:
        """Append and apply one knowledge-base record; caller holds the lock."""
        stored = StoredSpectrum(
            spectrum_id=uuid.uuid4().hex,
            spectrum=spectrum,
            label=label,
            status=status,
            added_at=datetime.now(timezone.utc),
        )
        inst.log.append("spectrum_added", stored.to_json())
        inst.state.records[stored.spectrum_id] = stored
        return stored

    # -- instance management ----------------------------------------------

    def create_instance(
        self,
        name: str,
        instructions: dict | None = None,
        pipeline: dict | None = None,
        min_spectra_per_class: int | None = None,
        knn_k: int | None = None,
        knn_distance: str | None = None,
        in_situ_status: str | None = None,
    ) -> dict:
        if not isinstance(name, str) or not name.strip():
            raise ValidationError("instance name must be non-empty")
        try:
            pipeline_cfg = PipelineConfig.from_json(pipeline or {})
        except ConfigError as exc:
            raise ValidationError(f"invalid pipeline overrides: {exc.message}") from exc

        texts = dict(DEFAULT_INSTRUCTIONS)
        for mode, text in (instructions or {}).items():
            if mode not in MODES:
                raise ValidationError(f"unknown instruction mode {mode!r}")
            texts[mode] = str(text)

        min_per_class = (
            DEFAULT_MIN_SPECTRA_PER_CLASS
            if min_spectra_per_class is None
            else int(min_spectra_per_class)
        )
        if min_per_class < 1:
            raise ValidationError("min_spectra_per_class must be >= 1")
        k = DEFAULT_K if knn_k is None else int(knn_k)
        if k < 1 or k % 2 == 0:
            raise ValidationError(f"k must be a positive odd integer, got {k}")
        distance = knn_distance or "euclidean"
        if distance not in DISTANCES:
            raise ValidationError(f"distance must be one of {DISTANCES}")
        situ_status = in_situ_status or STATUS_VERIFIED
        if situ_status not in STATUSES:
            raise ValidationError(f"in_situ_status must be one of {STATUSES}")

        with self._create_lock:
            base = slugify(name)
            if not base:
                raise ValidationError("instance name must contain letters or digits")
            slug, n = base, 1
            while slug in self._instances:
                n += 1
                suffix = f"-{n}"
                slug = base[: 64 - len(suffix)].rstrip("-") + suffix
            assert _SLUG_RE.match(slug)

            state = InstanceState(
                slug=slug,
                name=name.strip(),
                instructions=texts,
                pipeline=pipeline_cfg,
                min_spectra_per_class=min_per_class,
                knn_k=k,
                knn_distance=distance,
                in_situ_status=situ_status,
                created_at=datetime.now(timezone.utc),
            )
            log = self.store.log_for(slug)
            log.load()
            log.append("instance_created", state.config_json())
            self._instances[slug] = _Instance(state, log)
        return {
            "slug": slug,
            "name": state.name,
            "manifest_path": f"/api/instances/{slug}/manifest",
            "created_at": format_timestamp(state.created_at),
        }

    def list_instances(self) -> list[dict]:
        summaries = []
        for inst in self._instances.values():
            state = inst.state
            with inst.lock:
                report = self._threshold_report(state)
                model = state.model
            summaries.append(
                {
                    "slug": state.slug,
                    "name": state.name,
                    "created_at": format_timestamp(state.created_at),
                    "knowledge_base_size": len(state.records),
                    "model_available": model is not None,
                    "model_version": model.version if model else None,
                    "loo_accuracy": model.evaluation if model else None,
                    **report,
                }
            )
        summaries.sort(key=lambda s: (s["created_at"], s["slug"]))
        return summaries

    def get_manifest(self, slug: str) -> dict:
        state = self._instance(slug).state
        model = state.model
        return {
            "protocol_version": PROTOCOL_VERSION,
            "slug": state.slug,
            "name": state.name,
            "instructions": dict(state.instructions),
            "pipeline": state.pipeline.to_json(),
            "model_available": model is not None,
            "model_version": model.version if model else None,
            "created_at": format_timestamp(state.created_at),
        }

    # -- session protocol --------------------------------------------------

    def start_session(self, slug: str, mode: str) -> dict:
        inst = self._instance(slug)
        if mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {mode!r}")
        if mode == MODE_IDENTIFY and inst.state.model is None:
            raise ModelUnavailableError(
                f"instance {slug!r} has no trained model; run a training "
                "session or retrain first"
            )
        self._prune_sessions()
        session = Session(
            session_id=uuid.uuid4().hex,
            slug=slug,
            mode=mode,
            state="started",
            created_at=datetime.now(timezone.utc),
            last_activity=time.monotonic(),
        )
        with self._sessions_lock:
            self._sessions[session.session_id] = session
        return {
            "session_id": session.session_id,
            "mode": mode,
            "instructions": inst.state.instructions[mode],
        }

    def submit_scan(self, session_id: str, spectrum_doc: object, label: str | None) -> dict:
        session = self._session(session_id)
        if session.state == "closed":
            raise InvalidStateError(f"session {session_id!r} is closed")
        inst = self._instance(session.slug)
        spectrum = spectrum_from_json(spectrum_doc, require_valid=False)

        if session.mode == MODE_TRAIN:
            if not label:
                raise ValidationError("train-mode scans require a label")
            labeled = spectrum.with_meta(
                source=SpectrumSource.IN_SITU_TRAINING, label=label
            )
            violations = validate(labeled)
            if violations:
                raise ValidationError(
                    "invalid spectrum: " + "; ".join(violations),
                    details={"violations": violations},
                )
            self._preprocess_or_error(labeled, inst.state.pipeline)
            with inst.lock:
                self._store_spectrum(inst, labeled, label, inst.state.in_situ_status)
                report = self._threshold_report(inst.state)
                inst.maybe_snapshot()
            session.scans.append(ScanRecord(labeled, label, None, None))
            session.state = "scanned"
            return {"kind": "train_ack", **report}

        # identify
        if label:
            raise ValidationError("labels are only accepted on train-mode scans")
        violations = validate(spectrum)
        if violations:
            raise ValidationError(
                "invalid spectrum: " + "; ".join(violations),
                details={"violations": violations},
            )
        model = inst.state.model  # one atomic read; retrain swaps the reference
        if model is None:
            raise ModelUnavailableError(f"instance {session.slug!r} has no trained model")
        features = self._preprocess_or_error(spectrum, inst.state.pipeline)
        prediction = classify(model, features)
        session.scans.append(
            ScanRecord(spectrum, None, prediction, model.version)
        )
        session.state = "scanned"
        return {
            "kind": "prediction",
            "label": prediction.label,
            "confidence": prediction.confidence,
            "model_version": model.version,
            "neighbor_labels": list(prediction.neighbor_labels),
        }

    def submit_feedback(
        self, session_id: str, verdict: str, corrected_label: str | None = None
    ) -> dict:
        session = self._session(session_id)
        if session.state == "closed":
            raise InvalidStateError(f"session {session_id!r} is closed")
        if session.mode != MODE_IDENTIFY:
            raise InvalidStateError("feedback applies to identify sessions only")
        if not session.scans:
            raise InvalidStateError("feedback requires at least one scan")
        if verdict not in (VERDICT_CORRECT, VERDICT_INCORRECT):
            raise ValidationError(
                f"verdict must be '{VERDICT_CORRECT}' or '{VERDICT_INCORRECT}'"
            )
        if verdict == VERDICT_INCORRECT and not corrected_label:
            raise ValidationError("verdict 'incorrect' requires corrected_label")
        if verdict == VERDICT_CORRECT and corrected_label:
            raise ValidationError("corrected_label is only accepted with verdict 'incorrect'")

        inst = self._instance(session.slug)
        scan_index = len(session.scans) - 1
        scan = session.scans[scan_index]
        label = corrected_label if verdict == VERDICT_INCORRECT else scan.prediction.label
        copied = scan.spectrum.with_meta(source=SpectrumSource.FEEDBACK, label=label)
        with inst.lock:
            inst.log.append(
                "feedback_recorded",
                {
                    "session_id": session_id,
                    "scan_index": scan_index,
                    "verdict": verdict,
                    "corrected_label": corrected_label,
                    "predicted_label": scan.prediction.label,
                    "model_version": scan.model_version,
                    "submitted_at": format_timestamp(datetime.now(timezone.utc)),
                },
            )
            stored = self._store_spectrum(inst, copied, label, STATUS_UNVERIFIED)
            inst.maybe_snapshot()
        session.state = "closed"  # feedback is the protocol's terminal step
        return {
            "status": "recorded",
            "verdict": verdict,
            "stored_label": label,
            "stored_status": stored.status,
        }

    # -- model lifecycle ----------------------------------------------------

    def retrain(self, slug: str, include_unverified: bool = False) -> dict:
        inst = self._instance(slug)
        with inst.lock:
            state = inst.state
            statuses = set(ELIGIBLE_DEFAULT)
            if include_unverified:
                statuses.add(STATUS_UNVERIFIED)
            records = [r for r in state.records.values() if r.status in statuses]
            vectors = [
                self._preprocess_or_error(r.spectrum, state.pipeline) for r in records
            ]
            training_set = TrainingSet(
                vectors=vectors,
                labels=[r.label for r in records],
                pipeline=state.pipeline,
                min_spectra_per_class=state.min_spectra_per_class,
            )
            version = state.model.version + 1 if state.model else 1
            model = train(
                training_set,
                k=state.knn_k,
                distance=state.knn_distance,
                version=version,
            )
            inst.log.append("model_trained", {"model": model_to_json(model)})
            state.model = model  # atomic swap: readers see old or new, never both
            inst.maybe_snapshot()
        return {
            "version": model.version,
            "loo_accuracy": model.evaluation,
            "examples": len(training_set),
            "classes": training_set.classes,
        }

    # -- knowledge-base management ------------------------------------------

    def get_spectra(
        self, slug: str, status: str | None = None, label: str | None = None
    ) -> list[dict]:
        inst = self._instance(slug)
        if status is not None and status not in STATUSES:
            raise ValidationError(f"status filter must be one of {STATUSES}")
        with inst.lock:
            records = list(inst.state.records.values())
        return [
            r.to_json()
            for r in records
            if (status is None or r.status == status)
            and (label is None or r.label == label)
        ]

    def set_spectrum_status(self, slug: str, spectrum_id: str, status: str) -> dict:
        inst = self._instance(slug)
        if status not in CROWDSOURCED_STATUSES:
            raise ValidationError(
                f"moderation can only set one of {CROWDSOURCED_STATUSES}"
            )
        with inst.lock:
            rec = inst.state.records.get(spectrum_id)
            if rec is None:
                raise NotFoundError(f"no spectrum {spectrum_id!r} in {slug!r}")
            if rec.status not in CROWDSOURCED_STATUSES:
                raise InvalidStateError(
                    f"spectrum {spectrum_id!r} is a {rec.status} record; "
                    "only crowdsourced spectra are moderated"
                )
            inst.log.append(
                "spectrum_status_changed",
                {"spectrum_id": spectrum_id, "status": status},
            )
            rec.status = status
            inst.maybe_snapshot()
        return {"spectrum_id": spectrum_id, "status": status}

    def delete_spectrum(self, slug: str, spectrum_id: str) -> None:
        inst = self._instance(slug)
        with inst.lock:
            if spectrum_id not in inst.state.records:
                raise NotFoundError(f"no spectrum {spectrum_id!r} in {slug!r}")
            inst.log.append("spectrum_deleted", {"spectrum_id": spectrum_id})
            del inst.state.records[spectrum_id]
            inst.maybe_snapshot()

    def bulk_import_csv(self, slug: str, csv_text: str) -> dict:
        inst = self._instance(slug)
        spectra, errors = parse_reference_csv(csv_text)
        failures = [e.to_json() for e in errors]
        imported = 0
        with inst.lock:
            for spectrum in spectra:
                try:
                    self._preprocess_or_error(spectrum, inst.state.pipeline)
                except PreprocessError as exc:
                    failures.append(
                        {"where": f"column {spectrum.meta.label}", "message": exc.message}
                    )
                    continue
                self._store_spectrum(
                    inst, spectrum, spectrum.meta.label, STATUS_REFERENCE
                )
                imported += 1
            report = self._threshold_report(inst.state)
            inst.maybe_snapshot()
        return {"imported": imported, "failures": failures, **report}
