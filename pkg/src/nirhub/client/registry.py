"""Local store of registered instances: one JSON file, keyed by slug."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path


@dataclass
class Registration:
    slug: str
    name: str
    manifest_url: str
    base_url: str
    manifest: dict
    registered_at: str


class Registry:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._entries: dict[str, Registration] = {}
        self._load()

    def _load(self) -> None:
        if not self.path.exists():
            return
        doc = json.loads(self.path.read_text(encoding="utf-8"))
        for slug, raw in doc.get("registrations", {}).items():
            self._entries[slug] = Registration(**raw)

    def _save(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        doc = {"registrations": {slug: asdict(r) for slug, r in self._entries.items()}}
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, indent=2), encoding="utf-8")
        tmp.replace(self.path)

    def upsert(self, registration: Registration) -> None:
        self._entries[registration.slug] = registration
        self._save()

    def remove(self, slug: str) -> bool:
        if slug not in self._entries:
            return False
        del self._entries[slug]
        self._save()
        return True

    def get(self, slug: str) -> Registration | None:
        return self._entries.get(slug)

    def all(self) -> list[Registration]:
        return sorted(self._entries.values(), key=lambda r: r.slug)
