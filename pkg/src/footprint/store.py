"""On-disk corpus of feature documents.

Layout::

    <root>/manifest.json
    <root>/docs/<doc_id>.fdoc
    <root>/.lock

Every write goes to a temporary file in the target directory and is renamed
into place, and the manifest is always the last thing replaced when adding
(the first when removing). A crash between steps can leave an orphan
``.fdoc`` behind but never a manifest that points at a missing or
half-written document.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import tempfile
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Any

from filelock import FileLock

from .errors import (
    DigestMismatch,
    DuplicateDocId,
    InvalidDocId,
    IoFailure,
    MalformedInput,
    MissingFile,
    UnknownDocId,
    VersionUnsupported,
)
from .features import FeatureDocument, dumps_fdoc, loads_fdoc
from .report import iso_utc

__all__ = [
    "CorpusManifest",
    "ManifestEntry",
    "corpus_add",
    "corpus_list",
    "corpus_load",
    "corpus_remove",
    "digest_bytes",
]

MANIFEST_NAME = "manifest.json"
DOCS_DIR = "docs"
LOCK_NAME = ".lock"
MANIFEST_VERSION = 1

_DOC_ID = re.compile(r"[A-Za-z0-9_][A-Za-z0-9._-]{0,199}")


def digest_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class ManifestEntry:
    doc_id: str
    relative_path: str
    label: str
    digest: str
    added_at: str


@dataclass(frozen=True)
class CorpusManifest:
    name: str
    entries: tuple[ManifestEntry, ...] = ()
    format_version: int = MANIFEST_VERSION

    @property
    def count(self) -> int:
        return len(self.entries)

    @property
    def ids(self) -> list[str]:
        return [e.doc_id for e in self.entries]

    def get(self, doc_id: str) -> ManifestEntry | None:
        return next((e for e in self.entries if e.doc_id == doc_id), None)

    def to_dict(self) -> dict[str, Any]:
        return {
            "format_version": self.format_version,
            "name": self.name,
            "count": self.count,
            "entries": [e.__dict__ for e in self.entries],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CorpusManifest":
        version = d.get("format_version")
        if version != MANIFEST_VERSION:
            raise VersionUnsupported(f"manifest format_version {version!r} is not supported")
        try:
            entries = tuple(ManifestEntry(**e) for e in d["entries"])
            manifest = cls(name=d["name"], entries=entries, format_version=version)
        except (KeyError, TypeError) as exc:
            raise MalformedInput(f"invalid manifest: {exc}") from None
        if d.get("count", manifest.count) != manifest.count:
            raise MalformedInput("manifest count does not match its entries")
        if len(set(manifest.ids)) != manifest.count:
            raise MalformedInput("manifest lists a document id twice")
        return manifest


def _check_id(doc_id: str) -> None:
    if not _DOC_ID.fullmatch(doc_id):
        raise InvalidDocId(
            f"document id {doc_id!r} must match {_DOC_ID.pattern} to be used as a file name"
        )


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise
    _fsync_dir(path.parent)


def _fsync_dir(path: Path) -> None:
    try:
        fd = os.open(path, os.O_RDONLY)
    except OSError:
        return
    try:
        os.fsync(fd)
    except OSError:
        pass
    finally:
        os.close(fd)


def _manifest_bytes(manifest: CorpusManifest) -> bytes:
    return (json.dumps(manifest.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def _read_manifest(root: Path, *, create: bool = False) -> CorpusManifest:
    path = root / MANIFEST_NAME
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        if create:
            return CorpusManifest(name=root.resolve().name)
        raise MissingFile(f"no corpus manifest at {path}") from None
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    try:
        obj = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedInput(f"manifest {path} is not valid JSON: {exc}") from None
    return CorpusManifest.from_dict(obj)


def _lock(root: Path) -> FileLock:
    return FileLock(str(root / LOCK_NAME))


def corpus_list(root: str | Path) -> CorpusManifest:
    """Read the manifest without touching the documents."""
    return _read_manifest(Path(root))


def corpus_add(root: str | Path, doc: FeatureDocument, *, now: datetime | None = None) -> CorpusManifest:
    """Store ``doc`` under ``root`` and record it in the manifest.

    ``root`` may be missing or an empty directory, in which case a new corpus
    named after the directory is created.
    """
    root = Path(root)
    _check_id(doc.id)
    try:
        (root / DOCS_DIR).mkdir(parents=True, exist_ok=True)
        with _lock(root):
            manifest = _read_manifest(root, create=True)
            if manifest.get(doc.id) is not None:
                raise DuplicateDocId(f"document {doc.id!r} is already in the corpus")
            data = dumps_fdoc(doc)
            rel = f"{DOCS_DIR}/{doc.id}.fdoc"
            _atomic_write(root / rel, data)
            entry = ManifestEntry(doc.id, rel, doc.label.value, digest_bytes(data), iso_utc(now))
            manifest = CorpusManifest(manifest.name, manifest.entries + (entry,), manifest.format_version)
            _atomic_write(root / MANIFEST_NAME, _manifest_bytes(manifest))
            return manifest
    except OSError as exc:
        raise IoFailure(f"cannot write corpus at {root}: {exc}") from exc


def corpus_remove(root: str | Path, doc_id: str) -> CorpusManifest:
    root = Path(root)
    if not (root / MANIFEST_NAME).is_file():
        # checked before locking so a typo does not create a stray directory
        raise MissingFile(f"no corpus manifest at {root / MANIFEST_NAME}")
    try:
        with _lock(root):
            manifest = _read_manifest(root)
            entry = manifest.get(doc_id)
            if entry is None:
                raise UnknownDocId(f"document {doc_id!r} is not in the corpus")
            manifest = CorpusManifest(
                manifest.name,
                tuple(e for e in manifest.entries if e.doc_id != doc_id),
                manifest.format_version,
            )
            _atomic_write(root / MANIFEST_NAME, _manifest_bytes(manifest))
            try:
                (root / entry.relative_path).unlink()
            except FileNotFoundError:
                pass
            return manifest
    except OSError as exc:
        raise IoFailure(f"cannot update corpus at {root}: {exc}") from exc


def corpus_load(root: str | Path) -> list[FeatureDocument]:
    """Load every document in manifest order, verifying digests first."""
    root = Path(root)
    manifest = _read_manifest(root)
    blobs = []
    for entry in manifest.entries:
        path = root / entry.relative_path
        try:
            data = path.read_bytes()
        except FileNotFoundError:
            raise MissingFile(f"document {entry.doc_id!r} is missing: {path}") from None
        except OSError as exc:
            raise IoFailure(f"cannot read {path}: {exc}") from exc
        actual = digest_bytes(data)
        if actual != entry.digest:
            raise DigestMismatch(entry.doc_id, entry.digest, actual)
        blobs.append(data)
    return [loads_fdoc(b) for b in blobs]
