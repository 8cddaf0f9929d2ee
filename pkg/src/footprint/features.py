"""Feature keys and bag-of-words documents.

A feature key identifies a log entry by everything except its timestamp and
event id::

    enhanced:_object=<object>+event=<action>+data=<k1>:<v1>[+<k2>:<v2>...]
    bigram:_api=<api>+arguments=<registry path>

Keys are lowercase with edge whitespace trimmed from every rendered field.
"""

from __future__ import annotations

import json
import re
from functools import lru_cache
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterable, Mapping, NewType, Sequence

from .errors import DuplicateSourceId, MalformedInput, MissingDataField, VersionUnsupported
from .ingest import EventKind, LogEvent

__all__ = [
    "DEFAULT_CUTOFF",
    "NO_CUTOFF",
    "CutoffSpec",
    "CutoffMode",
    "DocumentMeta",
    "FeatureDocument",
    "FeatureKey",
    "Label",
    "build_document",
    "canonicalize",
    "dumps_fdoc",
    "find_cutoff",
    "is_feature_key",
    "loads_fdoc",
    "merge_documents",
    "normalize_text",
]

FeatureKey = NewType("FeatureKey", str)

ENHANCED_PREFIX = "enhanced:_object="
BIGRAM_PREFIX = "bigram:_api="

FDOC_VERSION = 1

# registry-path argument names, most specific first; matched case-insensitively
REGISTRY_PATH_ARGUMENTS = ("subkey", "lpsubkey", "regkey_r", "regkey", "key_name", "keyname")

_CONTROL = re.compile(r"[\x00-\x1f\x7f-\x9f]")


def normalize_text(s: str) -> str:
    """Lowercase, drop control characters, trim edges."""
    if s.isascii() and s.isprintable():
        return s.lower().strip()
    return _CONTROL.sub("", s).lower().strip()


# object, verb and field names repeat on nearly every record
_normalize_name = lru_cache(maxsize=4096)(normalize_text)


def is_feature_key(s: str) -> bool:
    return (
        s.startswith((ENHANCED_PREFIX, BIGRAM_PREFIX))
        and s == normalize_text(s)
    )


def _registry_path(arguments: Mapping[str, str]) -> str | None:
    lowered = {k.strip().lower(): v for k, v in arguments.items()}
    for name in REGISTRY_PATH_ARGUMENTS:
        value = lowered.get(name)
        if value is not None and value.strip():
            return value
    return None


def canonicalize(event: LogEvent) -> FeatureKey:
    """Render the feature key of ``event``.

    Raises :class:`MissingDataField` when there is nothing to put in the data
    (enhanced) or arguments (API call) part.
    """
    if event.kind is EventKind.API_CALL:
        path = _registry_path(event.data)
        if path is None:
            raise MissingDataField(f"{event.action} call without a registry path argument")
        return FeatureKey(
            f"{BIGRAM_PREFIX}{normalize_text(event.action)}+arguments={normalize_text(path)}"
        )
    items = event.data.items()
    if len(items) == 1:
        ((k, v),) = items
        v = normalize_text(v)
        if not v:
            raise MissingDataField(f"enhanced {event.object}/{event.action} event without data")
        data = f"{_normalize_name(k)}:{v}"
    else:
        pairs = []
        for k, v in items:
            v = normalize_text(v)
            if v:
                pairs.append((_normalize_name(k), v))
        if not pairs:
            raise MissingDataField(f"enhanced {event.object}/{event.action} event without data")
        pairs.sort()
        data = "+".join(f"{k}:{v}" for k, v in pairs)
    return FeatureKey(
        f"{ENHANCED_PREFIX}{_normalize_name(event.object)}"
        f"+event={_normalize_name(event.action)}+data={data}"
    )


# ---------------------------------------------------------------------------
# Cutoff
# ---------------------------------------------------------------------------


class CutoffMode(str, Enum):
    TRUNCATE_AT_FIRST_MATCH = "truncate_at_first_match"
    NONE = "none"


@dataclass(frozen=True)
class CutoffSpec:
    pattern: str = "00000000.eky"
    mode: CutoffMode = CutoffMode.TRUNCATE_AT_FIRST_MATCH

    def __post_init__(self):
        object.__setattr__(self, "mode", CutoffMode(self.mode))
        if self.mode is CutoffMode.TRUNCATE_AT_FIRST_MATCH and not self.pattern:
            raise ValueError("cutoff pattern must be non-empty")

    @property
    def active(self) -> bool:
        return self.mode is CutoffMode.TRUNCATE_AT_FIRST_MATCH

    def matches(self, key: str) -> bool:
        return self.active and self.pattern.lower() in key


DEFAULT_CUTOFF = CutoffSpec()
NO_CUTOFF = CutoffSpec(pattern="", mode=CutoffMode.NONE)


def find_cutoff(events: Iterable[LogEvent], spec: CutoffSpec = DEFAULT_CUTOFF) -> int | None:
    """Index of the first event whose key contains ``spec.pattern``."""
    if not spec.active:
        return None
    for i, ev in enumerate(events):
        try:
            key = canonicalize(ev)
        except MissingDataField:
            continue
        if spec.matches(key):
            return i
    return None


# ---------------------------------------------------------------------------
# Documents
# ---------------------------------------------------------------------------


class Label(str, Enum):
    INFECTED = "infected"
    AMBIENT = "ambient"


@dataclass(frozen=True)
class DocumentMeta:
    source_ids: tuple[str, ...] = ()
    cutoff_applied: bool = False
    cutoff_eid: int | None = None
    cutoff_index: int | None = None
    rejected: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "source_ids": list(self.source_ids),
            "cutoff_applied": self.cutoff_applied,
            "cutoff_eid": self.cutoff_eid,
            "cutoff_index": self.cutoff_index,
            "rejected": self.rejected,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "DocumentMeta":
        return cls(
            source_ids=tuple(d.get("source_ids", ())),
            cutoff_applied=bool(d.get("cutoff_applied", False)),
            cutoff_eid=d.get("cutoff_eid"),
            cutoff_index=d.get("cutoff_index"),
            rejected=int(d.get("rejected", 0)),
        )


@dataclass(frozen=True)
class FeatureDocument:
    """A labelled bag of feature keys.

    ``bag`` should be treated as read-only; every operation here returns new
    documents.
    """

    id: str
    label: Label
    bag: dict[str, int]
    meta: DocumentMeta = field(default_factory=DocumentMeta)

    def __post_init__(self):
        object.__setattr__(self, "label", Label(self.label))
        for key, count in self.bag.items():
            if not isinstance(count, int) or isinstance(count, bool) or count < 1:
                raise ValueError(f"count for {key!r} must be a positive integer, got {count!r}")

    @property
    def total(self) -> int:
        return sum(self.bag.values())

    def __len__(self) -> int:
        return len(self.bag)

    def __contains__(self, key: object) -> bool:
        return key in self.bag

    def relabel(self, id: str | None = None, label: Label | str | None = None) -> "FeatureDocument":
        return replace(self, id=self.id if id is None else id, label=self.label if label is None else Label(label))


def build_document(
    events: Iterable[LogEvent],
    spec: CutoffSpec = DEFAULT_CUTOFF,
    id: str = "doc",
    label: Label | str = Label.AMBIENT,
    source_ids: Sequence[str] = (),
) -> FeatureDocument:
    """Count the keys of every event before the first cutoff match.

    Events that cannot be rendered into a key are skipped and counted in
    ``meta.rejected``. Accepts any iterable, including a live
    :class:`~footprint.ingest.ReportReader`, and stops consuming it at the
    cutoff.
    """
    bag: Counter[str] = Counter()
    rejected = 0
    cutoff_index = cutoff_eid = None
    pattern = spec.pattern.lower() if spec.active else None
    for i, ev in enumerate(events):
        try:
            key = canonicalize(ev)
        except MissingDataField:
            rejected += 1
            continue
        if pattern is not None and pattern in key:
            cutoff_index, cutoff_eid = i, ev.eid
            break
        bag[key] += 1
    meta = DocumentMeta(
        source_ids=tuple(source_ids),
        cutoff_applied=cutoff_index is not None,
        cutoff_eid=cutoff_eid,
        cutoff_index=cutoff_index,
        rejected=rejected,
    )
    return FeatureDocument(id, Label(label), dict(bag), meta)


def merge_documents(docs: Sequence[FeatureDocument], id: str) -> FeatureDocument:
    """Sum the bags of ``docs`` into one document.

    The result is infected if any input is.
    """
    if not docs:
        raise ValueError("merge_documents needs at least one document")
    seen: set[str] = set()
    for d in docs:
        if d.id in seen:
            raise DuplicateSourceId(f"document id {d.id!r} appears twice in the merge")
        seen.add(d.id)
    bag: Counter[str] = Counter()
    for d in docs:
        bag.update(d.bag)
    label = Label.INFECTED if any(d.label is Label.INFECTED for d in docs) else Label.AMBIENT
    eids = {d.meta.cutoff_eid for d in docs if d.meta.cutoff_applied}
    meta = DocumentMeta(
        source_ids=tuple(d.id for d in docs),
        cutoff_applied=any(d.meta.cutoff_applied for d in docs),
        cutoff_eid=eids.pop() if len(eids) == 1 else None,
        rejected=sum(d.meta.rejected for d in docs),
    )
    return FeatureDocument(id, label, dict(bag), meta)


# ---------------------------------------------------------------------------
# .fdoc serialization
# ---------------------------------------------------------------------------


def dumps_fdoc(doc: FeatureDocument) -> bytes:
    """Serialize to the canonical ``.fdoc`` byte form (sorted keys)."""
    obj = {
        "format_version": FDOC_VERSION,
        "id": doc.id,
        "label": doc.label.value,
        "features": doc.bag,
        "meta": doc.meta.to_dict(),
    }
    text = json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return (text + "\n").encode("utf-8")


def loads_fdoc(data: bytes | str) -> FeatureDocument:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"not a feature document: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise MalformedInput("not a feature document: top level is not an object")
    version = obj.get("format_version")
    if version != FDOC_VERSION:
        raise VersionUnsupported(f"feature document format_version {version!r} is not supported")
    try:
        return FeatureDocument(
            id=obj["id"],
            label=Label(obj["label"]),
            bag=dict(obj["features"]),
            meta=DocumentMeta.from_dict(obj.get("meta", {})),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedInput(f"invalid feature document: {exc}") from None
