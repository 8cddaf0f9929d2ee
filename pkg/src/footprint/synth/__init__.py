"""Deterministic synthetic corpora: WannaCry runs, ambient activity, mixtures.

Every output is a pure function of ``(kind, seed, scale)``. A profile can be
emitted either directly as a :class:`~footprint.features.FeatureDocument` or
as a Cuckoo-style JSON report. Ingesting the report and building a document
with the default cutoff gives back the same bag.

``scale`` multiplies ambient activity. The WannaCry footprint itself is
fixed, so ``scale`` only grows the flight-search half of a mixed run.
"""

from __future__ import annotations

import hashlib
import io
import json
import random
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Any, BinaryIO, Iterator, Sequence

from ..features import DocumentMeta, FeatureDocument, Label
from . import ambient, wannacry
from .ambient import SynthEvent, enhanced, noise_call
from .wannacry import (
    API_CALL,
    CUTOFF_ENTRY,
    CUTOFF_PATTERN,
    ENHANCED,
    PRE_ENCRYPTION_ENTRIES,
    SHARED_ENTRIES,
    TOP_TIER_ENTRIES,
    TOP_TIER_KEYS,
    FixtureEntry,
    WannaCryFixture,
    encryption_entries,
    published_tiers,
    wannacry_fixture,
)

__all__ = [
    "DEFAULT_AMBIENT_KINDS",
    "DOS_STUB",
    "Emit",
    "SynthKind",
    "SynthProfile",
    "TOP_TIER_KEYS",
    "WannaCryFixture",
    "ambient_corpus",
    "ambient_profiles",
    "generate_document",
    "generate_polymorphic_pair",
    "generate_report",
    "mutate_dos_stub",
    "published_tiers",
    "reference_corpus",
    "timeline",
    "wannacry_fixture",
    "write_report",
]


class SynthKind(str, Enum):
    WANNACRY = "wannacry"
    AMBIENT_BROWSING = "ambient_browsing"
    AMBIENT_FILEIO = "ambient_fileio"
    AMBIENT_EMAIL = "ambient_email"
    AMBIENT_FLIGHTS = "ambient_flights"
    MIXED_FLIGHTS_WANNACRY = "mixed_flights_wannacry"

    @property
    def infected(self) -> bool:
        return self in (SynthKind.WANNACRY, SynthKind.MIXED_FLIGHTS_WANNACRY)


class Emit(str, Enum):
    FDOC = "fdoc"
    FULL_REPORT = "full_report"


@dataclass(frozen=True)
class SynthProfile:
    kind: SynthKind
    seed: int = 0
    scale: int = 1
    emit: Emit = Emit.FDOC

    def __post_init__(self):
        object.__setattr__(self, "kind", SynthKind(self.kind))
        object.__setattr__(self, "emit", Emit(self.emit))
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.scale < 1:
            raise ValueError("scale must be at least 1")

    @property
    def doc_id(self) -> str:
        return f"{self.kind.value}-{self.seed}"

    @property
    def label(self) -> Label:
        return Label.INFECTED if self.kind.infected else Label.AMBIENT


DEFAULT_AMBIENT_KINDS = (
    SynthKind.AMBIENT_BROWSING,
    SynthKind.AMBIENT_FILEIO,
    SynthKind.AMBIENT_EMAIL,
    SynthKind.AMBIENT_FLIGHTS,
)

MIXED_PLACES_COUNT = 180


# ---------------------------------------------------------------------------
# Timelines
# ---------------------------------------------------------------------------

_MALWARE = "wannacry.exe"
_DROPPED = "tasksche.exe"

_ENCRYPTION_CALLS = (
    ("misc", "SHGetFolderPathW", {"folder": "0x00000010", "path": "C:\\Documents and Settings\\cuckoo\\Desktop"}),
    ("file", "CreateFileW", {"filepath": "C:\\Documents and Settings\\cuckoo\\My Documents\\budget.xlsx"}),
    ("file", "ReadFile", {"file_handle": "0x00000224", "length": 65536}),
    ("file", "WriteFile", {"file_handle": "0x00000228", "buffer": "WANACRY!"}),
    ("file", "MoveFileWithProgressW", {"oldfilepath": "budget.xlsx.WNCRYT", "newfilepath": "budget.xlsx.WNCRY"}),
    ("crypto", "CryptEncrypt", {"crypto_handle": "0x0015c8a8", "final": 1}),
)


def _fixture_event(entry: FixtureEntry, seed: int) -> SynthEvent:
    record = entry.record
    if entry.kind == API_CALL and seed % 2:
        # older sandbox versions log arguments as a name/value list
        args = record["arguments"]
        record = dict(record, arguments=[
            {"name": "Registry", "value": args["base_handle"]},
            {"name": "SubKey", "value": args["regkey_r"]},
            {"name": "Access", "value": args["access"]},
        ])
    return SynthEvent(entry.kind, entry.key, record, _MALWARE)


def _expand(entries: Sequence[FixtureEntry], seed: int) -> list[SynthEvent]:
    return [_fixture_event(e, seed) for e in entries for _ in range(e.count)]


def _sprinkle(events: list[SynthEvent], rng: random.Random, rate: float, proc: str) -> Iterator[SynthEvent]:
    for ev in events:
        yield ev
        if rng.random() < rate:
            yield noise_call(rng, proc)


def _wannacry_timeline(seed: int) -> Iterator[SynthEvent]:
    rng = random.Random(f"wannacry:{seed}")
    by_phase: dict[str, list[FixtureEntry]] = {k: [] for k in "ABCDEF"}
    for e in PRE_ENCRYPTION_ENTRIES:
        if e.kind == API_CALL:
            phase = "B"
        elif "event=load" in e.key or "object=registry" in e.key:
            phase = "A"
        elif "event=execute" in e.key:
            phase = "D"
        elif e.key.endswith("t.wnry") and "event=read" in e.key:
            phase = "E"
        elif e.key.endswith("00000000.pky"):
            phase = "F"
        else:
            phase = "C"
        by_phase[phase].append(e)

    # imports and system reads, registry key creation, unpacking, hiding and
    # permissions, key material, then the private key
    for phase in "ABCDEF":
        events = _expand(by_phase[phase], seed)
        if phase == "C":
            msg_dir = [ev for ev in events if "object=dir" in ev.key]
            rest = [ev for ev in events if "object=dir" not in ev.key]
            rng.shuffle(rest)
            events = msg_dir + rest
        else:
            rng.shuffle(events)
        yield from _sprinkle(events, rng, 0.1, _MALWARE)
    yield SynthEvent(CUTOFF_ENTRY.kind, CUTOFF_ENTRY.key, CUTOFF_ENTRY.record, _MALWARE)

    post = [
        SynthEvent(e.kind, e.key, e.record, _DROPPED)
        for e in encryption_entries(seed)
        for _ in range(e.count)
    ]
    rng.shuffle(post)
    for ev in post:
        yield ev
        if rng.random() < 0.5:
            category, api, args = rng.choice(_ENCRYPTION_CALLS)
            yield SynthEvent(API_CALL, None, {"category": category, "api": api, "arguments": dict(args)}, _DROPPED)


def _planted(profile: SynthProfile, rng: random.Random) -> list[SynthEvent]:
    proc = ambient.PROCESSES[profile.kind.value]
    out: list[SynthEvent] = []
    seed = profile.seed
    if ambient.plants_crypto(seed):
        crypto = next(e for e in TOP_TIER_ENTRIES if e.key == wannacry.CRYPTO_PROVIDER_KEY)
        out += [SynthEvent(crypto.kind, crypto.key, crypto.record, proc)] * rng.randint(1, 3)
    for j in ambient.shared_indices(seed, len(SHARED_ENTRIES)):
        e = SHARED_ENTRIES[j]
        out += [SynthEvent(e.kind, e.key, e.record, proc)] * rng.randint(1, 2)
    if profile.kind.value in ambient.FIREFOX_KINDS and ambient.plants_places(seed):
        out += [enhanced("file", "write", proc, file=ambient.PLACES_PATH)] * rng.randint(20, 60)
    rng.shuffle(out)
    return out


def _mixed_timeline(profile: SynthProfile) -> Iterator[SynthEvent]:
    rng = random.Random(f"{profile.kind.value}:{profile.seed}:{profile.scale}")
    places = enhanced("file", "write", "firefox.exe", file=ambient.PLACES_PATH)
    remaining = MIXED_PLACES_COUNT
    for i, ev in enumerate(ambient.flights(rng, profile.scale)):
        yield ev
        if remaining and i % 6 == 5:
            yield places
            remaining -= 1
    for _ in range(remaining):
        yield places
    yield from _wannacry_timeline(profile.seed)


def timeline(profile: SynthProfile) -> Iterator[SynthEvent]:
    """All records of a run in chronological order."""
    kind = profile.kind
    if kind is SynthKind.WANNACRY:
        yield from _wannacry_timeline(profile.seed)
    elif kind is SynthKind.MIXED_FLIGHTS_WANNACRY:
        yield from _mixed_timeline(profile)
    else:
        rng = random.Random(f"{kind.value}:{profile.seed}:{profile.scale}")
        yield from _planted(profile, rng)
        yield from ambient.GENERATORS[kind.value](rng, profile.scale)


def _processes(profile: SynthProfile) -> list[str]:
    kind = profile.kind
    if kind is SynthKind.WANNACRY:
        return [_MALWARE, _DROPPED]
    if kind is SynthKind.MIXED_FLIGHTS_WANNACRY:
        return ["firefox.exe", _MALWARE, _DROPPED]
    return [ambient.PROCESSES[kind.value]]


# ---------------------------------------------------------------------------
# Documents
# ---------------------------------------------------------------------------


def generate_document(profile: SynthProfile) -> FeatureDocument:
    """The feature document a run produces, without going through a report.

    Mirrors how a report is read back: API calls are logged ahead of the
    enhanced section, so every selected call counts, while enhanced records
    count only up to the private-key write.
    """
    bag: Counter[str] = Counter()
    cutoff_eid = None
    eid = 0
    for ev in timeline(profile):
        if ev.kind == ENHANCED:
            eid += 1
            if cutoff_eid is not None:
                continue
            if CUTOFF_PATTERN in ev.key:
                cutoff_eid = eid
                continue
        if ev.key is not None:
            bag[ev.key] += 1
    meta = DocumentMeta(
        source_ids=(f"synth:{profile.kind.value}:seed={profile.seed}:scale={profile.scale}",),
        cutoff_applied=cutoff_eid is not None,
        cutoff_eid=cutoff_eid,
    )
    return FeatureDocument(profile.doc_id, profile.label, dict(bag), meta)


def ambient_profiles(
    n: int,
    kinds: Sequence[SynthKind | str] = DEFAULT_AMBIENT_KINDS,
    scale: int = 1,
) -> list[SynthProfile]:
    """Ambient profiles with seeds ``0..n-1``, cycling through ``kinds``."""
    return [SynthProfile(SynthKind(kinds[i % len(kinds)]), seed=i, scale=scale) for i in range(n)]


def ambient_corpus(
    n: int,
    kinds: Sequence[SynthKind | str] = DEFAULT_AMBIENT_KINDS,
    scale: int = 1,
) -> list[FeatureDocument]:
    return [generate_document(p) for p in ambient_profiles(n, kinds, scale)]


def reference_corpus(n_ambient: int = 4, seed: int = 0) -> list[FeatureDocument]:
    """One WannaCry document followed by ``n_ambient`` default ambient ones."""
    return [generate_document(SynthProfile(SynthKind.WANNACRY, seed))] + ambient_corpus(n_ambient)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

DOS_STUB = "This program cannot be run in DOS mode."


def mutate_dos_stub(text: str) -> str:
    """Lowercase the stub message and replace its spaces with dashes."""
    return text.lower().replace(" ", "-")


def _fake_binary(profile: SynthProfile, stub: str) -> bytes:
    # inert bytes standing in for the submitted sample; no executable content
    rng = random.Random(f"binary:{profile.kind.value}:{profile.seed}")
    body = bytes(rng.getrandbits(8) for _ in range(512))
    return b"MZ\x90\x00" + stub.encode("ascii") + body


def _static_sections(profile: SynthProfile, variant: str) -> dict[str, Any]:
    stub = DOS_STUB if variant == "original" else mutate_dos_stub(DOS_STUB)
    if profile.kind.infected:
        sample = _fake_binary(profile, stub)
        name = "wannacry.exe" if profile.kind is SynthKind.WANNACRY else "flights_then_wannacry.py"
    else:
        sample = f"# {profile.kind.value} driver script, seed {profile.seed}\n".encode()
        name = f"{profile.kind.value}.py"
    target = {
        "category": "file",
        "file": {
            "name": name,
            "size": len(sample),
            "md5": hashlib.md5(sample).hexdigest(),
            "sha1": hashlib.sha1(sample).hexdigest(),
            "sha256": hashlib.sha256(sample).hexdigest(),
        },
    }
    static: dict[str, Any] = {}
    positives = 0
    if profile.kind is SynthKind.WANNACRY:
        static = {
            "pe_imagebase": "0x00400000",
            "dos_stub": stub,
            "pe_imports": [{"dll": "ADVAPI32.dll", "imports": [{"name": "CryptAcquireContextA"}]}],
            "pe_sections": [
                {"name": ".text", "size_of_data": "0x00008000", "entropy": 6.4},
                {"name": ".rsrc", "size_of_data": "0x00349000", "entropy": 7.99},
            ],
        }
        if variant == "original":
            positives = random.Random(f"vt:{profile.seed}").randint(50, 63)
    virustotal = {"total": 63, "positives": positives, "scans": {}}
    return {"target": target, "static": static, "virustotal": virustotal}


class _Writer:
    def __init__(self, fp: BinaryIO):
        self._fp = fp
        self._parts: list[str] = []

    def __call__(self, text: str) -> None:
        self._parts.append(text)
        if len(self._parts) >= 2048:
            self.flush()

    def flush(self) -> None:
        if self._parts:
            self._fp.write("".join(self._parts).encode("utf-8"))
            self._parts.clear()


_T0 = 1494583200.0  # 2017-05-12 10:00:00 UTC
_STEP_MS = 43


def _timestamp(i: int) -> str:
    ms = 36_000_000 + i * _STEP_MS
    day, ms = divmod(ms, 86_400_000)
    secs, ms = divmod(ms, 1000)
    h, rem = divmod(secs, 3600)
    m, s = divmod(rem, 60)
    return f"2017-05-{12 + day:02d} {h:02d}:{m:02d}:{s:02d},{ms:03d}"


def _dumps(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False)


def write_report(profile: SynthProfile, fp: BinaryIO, *, variant: str = "original") -> None:
    """Stream a Cuckoo-style JSON report for ``profile`` into ``fp``.

    ``variant="polymorphic"`` changes only the static description of the
    sample (stub message, hashes, AV hits); behavior is untouched.
    """
    if variant not in ("original", "polymorphic"):
        raise ValueError(f"unknown variant {variant!r}")
    w = _Writer(fp)
    sections = _static_sections(profile, variant)
    info = {"id": profile.seed, "package": "exe" if profile.kind is SynthKind.WANNACRY else "python",
            "machine": {"name": "winxp-cuckoo", "label": "cuckoo1"}, "version": "2.0.0"}
    w('{"info":' + _dumps(info))
    w(',"target":' + _dumps(sections["target"]))
    w(',"static":' + _dumps(sections["static"]))
    w(',"behavior":{"processes":[')

    procs = _processes(profile)
    pid_rng = random.Random(f"pids:{profile.kind.value}:{profile.seed}")
    pids = [pid_rng.randrange(1000, 4000, 4) for _ in procs]
    for p, (name, pid) in enumerate(zip(procs, pids)):
        w(("," if p else "") + '{"process_name":' + _dumps(name) + ',"pid":' + str(pid)
          + ',"ppid":' + str(pids[p - 1] if p else 1444) + ',"calls":[')
        first = True
        for i, ev in enumerate(timeline(profile)):
            if ev.kind != API_CALL or ev.process != name:
                continue
            rec = {"timestamp": _timestamp(i), "time": round(_T0 + i * _STEP_MS / 1000, 3), "tid": pid + 4}
            rec.update(ev.record)
            rec["status"] = 1
            rec["return_value"] = 0
            w(("" if first else ",") + _dumps(rec))
            first = False
        w("]}")
    tree = [{"name": n, "pid": pid, "children": []} for n, pid in zip(procs, pids)]
    w('],"processtree":' + _dumps(tree) + ',"summary":{"files":[],"keys":[],"mutexes":["MsWinZonesCacheCounterMutexA"]}')
    w(',"enhanced":[')
    eid = 0
    for i, ev in enumerate(timeline(profile)):
        if ev.kind != ENHANCED:
            continue
        eid += 1
        rec = {"event": ev.record["event"], "object": ev.record["object"],
               "timestamp": _timestamp(i), "eid": eid, "data": ev.record["data"]}
        w(("," if eid > 1 else "") + _dumps(rec))
    w("]}")
    w(',"signatures":[]')
    network = {"hosts": [], "domains": [], "tcp": [], "udp": [], "http": []}
    if profile.kind in (SynthKind.AMBIENT_FLIGHTS, SynthKind.MIXED_FLIGHTS_WANNACRY):
        network["domains"] = [{"domain": "www.google.com", "ip": "172.217.0.36"}]
    w(',"network":' + _dumps(network))
    w(',"virustotal":' + _dumps(sections["virustotal"]))
    w(',"dropped":[],"volatility":{}}')
    w("\n")
    w.flush()


def generate_report(profile: SynthProfile, *, variant: str = "original") -> bytes:
    buf = io.BytesIO()
    write_report(profile, buf, variant=variant)
    return buf.getvalue()


def generate_polymorphic_pair(seed: int = 0) -> tuple[bytes, bytes]:
    """Reports of the original sample and a byte-patched variant of it."""
    profile = SynthProfile(SynthKind.WANNACRY, seed, emit=Emit.FULL_REPORT)
    return generate_report(profile), generate_report(profile, variant="polymorphic")
