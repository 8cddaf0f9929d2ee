"""Streaming reader for sandbox behavior reports.

Two input shapes are understood:

* Cuckoo-style JSON reports. Only the ``behavior`` section is materialized,
  one record at a time (``behavior.enhanced[*]`` and
  ``behavior.processes[*].calls[*]``). Every other top-level section is
  skipped structurally without being decoded, so memory stays proportional to
  the largest single record rather than to the report.
* Line-delimited JSON, one LogEvent-shaped object per line.

Input bytes are decoded as UTF-8; invalid sequences become U+FFFD.
"""

from __future__ import annotations

import codecs
import hashlib
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache, partial
from pathlib import Path
from typing import Any, BinaryIO, Iterable, Iterator, NamedTuple

from .errors import MalformedInput, RecordSchemaError

__all__ = [
    "EventKind",
    "IngestOptions",
    "LogEvent",
    "ReportMeta",
    "ReportReader",
    "iter_events",
    "open_report",
    "parse_report",
    "select_behavior_events",
]

DEFAULT_CHUNK_SIZE = 256 * 1024

# objects whose enhanced records must carry a non-empty data field
DATA_OBJECTS = frozenset({"file", "registry", "dir"})

# both spellings occur in the wild
_REGCREATE_APIS = frozenset({"regcreatekeyexw", "regcreatkeyexw"})


class EventKind(str, Enum):
    ENHANCED = "enhanced"
    API_CALL = "api_call"


class LogEvent(NamedTuple):
    """One behavioral record.

    ``object`` is the enhanced object type (``file``, ``registry``, ``dir``,
    ...); for API calls it repeats the call category. ``action`` is the
    enhanced event verb or the API name.
    """

    kind: EventKind
    object: str
    action: str
    data: dict[str, str]
    timestamp: str | None = None
    eid: int | None = None
    category: str | None = None
    process_ref: str | None = None

    def to_record(self) -> dict[str, Any]:
        """JSON-ready dict in the line-delimited input format."""
        rec: dict[str, Any] = {
            "kind": self.kind.value,
            "object": self.object,
            "action": self.action,
            "data": dict(self.data),
        }
        for name in ("timestamp", "eid", "category", "process_ref"):
            value = getattr(self, name)
            if value is not None:
                rec[name] = value
        return rec


# skips the generated keyword-argument __new__ on the per-record hot path
_new_event = partial(tuple.__new__, LogEvent)


@dataclass(frozen=True)
class ReportMeta:
    source_path: str
    sha_of_input: str
    event_count: int
    skipped_count: int
    categories_seen: frozenset[str] = field(default_factory=frozenset)


@dataclass(frozen=True)
class IngestOptions:
    format: str = "cuckoo"  # "cuckoo" or "jsonl"
    chunk_size: int = DEFAULT_CHUNK_SIZE

    def __post_init__(self):
        if self.format not in ("cuckoo", "jsonl"):
            raise ValueError(f"unknown input format {self.format!r}")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be positive")


# ---------------------------------------------------------------------------
# Text helpers
# ---------------------------------------------------------------------------

_SURROGATES = re.compile("[\ud800-\udfff]")


def _clean(s: str) -> str:
    # undecodable bytes arrive as lone surrogates (surrogateescape)
    if s.isascii():
        return s
    return _SURROGATES.sub("�", s)


def _text(value: Any) -> str:
    if type(value) is str:
        return value if value.isascii() else _clean(value)
    if value is None:
        return ""
    if isinstance(value, (dict, list)):
        return _clean(json.dumps(value, sort_keys=True, ensure_ascii=False, separators=(",", ":")))
    # bool, int, float render as JSON literals
    return json.dumps(value)


def _opt_text(value: Any) -> str | None:
    return None if value is None else _text(value)


def _arguments(raw: Any) -> dict[str, str]:
    if raw is None:
        return {}
    if type(raw) is dict:
        return {k if k.isascii() else _clean(k): _text(v) for k, v in raw.items()}
    if isinstance(raw, list):
        out: dict[str, str] = {}
        for item in raw:
            if not isinstance(item, dict) or "name" not in item:
                raise RecordSchemaError("argument list entries need a 'name'")
            out[_text(item["name"])] = _text(item.get("value"))
        return out
    raise RecordSchemaError("arguments must be a map or a list of {name, value}")


def _required(rec: dict, name: str) -> str:
    value = rec.get(name)
    if type(value) is not str or not value.strip():
        raise RecordSchemaError(f"missing or empty field {name!r}")
    return value if value.isascii() else _clean(value)


def _eid(value: Any) -> int | None:
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise RecordSchemaError(f"eid must be a non-negative integer, got {value!r}")
    return value


def _data_map(raw: dict) -> dict[str, str]:
    data = {}
    for k, v in raw.items():
        if type(v) is not str:
            v = _text(v)
        elif not v.isascii():
            v = _clean(v)
        if v and not v.isspace():
            data[k if k.isascii() else _clean(k)] = v
    return data


def _timestamp(value: Any) -> str | None:
    if type(value) is str:
        return value if value.isascii() else _clean(value)
    return _opt_text(value)


def enhanced_event(rec: Any, process_ref: str | None = None) -> LogEvent:
    """Build an enhanced LogEvent from a decoded ``behavior.enhanced`` entry."""
    if type(rec) is not dict:
        raise RecordSchemaError("enhanced entry is not an object")
    obj = _required(rec, "object")
    action = _required(rec, "event")
    raw_data = rec.get("data")
    if not raw_data:
        data = {}
    elif type(raw_data) is dict:
        data = _data_map(raw_data)
    else:
        raise RecordSchemaError("enhanced 'data' must be an object")
    if not data and obj.strip().lower() in DATA_OBJECTS:
        raise RecordSchemaError(f"{obj} entry without data")
    eid = rec.get("eid")
    if eid is not None and (type(eid) is not int or eid < 0):
        _eid(eid)
    return _new_event((
        EventKind.ENHANCED, obj, action, data, _timestamp(rec.get("timestamp")), eid, None, process_ref,
    ))


def api_call_event(rec: Any, process_ref: str | None = None) -> LogEvent:
    """Build an api_call LogEvent from a decoded ``processes[*].calls`` entry."""
    if type(rec) is not dict:
        raise RecordSchemaError("call entry is not an object")
    api = _required(rec, "api")
    category = _required(rec, "category")
    timestamp = rec.get("timestamp", rec.get("time"))
    return _new_event((
        EventKind.API_CALL,
        category,
        api,
        _arguments(rec.get("arguments")),
        _timestamp(timestamp),
        _eid(rec.get("eid")),
        category,
        process_ref,
    ))


def event_from_record(rec: Any) -> LogEvent:
    """Inverse of :meth:`LogEvent.to_record` (line-delimited input)."""
    if not isinstance(rec, dict):
        raise RecordSchemaError("record is not an object")
    kind = rec.get("kind")
    if kind == EventKind.ENHANCED.value:
        ev = enhanced_event(
            {"object": rec.get("object"), "event": rec.get("action"), "data": rec.get("data"),
             "timestamp": rec.get("timestamp"), "eid": rec.get("eid")},
            _opt_text(rec.get("process_ref")),
        )
        return ev
    if kind == EventKind.API_CALL.value:
        category = rec.get("category", rec.get("object"))
        return api_call_event(
            {"api": rec.get("action"), "category": category, "arguments": rec.get("data"),
             "timestamp": rec.get("timestamp"), "eid": rec.get("eid")},
            _opt_text(rec.get("process_ref")),
        )
    raise RecordSchemaError(f"unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# Incremental scanner
# ---------------------------------------------------------------------------

_WS = re.compile(r"[ \t\n\r]*")
_STRUCT = re.compile(r'["\[\]{}]')
_STRING_TAIL = re.compile(r'[^"\\]*(?:\\.[^"\\]*)*"', re.S)
_SCALAR = re.compile(r"[^,\]}\s]*")
_WHITESPACE = " \t\n\r"


class _Scanner:
    """Chunked JSON tokenizer that materializes one value at a time.

    ``_buf[_pos:]`` is the unconsumed text. Consumed text is dropped whenever
    more input is read, so the buffer never holds much more than the value
    currently being decoded plus one chunk.
    """

    def __init__(self, stream: BinaryIO, chunk_size: int):
        self._read = stream.read
        self._chunk = chunk_size
        self._decode = codecs.getincrementaldecoder("utf-8")("surrogateescape").decode
        self._decoder = json.JSONDecoder()
        self._buf = ""
        self._pos = 0
        self._base = 0  # byte offset of _buf[0]
        self._eof = False
        self.digest = hashlib.sha256()

    # -- buffer management ---------------------------------------------------

    def offset(self, index: int | None = None) -> int:
        """Byte offset in the input of buffer index ``index``."""
        if index is None:
            index = self._pos
        return self._base + len(self._buf[:index].encode("utf-8", "surrogateescape"))

    def _fill(self) -> bool:
        if self._eof:
            return False
        raw = self._read(self._chunk)
        if self._pos:
            self._base += len(self._buf[: self._pos].encode("utf-8", "surrogateescape"))
            self._buf = self._buf[self._pos :]
            self._pos = 0
        if not raw:
            self._eof = True
            tail = self._decode(b"", True)
            self._buf += tail
            return bool(tail)
        self.digest.update(raw)
        self._buf += self._decode(raw)
        return True

    def _more(self, index: int, keep: bool) -> int | None:
        """Read more input, returning ``index`` shifted into the new buffer.

        With ``keep`` false everything before ``index`` may be discarded.
        Returns None at end of input.
        """
        if not keep:
            self._pos = index
        rel = index - self._pos
        if not self._fill():
            return None
        return self._pos + rel

    def drain(self) -> None:
        while self._fill():
            self._pos = len(self._buf)

    # -- tokens --------------------------------------------------------------

    def peek(self) -> str:
        """Skip whitespace and return the next character ('' at EOF)."""
        while True:
            buf, pos = self._buf, self._pos
            if pos < len(buf) and buf[pos] not in _WHITESPACE:
                return buf[pos]
            self._pos = _WS.match(buf, pos).end()
            if self._pos < len(buf):
                return buf[self._pos]
            if not self._fill():
                return ""

    def expect(self, ch: str) -> None:
        got = self.peek()
        if got != ch:
            what = repr(got) if got else "end of input"
            raise MalformedInput(f"expected {ch!r}, found {what}", self.offset())
        self._pos += 1

    def take(self, *choices: str) -> str:
        got = self.peek()
        if got not in choices or not got:
            what = repr(got) if got else "end of input"
            raise MalformedInput(f"expected one of {choices}, found {what}", self.offset())
        self._pos += 1
        return got

    def key(self) -> str:
        if self.peek() != '"':
            raise MalformedInput("expected an object key", self.offset())
        k = self.value()
        self.expect(":")
        return k

    def value(self) -> Any:
        """Decode the next complete JSON value."""
        if not self.peek():
            raise MalformedInput("unexpected end of input", self.offset())
        try:
            val, end = self._decoder.raw_decode(self._buf, self._pos)
        except json.JSONDecodeError:
            pass
        else:
            # a number may continue past the buffer end
            if end < len(self._buf) or self._eof:
                self._pos = end
                return val
        end = self._scan(keep=True)
        text = self._buf[self._pos : end]
        try:
            val = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedInput(exc.msg, self.offset(self._pos + exc.pos)) from None
        self._pos = end
        return val

    def skip(self) -> None:
        """Consume the next value without decoding it."""
        if not self.peek():
            raise MalformedInput("unexpected end of input", self.offset())
        self._pos = self._scan(keep=False)

    def _scan(self, keep: bool) -> int:
        """Buffer index just past the value starting at ``_pos``."""
        i = self._pos
        if self._buf[i] not in '{["':
            while True:
                end = _SCALAR.match(self._buf, i).end()
                if end < len(self._buf):
                    if end == i:
                        raise MalformedInput("expected a value", self.offset(i))
                    return end
                j = self._more(i, keep)
                if j is None:
                    return len(self._buf)
                i = j
        depth = 0
        while True:
            m = _STRUCT.search(self._buf, i)
            if m is None:
                j = self._more(len(self._buf), keep)
                if j is None:
                    raise MalformedInput("unexpected end of input", self.offset(len(self._buf)))
                i = j
                continue
            i = m.start()
            c = m.group()
            if c == '"':
                while True:
                    s = _STRING_TAIL.match(self._buf, i + 1)
                    if s is not None:
                        i = s.end()
                        break
                    j = self._more(i, keep)
                    if j is None:
                        raise MalformedInput("unterminated string", self.offset(i))
                    i = j
                if depth == 0:
                    return i
                continue
            depth += 1 if c in "[{" else -1
            if depth < 0:
                raise MalformedInput(f"unbalanced {c!r}", self.offset(i))
            i += 1
            if depth == 0:
                return i

    def items(self) -> Iterator[None]:
        """Step through the elements of an array; caller consumes each one."""
        self.expect("[")
        if self.peek() == "]":
            self._pos += 1
            return
        while True:
            yield None
            if self.take(",", "]") == "]":
                return

    def values(self) -> Iterator[Any]:
        """Decode and yield each element of an array.

        Same result as ``items()`` plus ``value()`` per element, but compact
        arrays take a fast path that decodes straight from the buffer.
        """
        self.expect("[")
        if self.peek() == "]":
            self._pos += 1
            return
        scan = self._decoder.scan_once
        while True:
            buf, pos = self._buf, self._pos
            try:
                val, end = scan(buf, pos)
            except (StopIteration, json.JSONDecodeError):
                end = -1
            if 0 <= end < len(buf):
                c = buf[end]
                if c == ",":
                    self._pos = end + 1
                    yield val
                    continue
                if c == "]":
                    self._pos = end + 1
                    yield val
                    return
                self._pos = end
            else:
                val = self.value()
            yield val
            if self.take(",", "]") == "]":
                return

    def members(self) -> Iterator[str]:
        """Yield each key of an object; caller consumes each value."""
        self.expect("{")
        if self.peek() == "}":
            self._pos += 1
            return
        while True:
            yield self.key()
            if self.take(",", "}") == "}":
                return


# ---------------------------------------------------------------------------
# Readers
# ---------------------------------------------------------------------------


class ReportReader:
    """Iterate the LogEvents of one report; ``meta`` is final once exhausted.

    Iteration is single-pass: iterating again continues from where the
    previous loop stopped. Records that fail the schema are skipped and
    counted rather than aborting the whole report.
    """

    def __init__(self, stream: BinaryIO, options: IngestOptions | None = None, source_path: str = ""):
        self._stream = stream
        self.options = options or IngestOptions()
        self.source_path = source_path
        self._events = 0
        self._skipped = 0
        self._categories: set[str] = set()
        self._digest = None
        self._gen: Iterator[LogEvent] | None = None
        self._done = False

    @property
    def done(self) -> bool:
        return self._done

    @property
    def meta(self) -> ReportMeta:
        return ReportMeta(
            source_path=self.source_path,
            sha_of_input=self._digest.hexdigest() if self._digest is not None else "",
            event_count=self._events,
            skipped_count=self._skipped,
            categories_seen=frozenset(self._categories),
        )

    def __iter__(self) -> Iterator[LogEvent]:
        # every iter() shares one generator, so a consumer that stopped
        # early (say at a cutoff) can pick up where it left off
        if self._gen is None:
            self._gen = self._run()
        return self._gen

    def _run(self) -> Iterator[LogEvent]:
        if self.options.format == "jsonl":
            yield from self._jsonl()
        else:
            yield from self._cuckoo()
        self._done = True

    def finish(self) -> ReportMeta:
        """Read the rest of the input and return the final metadata."""
        for _ in self:
            pass
        return self.meta

    # -- cuckoo --------------------------------------------------------------

    def _cuckoo(self) -> Iterator[LogEvent]:
        sc = _Scanner(self._stream, self.options.chunk_size)
        self._digest = sc.digest
        seen_behavior = False
        if sc.peek() != "{":
            raise MalformedInput("report is not a JSON object", sc.offset())
        for name in sc.members():
            self._categories.add(name)
            if name == "behavior" and sc.peek() == "{":
                seen_behavior = True
                yield from self._behavior(sc)
            else:
                sc.skip()
                self._skipped += 1
        if sc.peek():
            raise MalformedInput("trailing data after report", sc.offset())
        sc.drain()
        if not seen_behavior:
            raise MalformedInput("report has no behavior section", sc.offset())

    def _behavior(self, sc: _Scanner) -> Iterator[LogEvent]:
        for name in sc.members():
            if name == "enhanced" and sc.peek() == "[":
                for rec in sc.values():
                    try:
                        ev = enhanced_event(rec)
                    except RecordSchemaError:
                        self._skipped += 1
                        continue
                    self._events += 1
                    yield ev
            elif name == "processes" and sc.peek() == "[":
                for _ in sc.items():
                    if sc.peek() != "{":
                        sc.skip()
                        self._skipped += 1
                        continue
                    yield from self._process(sc)
            else:
                sc.skip()

    def _process(self, sc: _Scanner) -> Iterator[LogEvent]:
        name = pid = None
        for key in sc.members():
            if key == "calls" and sc.peek() == "[":
                ref = _process_ref(name, pid)
                for rec in sc.values():
                    try:
                        ev = api_call_event(rec, ref)
                    except RecordSchemaError:
                        self._skipped += 1
                        continue
                    self._events += 1
                    yield ev
            elif key in ("process_name", "pid"):
                value = sc.value()
                if key == "pid":
                    pid = value
                else:
                    name = value
            else:
                sc.skip()

    # -- line-delimited --------------------------------------------------------

    def _jsonl(self) -> Iterator[LogEvent]:
        digest = hashlib.sha256()
        self._digest = digest
        self._categories.add("jsonl")
        offset = 0
        for raw in self._stream:
            digest.update(raw)
            start, offset = offset, offset + len(raw)
            line = raw.decode("utf-8", "surrogateescape")
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                at = start + len(line[: exc.pos].encode("utf-8", "surrogateescape"))
                raise MalformedInput(exc.msg, at) from None
            try:
                ev = event_from_record(rec)
            except RecordSchemaError:
                self._skipped += 1
                continue
            self._events += 1
            yield ev


def _process_ref(name: Any, pid: Any) -> str | None:
    if name is None and pid is None:
        return None
    return f"{_text(name)}:{_text(pid)}"


def iter_events(stream: BinaryIO, options: IngestOptions | None = None, source_path: str = "") -> ReportReader:
    """Stream events from a binary stream. See :class:`ReportReader`."""
    return ReportReader(stream, options, source_path)


def parse_report(stream: BinaryIO, options: IngestOptions | None = None, source_path: str = "") -> tuple[list[LogEvent], ReportMeta]:
    """Materializing wrapper around :func:`iter_events`."""
    reader = ReportReader(stream, options, source_path)
    events = list(reader)
    return events, reader.meta


def detect_format(path: str | Path) -> str:
    return "jsonl" if Path(path).suffix.lower() in (".jsonl", ".ndjson") else "cuckoo"


def open_report(path: str | Path, options: IngestOptions | None = None) -> tuple[ReportReader, BinaryIO]:
    """Open ``path`` and return ``(reader, file)``; the caller closes the file.

    Without explicit options the format is picked from the file suffix.
    """
    if options is None:
        options = IngestOptions(format=detect_format(path))
    fh = open(path, "rb")
    return ReportReader(fh, options, str(path)), fh


@lru_cache(maxsize=1024)
def _lower(s: str) -> str:
    return s.strip().lower()


def select_behavior_events(events: Iterable[LogEvent]) -> Iterator[LogEvent]:
    """Keep all enhanced events and registry RegCreateKeyExW calls, in order."""
    for ev in events:
        if ev.kind is EventKind.ENHANCED:
            yield ev
        elif (
            ev.category is not None
            and _lower(ev.category) == "registry"
            and _lower(ev.action) in _REGCREATE_APIS
        ):
            yield ev
