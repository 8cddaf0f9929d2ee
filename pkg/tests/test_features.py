import json
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from footprint.errors import DuplicateSourceId, MalformedInput, MissingDataField, VersionUnsupported
from footprint.features import (
    DEFAULT_CUTOFF,
    NO_CUTOFF,
    CutoffMode,
    CutoffSpec,
    FeatureDocument,
    Label,
    build_document,
    canonicalize,
    dumps_fdoc,
    find_cutoff,
    is_feature_key,
    loads_fdoc,
    merge_documents,
    normalize_text,
)
from footprint.ingest import EventKind, LogEvent

TEMP = "C:\\DOCUME~1\\cuckoo\\LOCALS~1\\Temp"


def enh(obj, action, eid=None, ts=None, **data):
    return LogEvent(EventKind.ENHANCED, obj, action, data, ts, eid)


def call(api="RegCreateKeyExW", **arguments):
    return LogEvent(EventKind.API_CALL, "registry", api, arguments, None, None, "registry")


def write(name, eid=None):
    return enh("file", "write", eid, file=f"{TEMP}\\{name}")


# -- canonical keys ------------------------------------------------------------


def test_registry_create_bigram():
    key = canonicalize(call(regkey_r="Software\\WanaCrypt0r", base_handle="0x80000002"))
    assert key == "bigram:_api=regcreatekeyexw+arguments=software\\wanacrypt0r"


def test_registry_read_key():
    key = canonicalize(enh("registry", "read", 1, regkey="ActiveComputerNameComputerName "))
    assert key == "enhanced:_object=registry+event=read+data=regkey:activecomputernamecomputername"


def test_temp_file_write_key():
    assert canonicalize(write("b.wnry", 3)) == (
        "enhanced:_object=file+event=write+data=file:c:\\docume~1\\cuckoo\\locals~1\\temp\\b.wnry"
    )


def test_multi_field_data_is_sorted_by_name():
    ev = enh("library", "load", pathtofile="C:\\x.dll", file="X.DLL", moduleaddress="0x1")
    assert canonicalize(ev) == "enhanced:_object=library+event=load+data=file:x.dll+moduleaddress:0x1+pathtofile:c:\\x.dll"


def test_interior_whitespace_is_kept():
    ev = enh("file", "execute", file="  icacls . /grant Everyone:F /T /C /Q  ")
    assert canonicalize(ev).endswith("data=file:icacls . /grant everyone:f /t /c /q")


def test_bigram_argument_priority():
    # the subkey wins over the full key path when both are logged
    ev = call(regkey="HKEY_LOCAL_MACHINE\\Software\\X", SubKey="Software\\X")
    assert canonicalize(ev).endswith("arguments=software\\x")
    assert canonicalize(call(regkey="HKLM\\A")).endswith("arguments=hklm\\a")


def test_missing_data_is_rejected():
    with pytest.raises(MissingDataField):
        canonicalize(enh("file", "write"))
    with pytest.raises(MissingDataField):
        canonicalize(enh("file", "write", file="   "))
    with pytest.raises(MissingDataField):
        canonicalize(call(access="0x1"))


def test_control_characters_are_dropped():
    assert canonicalize(enh("file", "write", file="a\x00b\x1fc\x7f")).endswith("file:abc")


_text = st.text(alphabet=st.characters(blacklist_categories=["Cs"]), min_size=1, max_size=20)
_data = st.dictionaries(st.sampled_from(["file", "regkey", "pathtofile", "moduleaddress"]), _text, min_size=1, max_size=3)


def _renderable(ev):
    try:
        return canonicalize(ev)
    except MissingDataField:
        return None


@given(st.sampled_from(["file", "registry", "dir", "Library"]), st.sampled_from(["read", "Write"]), _data)
def test_keys_are_normalizer_fixed_points(obj, action, data):
    key = _renderable(LogEvent(EventKind.ENHANCED, obj, action, data))
    if key is not None:
        assert is_feature_key(key)
        assert normalize_text(key) == key


@given(_data, st.integers(0, 10**6), st.integers(0, 10**6), _text, _text)
def test_time_and_eid_never_change_the_key(data, eid1, eid2, ts1, ts2):
    a = _renderable(LogEvent(EventKind.ENHANCED, "file", "write", data, ts1, eid1))
    b = _renderable(LogEvent(EventKind.ENHANCED, "file", "write", data, ts2, eid2))
    assert a == b


# -- cutoff ----------------------------------------------------------------------


def test_cutoff_at_private_key_write():
    events = [write("00000000.pky"), write("00000000.eky"), write("s.wnry")]
    assert find_cutoff(events, DEFAULT_CUTOFF) == 1


def test_no_cutoff_in_ambient_activity():
    events = [write("notes.txt"), enh("registry", "read", regkey="x")]
    assert find_cutoff(events, DEFAULT_CUTOFF) is None
    assert find_cutoff([write("00000000.eky")], NO_CUTOFF) is None


def test_cutoff_at_first_event_gives_an_empty_document():
    events = [write("00000000.eky"), write("s.wnry")]
    assert find_cutoff(events) == 0
    doc = build_document(events, DEFAULT_CUTOFF, "d", Label.INFECTED)
    assert doc.bag == {} and doc.meta.cutoff_applied and doc.meta.cutoff_index == 0


def test_cutoff_spec_validation():
    with pytest.raises(ValueError):
        CutoffSpec("", CutoffMode.TRUNCATE_AT_FIRST_MATCH)
    assert not CutoffSpec("", "none").active


def test_cutoff_pattern_is_case_insensitive():
    assert find_cutoff([write("x"), write("00000000.EKY")], CutoffSpec("00000000.EKY")) == 1


@given(st.lists(st.sampled_from(["a", "b", "c", "00000000.eky"]), max_size=30), st.data())
def test_cutoff_monotonicity(names, data):
    events = [write(n) for n in names]
    i = data.draw(st.integers(0, len(events)))
    j = data.draw(st.integers(i, len(events)))
    small = build_document(events[:i], NO_CUTOFF)
    large = build_document(events[:j], NO_CUTOFF)
    assert all(large.bag.get(k, 0) >= c for k, c in small.bag.items())


# -- documents -------------------------------------------------------------------


def test_empty_event_stream():
    doc = build_document([], DEFAULT_CUTOFF, "empty")
    assert doc.bag == {} and doc.total == 0 and not doc.meta.cutoff_applied


def test_identical_events_are_counted():
    doc = build_document([write("b.wnry", 3), write("b.wnry", 9)])
    assert list(doc.bag.values()) == [2]


def test_unrenderable_events_are_counted_as_rejected():
    doc = build_document([enh("file", "write"), write("a")])
    assert doc.meta.rejected == 1 and doc.total == 1


def test_build_stops_consuming_at_the_cutoff():
    consumed = []

    def stream():
        for ev in [write("a"), write("00000000.eky"), write("b")]:
            consumed.append(ev)
            yield ev

    doc = build_document(stream())
    assert len(consumed) == 2
    assert doc.meta.cutoff_index == 1


def test_document_rejects_nonpositive_counts():
    with pytest.raises(ValueError):
        FeatureDocument("d", Label.AMBIENT, {"enhanced:_object=x+event=y+data=z:1": 0})


def test_merge_adds_componentwise():
    a = FeatureDocument("a", Label.AMBIENT, {"a": 2})
    b = FeatureDocument("b", Label.INFECTED, {"a": 1, "b": 3})
    merged = merge_documents([a, b], "ab")
    assert merged.bag == {"a": 3, "b": 3}
    assert merged.label is Label.INFECTED


def test_merge_single_document():
    a = FeatureDocument("a", Label.AMBIENT, {"x": 4})
    assert merge_documents([a], "m").bag == a.bag


def test_merge_rejects_repeated_sources():
    a = FeatureDocument("a", Label.AMBIENT, {"x": 1})
    with pytest.raises(DuplicateSourceId):
        merge_documents([a, a], "m")


_bags = st.dictionaries(st.sampled_from("abcdef"), st.integers(1, 20), max_size=6)


@given(st.lists(_bags, min_size=3, max_size=3), st.permutations([0, 1, 2]))
def test_merge_is_commutative_and_associative(bags, order):
    docs = [FeatureDocument(f"d{i}", Label.AMBIENT, b) for i, b in enumerate(bags)]
    flat = merge_documents(docs, "all").bag
    shuffled = [docs[i] for i in order]
    nested = merge_documents([merge_documents(shuffled[:2], "x"), shuffled[2]], "y").bag
    assert flat == nested == dict(sum((Counter(b) for b in bags), Counter()))


# -- .fdoc serialization -----------------------------------------------------------


def test_fdoc_round_trip_and_layout():
    doc = build_document([write("b.wnry"), write("résumé.txt"), write("b.wnry")], id="w", label="infected")
    raw = dumps_fdoc(doc)
    obj = json.loads(raw)
    assert list(obj) == sorted(obj)
    assert obj["format_version"] == 1
    assert list(obj["features"]) == sorted(obj["features"])
    assert "résumé" in raw.decode("utf-8")
    back = loads_fdoc(raw)
    assert back == doc
    assert dumps_fdoc(back) == raw


def test_fdoc_errors():
    with pytest.raises(VersionUnsupported):
        loads_fdoc(b'{"format_version": 2, "id": "x", "label": "ambient", "features": {}, "meta": {}}')
    with pytest.raises(MalformedInput):
        loads_fdoc(b"not json")
    with pytest.raises(MalformedInput):
        loads_fdoc(b'{"format_version": 1}')
