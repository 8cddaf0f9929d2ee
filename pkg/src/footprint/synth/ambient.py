"""Ambient (non-malicious) activity generators.

Each profile produces a stream of raw records from its own invented
vocabulary: Firefox profile and cache files, user documents, mail folders,
flight-search cache entries. None of it overlaps the WannaCry top-ten keys.

A few keys are deliberately shared with the malware footprint and planted by
ambient seed:

* the cryptographic-provider registry read, in seeds 0, 2 and every fourth
  seed from 8 on. Over seeds ``0..n-1`` its document frequency then stays
  between sqrt(N) and N**0.75 for corpora up to a few hundred documents,
  which keeps ``4 * ln(N / df)`` strictly between the count-1 and count-2
  tiers.
* each of the 31 shared system keys, in every seed where
  ``(seed + index) % 3 != 0``. Any two consecutive seeds cover every key,
  so their df is always at least 2.
* Firefox's ``places.sqlite`` write, for Firefox-based profiles, in seeds
  0-3 and in seeds 4-18 not divisible by 3: 14 of the first 21 seeds.
"""

from __future__ import annotations

import hashlib
import random
from typing import Any, Iterator, NamedTuple

from .wannacry import API_CALL, ENHANCED

USER = r"C:\Documents and Settings\cuckoo"
FIREFOX_PROFILE = USER + r"\Application Data\Mozilla\Firefox\Profiles\qk4ev1cw.default"
FIREFOX_CACHE = USER + r"\Local Settings\Application Data\Mozilla\Firefox\Profiles\qk4ev1cw.default\cache2"
THUNDERBIRD_PROFILE = USER + r"\Application Data\Thunderbird\Profiles\x8b2lkq3.default"
MY_DOCUMENTS = USER + r"\My Documents"

PLACES_PATH = FIREFOX_PROFILE + r"\places.sqlite"


class SynthEvent(NamedTuple):
    """One synthetic record in timeline order.

    ``key`` is the feature key the record should canonicalize to, or None for
    API calls that the behavior filter drops.
    """

    kind: str
    key: str | None
    record: dict[str, Any]
    process: str


def render_key(obj: str, event: str, data: dict[str, str]) -> str:
    pairs = sorted((k.lower().strip(), v.lower().strip()) for k, v in data.items())
    rendered = "+".join(f"{k}:{v}" for k, v in pairs)
    return f"enhanced:_object={obj.lower()}+event={event.lower()}+data={rendered}"


def enhanced(obj: str, event: str, process: str, **data: str) -> SynthEvent:
    return SynthEvent(ENHANCED, render_key(obj, event, data), {"object": obj, "event": event, "data": data}, process)


def regcreate(subkey: str, process: str, handle: str = "0x80000001") -> SynthEvent:
    key = f"bigram:_api=regcreatekeyexw+arguments={subkey.lower().strip()}"
    record = {
        "category": "registry",
        "api": "RegCreateKeyExW",
        "arguments": {"base_handle": handle, "regkey_r": subkey, "access": "0x000f003f", "options": 0},
    }
    return SynthEvent(API_CALL, key, record, process)


# filter-dropped calls sprinkled through every timeline
_NOISE_CALLS = (
    ("file", "NtCreateFile", {"file_handle": "0x000001f4", "filepath": "C:\\WINDOWS\\system32\\drivers\\etc\\hosts"}),
    ("file", "NtReadFile", {"file_handle": "0x000001f4", "length": 4096}),
    ("registry", "RegOpenKeyExW", {"base_handle": "0x80000002", "regkey_r": "Software\\Microsoft\\Windows"}),
    ("registry", "RegQueryValueExW", {"key_handle": "0x00000120", "regkey": "ProductName"}),
    ("system", "LdrGetProcedureAddress", {"function_name": "GetTickCount", "module": "kernel32"}),
    ("synchronisation", "NtDelayExecution", {"milliseconds": 50}),
)


def noise_call(rng: random.Random, process: str) -> SynthEvent:
    category, api, args = rng.choice(_NOISE_CALLS)
    return SynthEvent(API_CALL, None, {"category": category, "api": api, "arguments": dict(args)}, process)


# ---------------------------------------------------------------------------
# Planting rules
# ---------------------------------------------------------------------------


def plants_crypto(seed: int) -> bool:
    return seed in (0, 2) or (seed >= 8 and seed % 4 == 0)


def crypto_seeds(n_ambient: int) -> set[int]:
    return {s for s in range(n_ambient) if plants_crypto(s)}


def shared_indices(seed: int, n_shared: int = 31) -> list[int]:
    return [j for j in range(n_shared) if (seed + j) % 3 != 0]


def plants_places(seed: int) -> bool:
    return seed < 4 or (seed < 19 and seed % 3 != 0)


# ---------------------------------------------------------------------------
# Vocabularies
# ---------------------------------------------------------------------------

_SITES = (
    "www.nytimes.com/section/world", "www.bbc.com/news", "en.wikipedia.org/wiki/Special:Random",
    "www.reddit.com/r/python", "twitter.com/home", "www.amazon.com/gp/bestsellers",
    "www.weather.com/today", "stackoverflow.com/questions", "www.espn.com/nfl",
)

_AIRPORTS = (
    "ATL", "LAX", "ORD", "DFW", "DEN", "JFK", "SFO", "SEA", "LAS", "MCO", "EWR", "CLT",
    "PHX", "IAH", "MIA", "BOS", "MSP", "DTW", "FLL", "PHL", "LGA", "BWI", "SLC", "SAN",
    "IAD", "DCA", "MDW", "TPA", "PDX", "HNL", "BNA", "AUS", "SAT", "TYS",
)

_WORDS = (
    "budget", "minutes", "draft", "invoice", "roster", "itinerary", "summary", "notes",
    "proposal", "agenda", "receipt", "schedule", "outline", "report", "letter", "memo",
)

_CONTACTS = ("alice", "bob", "carol", "dave", "erin", "frank", "grace", "heidi", "ivan", "judy")


def _entry_name(url: str, salt: str = "") -> str:
    return hashlib.sha1((url + salt).encode()).hexdigest().upper()


def _firefox_common(rng: random.Random, proc: str) -> Iterator[SynthEvent]:
    yield enhanced("file", "write", proc, file=FIREFOX_PROFILE + r"\sessionstore.js")
    if rng.random() < 0.6:
        yield enhanced("file", "write", proc, file=FIREFOX_PROFILE + r"\cookies.sqlite")
    if rng.random() < 0.3:
        yield enhanced("file", "write", proc, file=FIREFOX_PROFILE + r"\formhistory.sqlite")
    if rng.random() < 0.3:
        yield enhanced(
            "registry", "read", proc,
            regkey="HKEY_CURRENT_USER\\Software\\Microsoft\\Windows\\CurrentVersion\\Internet Settings\\ProxyEnable",
        )


def browsing(rng: random.Random, scale: int) -> Iterator[SynthEvent]:
    proc = "firefox.exe"
    yield regcreate("Software\\Mozilla\\Firefox\\Crash Reporter", proc)
    yield enhanced("file", "read", proc, file=FIREFOX_PROFILE + r"\prefs.js")
    for _ in range(8 * scale):
        if rng.random() < 0.35:
            video = "".join(rng.choice("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-_") for _ in range(11))
            url = f"https://www.youtube.com/watch?v={video}"
            for seg in range(rng.randint(2, 5)):
                yield enhanced("file", "write", proc, file=f"{FIREFOX_CACHE}\\entries\\{_entry_name(url, str(seg))}")
        else:
            url = f"https://{rng.choice(_SITES)}?ref={rng.randrange(1000)}"
        name = _entry_name(url)
        yield enhanced("file", "write", proc, file=f"{FIREFOX_CACHE}\\entries\\{name}")
        if rng.random() < 0.5:
            yield enhanced("file", "read", proc, file=f"{FIREFOX_CACHE}\\entries\\{name}")
        yield from _firefox_common(rng, proc)
        yield noise_call(rng, proc)


def fileio(rng: random.Random, scale: int) -> Iterator[SynthEvent]:
    proc = "python.exe"
    yield enhanced("dir", "create", proc, file=MY_DOCUMENTS + r"\scratch")
    for _ in range(10 * scale):
        name = f"{rng.choice(_WORDS)}_{rng.randrange(200)}.{rng.choice(('txt', 'docx', 'csv'))}"
        path = f"{MY_DOCUMENTS}\\scratch\\{name}"
        yield enhanced("file", "write", proc, file=path)
        for _ in range(rng.randint(0, 3)):
            yield enhanced("file", "read", proc, file=path)
        if rng.random() < 0.4:
            yield enhanced("file", "delete", proc, file=path)
        if rng.random() < 0.2:
            yield enhanced(
                "registry", "read", proc,
                regkey="HKEY_CURRENT_USER\\Software\\Microsoft\\Windows\\CurrentVersion\\Explorer\\RecentDocs",
            )
        yield noise_call(rng, proc)


def email(rng: random.Random, scale: int) -> Iterator[SynthEvent]:
    proc = "thunderbird.exe"
    yield regcreate("Software\\Mozilla\\Thunderbird", proc)
    for _ in range(6 * scale):
        folder = rng.choice(("Inbox", "Sent", "Drafts"))
        yield enhanced("file", "write", proc, file=f"{THUNDERBIRD_PROFILE}\\Mail\\Local Folders\\{folder}")
        yield enhanced("file", "write", proc, file=f"{THUNDERBIRD_PROFILE}\\Mail\\Local Folders\\{folder}.msf")
        if rng.random() < 0.3:
            who = rng.choice(_CONTACTS)
            # non-ASCII attachment names exercise the UTF-8 path
            name = rng.choice(("résumé", "naïve-plan", "ünïcode-notes", "agenda"))
            yield enhanced("file", "write", proc, file=f"{MY_DOCUMENTS}\\attachments\\{who}_{name}.pdf")
        if rng.random() < 0.2:
            yield enhanced("file", "read", proc, file=f"{THUNDERBIRD_PROFILE}\\abook.mab")
        yield noise_call(rng, proc)


def flight_searches(rng: random.Random, n_searches: int, proc: str = "firefox.exe") -> Iterator[SynthEvent]:
    for _ in range(n_searches):
        origin, dest = rng.sample(_AIRPORTS, 2)
        date = f"2017-{rng.randint(6, 12):02d}-{rng.randint(1, 28):02d}"
        url = f"https://www.google.com/flights#flt={origin}.{dest}.{date};c:USD;e:1;sd:1;t:f"
        name = _entry_name(url)
        yield enhanced("file", "write", proc, file=f"{FIREFOX_CACHE}\\entries\\{name}")
        yield enhanced("file", "read", proc, file=f"{FIREFOX_CACHE}\\entries\\{name}")
        yield enhanced("file", "write", proc, file=f"{FIREFOX_PROFILE}\\thumbnails\\{name[:32].lower()}.png")
        if rng.random() < 0.25:
            yield from _firefox_common(rng, proc)
        if rng.random() < 0.5:
            yield noise_call(rng, proc)


FLIGHT_SEARCHES_PER_SCALE = 360


def flights(rng: random.Random, scale: int) -> Iterator[SynthEvent]:
    yield regcreate("Software\\Mozilla\\Firefox\\Crash Reporter", "firefox.exe")
    yield from flight_searches(rng, FLIGHT_SEARCHES_PER_SCALE * scale)


GENERATORS = {
    "ambient_browsing": browsing,
    "ambient_fileio": fileio,
    "ambient_email": email,
    "ambient_flights": flights,
}

PROCESSES = {
    "ambient_browsing": "firefox.exe",
    "ambient_fileio": "python.exe",
    "ambient_email": "thunderbird.exe",
    "ambient_flights": "firefox.exe",
}

FIREFOX_KINDS = frozenset({"ambient_browsing", "ambient_flights"})
