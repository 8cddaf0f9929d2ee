"""WannaCry behavioral footprint used as a synthetic fixture.

The pre-encryption footprint is 74 distinct keys. 43 of them carry the
published top-ten ranking; their counts are the unique integers ``c`` (with
document frequency ``df``) for which ``round(c * ln(5 / df), 2)`` equals the
published weight, found by exhaustive search over c <= 10**4, df <= 5. The
other 31 are ordinary system activity (library loads, registry reads) that
also shows up in ambient logs, so they always rank below the top ten.

Everything after the write of ``00000000.eky`` is encryption-phase activity
and must never reach a pre-encryption document.
"""

from __future__ import annotations

import random
import string
from dataclasses import dataclass
from typing import Any

TEMP = r"c:\docume~1\cuckoo\locals~1\temp"
RAW_TEMP = r"C:\DOCUME~1\cuckoo\LOCALS~1\Temp"

ENHANCED = "enhanced"
API_CALL = "api_call"

# weights as printed for the ten top tiers (two tiers share 9.66)
PUBLISHED_WEIGHTS = (299.36, 33.80, 24.14, 9.66, 9.66, 8.05, 4.83, 3.22, 2.04, 1.61)

CUTOFF_PATTERN = "00000000.eky"

DEFAULT_UNIQUE_ID = "thsgvkvtwaipdcd971"


@dataclass(frozen=True)
class FixtureEntry:
    """A literal feature key, the raw record that produces it, and its count."""

    key: str
    count: int
    kind: str
    record: dict[str, Any]
    tier: int = 0  # published tier (1-10); 0 for keys outside the top ten


def _enhanced(obj: str, event: str, **data: str) -> dict[str, Any]:
    return {"object": obj, "event": event, "data": data}


def _temp_file(event: str, name: str, count: int, tier: int, raw: str | None = None) -> FixtureEntry:
    raw = name if raw is None else raw
    return FixtureEntry(
        key=f"enhanced:_object=file+event={event}+data=file:{TEMP}\\{name}",
        count=count,
        kind=ENHANCED,
        record=_enhanced("file", event, file=f"{RAW_TEMP}\\{raw}"),
        tier=tier,
    )


def _msg(lang: str, count: int, tier: int) -> FixtureEntry:
    return _temp_file("write", f"msg\\m_{lang}.wnry", count, tier)


# 28 ransom-note languages; four of them sit in tiers 5 and 6
_TIER_5_LANGS = ("korean", "vietnamese")
_TIER_6_LANGS = ("chinese (traditional)", "japanese")
_TIER_7_LANGS = (
    "bulgarian", "chinese (simplified)", "croatian", "czech", "danish", "dutch",
    "english", "filipino", "finnish", "french", "german", "greek", "indonesian",
    "italian", "latvian", "norwegian", "polish", "portuguese", "romanian",
    "russian", "slovak", "spanish", "swedish", "turkish",
)

CRYPTO_PROVIDER_KEY = (
    "enhanced:_object=registry+event=read+data=regkey:hkey_local_machine\\software"
    "\\microsoft\\cryptography\\defaults\\provider\\microsoft enhanced rsa and aes "
    "cryptographic provider (prototype)image path"
)

REGCREATE_KEY = "bigram:_api=regcreatekeyexw+arguments=software\\wanacrypt0r"


def _top_tier_entries() -> list[FixtureEntry]:
    entries = [
        _temp_file("write", "s.wnry", 186, 1),
        _temp_file("write", "b.wnry", 21, 2),
        _temp_file("write", "u.wnry", 15, 3, raw="u.wnry "),
        _temp_file("read", "t.wnry", 6, 4),
    ]
    entries += [_msg(lang, 6, 5) for lang in _TIER_5_LANGS]
    entries += [_msg(lang, 5, 6) for lang in _TIER_6_LANGS]
    entries += [_msg(lang, 3, 7) for lang in _TIER_7_LANGS]
    entries += [
        _temp_file("read", "c.wnry", 2, 8, raw="c.wnry "),
        _temp_file("write", "c.wnry", 2, 8),
        _temp_file("write", "taskdl.exe", 2, 8),
        FixtureEntry(
            "enhanced:_object=registry+event=read+data=regkey:activecomputernamemachineguid",
            2, ENHANCED, _enhanced("registry", "read", regkey="ActiveComputerNameMachineGuid"), 8,
        ),
        FixtureEntry(
            CRYPTO_PROVIDER_KEY,
            4, ENHANCED,
            _enhanced(
                "registry", "read",
                regkey="HKEY_LOCAL_MACHINE\\SOFTWARE\\Microsoft\\Cryptography\\Defaults\\Provider\\"
                "Microsoft Enhanced RSA and AES Cryptographic Provider (Prototype)Image Path",
            ),
            9,
        ),
        FixtureEntry(
            REGCREATE_KEY, 1, API_CALL,
            {
                "category": "registry",
                "api": "RegCreateKeyExW",
                "arguments": {
                    "base_handle": "0x80000002",
                    "regkey_r": "Software\\WanaCrypt0r",
                    "regkey": "HKEY_LOCAL_MACHINE\\Software\\WanaCrypt0r",
                    "access": "0x0002003f",
                    "options": 0,
                },
            },
            10,
        ),
        FixtureEntry(
            f"enhanced:_object=dir+event=create+data=file:{TEMP}\\msg",
            1, ENHANCED, _enhanced("dir", "create", file=f"{RAW_TEMP}\\msg"), 10,
        ),
        FixtureEntry(
            "enhanced:_object=file+event=execute+data=file:attrib +h .",
            1, ENHANCED, _enhanced("file", "execute", file="attrib +h . "), 10,
        ),
        FixtureEntry(
            "enhanced:_object=file+event=execute+data=file:icacls . /grant everyone:f /t /c /q",
            1, ENHANCED, _enhanced("file", "execute", file="icacls . /grant Everyone:F /T /C /Q "), 10,
        ),
        _temp_file("write", "00000000.pky", 1, 10),
        _temp_file("write", "r.wnry", 1, 10),
    ]
    return entries


# ---------------------------------------------------------------------------
# Shared system activity (df >= 2 in any ambient corpus)
# ---------------------------------------------------------------------------

_LIBRARIES = (
    ("advapi32.dll", "0x77dd0000"), ("kernel32.dll", "0x7c800000"), ("user32.dll", "0x7e410000"),
    ("msvcrt.dll", "0x77c10000"), ("ntdll.dll", "0x7c900000"), ("shell32.dll", "0x7c9c0000"),
    ("ole32.dll", "0x774e0000"), ("oleaut32.dll", "0x77120000"), ("ws2_32.dll", "0x71ab0000"),
    ("crypt32.dll", "0x77a80000"), ("rsaenh.dll", "0x68000000"), ("shlwapi.dll", "0x77f60000"),
    ("comctl32.dll", "0x5d090000"), ("gdi32.dll", "0x77f10000"), ("version.dll", "0x77c00000"),
    ("rpcrt4.dll", "0x77e70000"), ("secur32.dll", "0x77fe0000"), ("imm32.dll", "0x76390000"),
    ("wininet.dll", "0x3d930000"), ("iphlpapi.dll", "0x76d60000"),
)

_SYSTEM_REGKEYS = (
    "ActiveComputerNameComputerName",
    "HKEY_LOCAL_MACHINE\\System\\CurrentControlSet\\Control\\Session Manager\\SafeDllSearchMode",
    "HKEY_LOCAL_MACHINE\\Software\\Microsoft\\Windows NT\\CurrentVersion\\GRE_Initialize\\DisableMetaFiles",
    "HKEY_LOCAL_MACHINE\\Software\\Microsoft\\Windows NT\\CurrentVersion\\IMM\\Ime File",
    "HKEY_LOCAL_MACHINE\\Software\\Microsoft\\OLE\\RWLockResourceTimeout",
    "HKEY_LOCAL_MACHINE\\System\\CurrentControlSet\\Control\\Nls\\CustomLocale\\en-US",
    "HKEY_LOCAL_MACHINE\\Software\\Microsoft\\Cryptography\\RNG\\Seed",
    "HKEY_LOCAL_MACHINE\\Software\\Policies\\Microsoft\\Windows\\Safer\\CodeIdentifiers\\TransparentEnabled",
    "HKEY_CURRENT_USER\\Software\\Microsoft\\Windows\\CurrentVersion\\Explorer\\Shell Folders\\AppData",
    "HKEY_LOCAL_MACHINE\\System\\CurrentControlSet\\Services\\Tcpip\\Parameters\\Hostname",
    "HKEY_LOCAL_MACHINE\\Software\\Microsoft\\Windows\\CurrentVersion\\ProgramFilesDir",
)


def _library_entry(name: str, address: str) -> FixtureEntry:
    path = f"C:\\WINDOWS\\system32\\{name}"
    return FixtureEntry(
        key=(
            f"enhanced:_object=library+event=load+data=file:{name}"
            f"+moduleaddress:{address}+pathtofile:{path.lower()}"
        ),
        count=1,
        kind=ENHANCED,
        record=_enhanced("library", "load", file=name.upper(), pathtofile=path, moduleaddress=address),
    )


def _system_read(regkey: str) -> FixtureEntry:
    return FixtureEntry(
        key=f"enhanced:_object=registry+event=read+data=regkey:{regkey.lower()}",
        count=1,
        kind=ENHANCED,
        record=_enhanced("registry", "read", regkey=regkey),
    )


def shared_system_entries() -> list[FixtureEntry]:
    """The 31 pre-encryption keys outside the top ten."""
    return [_library_entry(n, a) for n, a in _LIBRARIES] + [_system_read(k) for k in _SYSTEM_REGKEYS]


TOP_TIER_ENTRIES: tuple[FixtureEntry, ...] = tuple(_top_tier_entries())
SHARED_ENTRIES: tuple[FixtureEntry, ...] = tuple(shared_system_entries())
PRE_ENCRYPTION_ENTRIES: tuple[FixtureEntry, ...] = TOP_TIER_ENTRIES + SHARED_ENTRIES

TOP_TIER_KEYS: tuple[str, ...] = tuple(e.key for e in TOP_TIER_ENTRIES)

CUTOFF_ENTRY = _temp_file("write", "00000000.eky", 1, 0)


def published_tiers() -> list[list[str]]:
    """Top-ten keys grouped by published tier, 1 through 10."""
    tiers: list[list[str]] = [[] for _ in range(10)]
    for e in TOP_TIER_ENTRIES:
        tiers[e.tier - 1].append(e.key)
    return tiers


# ---------------------------------------------------------------------------
# Encryption phase
# ---------------------------------------------------------------------------


def unique_identifier(seed: int) -> str:
    """Machine identifier: 8-15 lowercase letters followed by three digits."""
    if seed == 0:
        return DEFAULT_UNIQUE_ID
    rng = random.Random(f"wannacry-uid:{seed}")
    letters = "".join(rng.choice(string.ascii_lowercase) for _ in range(rng.randint(8, 15)))
    return letters + "".join(rng.choice(string.digits) for _ in range(3))


def encryption_entries(seed: int) -> list[FixtureEntry]:
    """Post-cutoff activity for one run (identifier and temp names vary by seed)."""
    rng = random.Random(f"wannacry-post:{seed}")
    uid = unique_identifier(seed)
    desktop = r"C:\DOCUME~1\cuckoo\Desktop"
    docs = r"C:\DOCUME~1\cuckoo\My Documents"
    run_cmd = (
        "cmd.exe /c reg add HKLM\\SOFTWARE\\Microsoft\\Windows\\CurrentVersion\\Run "
        f'/v "{uid}" /t REG_SZ /d "\\"{RAW_TEMP}\\tasksche.exe\\"" /f'
    )

    def enh(obj: str, event: str, count: int, **data: str) -> FixtureEntry:
        rendered = "+".join(f"{k.lower()}:{v.lower().strip()}" for k, v in sorted(data.items()))
        return FixtureEntry(
            f"enhanced:_object={obj}+event={event}+data={rendered}", count, ENHANCED,
            _enhanced(obj, event, **data),
        )

    out = [
        enh("file", "write", rng.randint(2, 6), file=f"{RAW_TEMP}\\00000000.res"),
        enh("file", "execute", rng.randint(2, 5), file="taskdl.exe"),
        enh("file", "write", 1, file=f"{RAW_TEMP}\\@WanaDecryptor@.exe"),
        enh("file", "execute", 1, file=f"taskse.exe {RAW_TEMP}\\@WanaDecryptor@.exe"),
        enh("file", "execute", 1, file=run_cmd),
        enh("registry", "write", 1,
            regkey=f"HKEY_LOCAL_MACHINE\\SOFTWARE\\Microsoft\\Windows\\CurrentVersion\\Run\\{uid}"),
        enh("file", "write", 1, file=f"{desktop}\\@WanaDecryptor@.txt"),
        enh("file", "write", 1, file=f"{desktop}\\!WannaCryptor!.bmp"),
        enh("file", "execute", 1, file="taskkill.exe /f /im mysqld.exe"),
    ]
    for _ in range(rng.randint(2, 5)):
        tmp = f"{RAW_TEMP}\\~SD{rng.getrandbits(16):04X}.tmp"
        out.append(enh("file", "write", 1, file=tmp))
        out.append(enh("file", "delete", 1, file=tmp))
    for name in rng.sample(["report.docx", "budget.xlsx", "notes.txt", "photo.jpg", "thesis.pdf", "plan.pptx"], 3):
        out.append(enh("file", "write", 1, file=f"{docs}\\{name}.WNCRYT"))
        out.append(enh("file", "write", 1, file=f"{docs}\\{name}.WNCRY"))
    return out


@dataclass(frozen=True)
class WannaCryFixture:
    pre_encryption_keys: tuple[tuple[str, int], ...]
    cutoff_marker: str
    post_encryption_keys: tuple[tuple[str, int], ...]
    shared_keys: tuple[tuple[str, tuple[int, ...]], ...]


def wannacry_fixture(seed: int = 0, n_ambient: int = 4) -> WannaCryFixture:
    """Fixture summary; ``shared_keys`` lists which ambient seeds carry each df>1 key."""
    from .ambient import crypto_seeds, shared_indices

    shared = [(CRYPTO_PROVIDER_KEY, tuple(sorted(crypto_seeds(n_ambient))))]
    for j, e in enumerate(SHARED_ENTRIES):
        shared.append((e.key, tuple(s for s in range(n_ambient) if j in shared_indices(s))))
    return WannaCryFixture(
        pre_encryption_keys=tuple((e.key, e.count) for e in PRE_ENCRYPTION_ENTRIES),
        cutoff_marker=CUTOFF_ENTRY.key,
        post_encryption_keys=tuple((e.key, e.count) for e in encryption_entries(seed)),
        shared_keys=tuple(shared),
    )
