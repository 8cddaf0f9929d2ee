"""Ranking reports and their json / csv / table renderings."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Any

__all__ = ["CSV_HEADER", "FORMATS", "RankingReport", "Tier", "TierFeature", "emit", "iso_utc"]

CSV_HEADER = ("rank", "weight", "count", "df", "tf", "idf", "feature")
FORMATS = ("json", "csv", "table")


def iso_utc(when: datetime | None = None) -> str:
    if when is None:
        when = datetime.now(timezone.utc)
    elif when.tzinfo is None:
        when = when.replace(tzinfo=timezone.utc)
    return when.astimezone(timezone.utc).isoformat(timespec="seconds")


@dataclass
class TierFeature:
    key: str
    count: int
    df: int
    tf: float
    idf: float


@dataclass
class Tier:
    rank: int
    weight: float
    features: list[TierFeature] = field(default_factory=list)


@dataclass
class RankingReport:
    generated_at: str
    config_echo: dict[str, str]
    corpus_summary: dict[str, Any]
    tiers: list[Tier] = field(default_factory=list)

    @property
    def feature_count(self) -> int:
        return sum(len(t.features) for t in self.tiers)

    def rows(self):
        """Yield ``(rank, weight, feature)`` in report order."""
        for tier in self.tiers:
            for feat in tier.features:
                yield tier.rank, tier.weight, feat

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _json(report: RankingReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _csv(report: RankingReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(CSV_HEADER)
    for rank, weight, f in report.rows():
        writer.writerow([rank, repr(weight), f.count, f.df, repr(f.tf), repr(f.idf), f.key])
    return buf.getvalue()


def _table(report: RankingReport) -> str:
    lines = [f"{'rank':>5}  {'weight':>10}  {'count':>7}  {'df':>4}  feature", "-" * 72]
    for tier in report.tiers:
        for i, f in enumerate(tier.features):
            if i == 0:
                head = f"{tier.rank:>5}  {tier.weight:>10.2f}"
            else:
                head = " " * 17
            lines.append(f"{head}  {f.count:>7}  {f.df:>4}  {f.key}")
    return "\n".join(lines) + "\n"


_RENDERERS = {"json": _json, "csv": _csv, "table": _table}


def emit(report: RankingReport, format: str = "table") -> bytes:
    """Render ``report`` as UTF-8 bytes.

    json keeps full float precision with sorted keys; csv follows RFC 4180
    with floats written as their shortest round-trip repr; table rounds
    weights to two decimals.
    """
    try:
        render = _RENDERERS[format]
    except KeyError:
        raise ValueError(f"unknown format {format!r}; expected one of {FORMATS}") from None
    return render(report).encode("utf-8")
