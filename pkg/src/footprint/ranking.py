"""TF-IDF ranking of the infected document's features against a corpus.

Two weighting conventions are provided as presets:

``paper_consistent``
    raw count x ln(N / df). Reproduces published weight tables such as
    299.36 = 186 ln 5.
``paper_stated``
    count / document length x ln(N / (1 + df)). Length normalization keeps
    tf <= 1, so weights stay below ln(N / 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import Sequence

from .errors import CorpusTooSmall, DomainError, DuplicateDocId, EmptyDocument, UnknownInfectedId
from .features import FeatureDocument
from .report import RankingReport, Tier, TierFeature, iso_utc

__all__ = [
    "IdfMode",
    "LogBase",
    "Preset",
    "RankedFeature",
    "RankingConfig",
    "TfMode",
    "explain_ranking",
    "inverse_document_frequency",
    "rank_features",
    "term_frequency",
    "tfidf_weight",
]


class TfMode(str, Enum):
    RAW_COUNT = "raw_count"
    LENGTH_NORMALIZED = "length_normalized"


class IdfMode(str, Enum):
    UNSMOOTHED = "unsmoothed"  # log(N / df)
    PLUS_ONE_SMOOTHED = "plus_one_smoothed"  # log(N / (1 + df))


class LogBase(str, Enum):
    NATURAL = "natural"
    BASE10 = "base10"


class Preset(str, Enum):
    PAPER_CONSISTENT = "paper_consistent"
    PAPER_STATED = "paper_stated"
    CUSTOM = "custom"


_PRESETS = {
    Preset.PAPER_CONSISTENT: (TfMode.RAW_COUNT, IdfMode.UNSMOOTHED, LogBase.NATURAL),
    Preset.PAPER_STATED: (TfMode.LENGTH_NORMALIZED, IdfMode.PLUS_ONE_SMOOTHED, LogBase.NATURAL),
}


@dataclass(frozen=True)
class RankingConfig:
    """Weighting configuration.

    A non-custom preset fills in all three modes; passing a mode that
    contradicts the preset is an error. With ``preset=CUSTOM`` any mode left
    as None falls back to the raw-count, unsmoothed, natural-log choice.
    """

    preset: Preset = Preset.PAPER_CONSISTENT
    tf_mode: TfMode | None = None
    idf_mode: IdfMode | None = None
    log_base: LogBase | None = None

    def __post_init__(self):
        preset = Preset(self.preset)
        given = (
            None if self.tf_mode is None else TfMode(self.tf_mode),
            None if self.idf_mode is None else IdfMode(self.idf_mode),
            None if self.log_base is None else LogBase(self.log_base),
        )
        defaults = _PRESETS.get(preset, _PRESETS[Preset.PAPER_CONSISTENT])
        if preset is not Preset.CUSTOM:
            for value, forced in zip(given, defaults):
                if value is not None and value is not forced:
                    raise ValueError(f"preset {preset.value} fixes {type(forced).__name__} to {forced.value}")
        resolved = [d if v is None else v for v, d in zip(given, defaults)]
        object.__setattr__(self, "preset", preset)
        object.__setattr__(self, "tf_mode", resolved[0])
        object.__setattr__(self, "idf_mode", resolved[1])
        object.__setattr__(self, "log_base", resolved[2])

    @classmethod
    def paper_consistent(cls) -> "RankingConfig":
        return cls(Preset.PAPER_CONSISTENT)

    @classmethod
    def paper_stated(cls) -> "RankingConfig":
        return cls(Preset.PAPER_STATED)

    def to_dict(self) -> dict[str, str]:
        return {
            "preset": self.preset.value,
            "tf_mode": self.tf_mode.value,
            "idf_mode": self.idf_mode.value,
            "log_base": self.log_base.value,
            "tie_policy": "lexicographic-within-tie",
        }


@dataclass(frozen=True)
class RankedFeature:
    key: str
    count: int
    df: int
    tf: float
    idf: float
    weight: float
    rank: int


def _log(x: float, base: LogBase) -> float:
    return math.log10(x) if base is LogBase.BASE10 else math.log(x)


def term_frequency(count: int, doc_total: int, mode: TfMode = TfMode.RAW_COUNT) -> float:
    if count < 0 or doc_total < count:
        raise DomainError(f"need 0 <= count <= doc_total, got count={count}, doc_total={doc_total}")
    if TfMode(mode) is TfMode.RAW_COUNT:
        return float(count)
    if doc_total == 0:
        raise EmptyDocument("length-normalized tf of an empty document")
    return count / doc_total


def inverse_document_frequency(
    df: int,
    n_docs: int,
    mode: IdfMode = IdfMode.UNSMOOTHED,
    base: LogBase = LogBase.NATURAL,
) -> float:
    if n_docs < 1 or not 1 <= df <= n_docs:
        raise DomainError(f"need 1 <= df <= n_docs, got df={df}, n_docs={n_docs}")
    denom = df if IdfMode(mode) is IdfMode.UNSMOOTHED else 1 + df
    return _log(n_docs / denom, LogBase(base))


def tfidf_weight(count: int, doc_total: int, df: int, n_docs: int, config: RankingConfig) -> float:
    tf = term_frequency(count, doc_total, config.tf_mode)
    return tf * inverse_document_frequency(df, n_docs, config.idf_mode, config.log_base)


def rank_features(
    corpus: Sequence[FeatureDocument],
    infected_id: str,
    config: RankingConfig | None = None,
) -> list[RankedFeature]:
    """Rank every key of the infected document by TF-IDF weight.

    Document frequency counts all corpus documents, the infected one
    included. Order is weight descending, then key ascending; equal weights
    share a rank and the next rank skips by the size of the tie.
    """
    config = config or RankingConfig()
    ids = [d.id for d in corpus]
    if len(set(ids)) != len(ids):
        dup = next(i for i in ids if ids.count(i) > 1)
        raise DuplicateDocId(f"document id {dup!r} appears more than once in the corpus")
    infected = next((d for d in corpus if d.id == infected_id), None)
    if infected is None:
        raise UnknownInfectedId(f"no document with id {infected_id!r} in the corpus")
    n_docs = len(corpus)
    if n_docs < 2:
        raise CorpusTooSmall(f"ranking needs at least 2 documents, corpus has {n_docs}")

    df = dict.fromkeys(infected.bag, 0)
    for doc in corpus:
        bag = doc.bag
        if len(bag) < len(df):
            for key in bag:
                if key in df:
                    df[key] += 1
        else:
            for key in df:
                if key in bag:
                    df[key] += 1

    total = infected.total
    rows = []
    for key, count in infected.bag.items():
        tf = term_frequency(count, total, config.tf_mode)
        idf = inverse_document_frequency(df[key], n_docs, config.idf_mode, config.log_base)
        rows.append((key, count, df[key], tf, idf, tf * idf))
    rows.sort(key=lambda r: (-r[5], r[0]))

    ranked: list[RankedFeature] = []
    rank = 0
    prev = None
    for position, (key, count, d, tf, idf, weight) in enumerate(rows, start=1):
        if weight != prev:
            rank, prev = position, weight
        ranked.append(RankedFeature(key, count, d, tf, idf, weight, rank))
    return ranked


def explain_ranking(
    ranked: Sequence[RankedFeature],
    top_k: int,
    *,
    config: RankingConfig | None = None,
    n_docs: int | None = None,
    infected_id: str | None = None,
    generated_at: datetime | str | None = None,
) -> RankingReport:
    """Group the first ``top_k`` rank tiers into a :class:`RankingReport`."""
    if top_k < 1:
        raise ValueError("top_k must be at least 1")
    tiers: list[Tier] = []
    for feat in ranked:
        if not tiers or tiers[-1].rank != feat.rank:
            if len(tiers) == top_k:
                break
            tiers.append(Tier(feat.rank, feat.weight, []))
        tiers[-1].features.append(TierFeature(feat.key, feat.count, feat.df, feat.tf, feat.idf))
    for tier in tiers:
        tier.features.sort(key=lambda f: f.key)
    if isinstance(generated_at, datetime) or generated_at is None:
        generated_at = iso_utc(generated_at)
    return RankingReport(
        generated_at=generated_at,
        config_echo=(config or RankingConfig()).to_dict(),
        corpus_summary={"n_docs": n_docs, "infected_id": infected_id},
        tiers=tiers,
    )
