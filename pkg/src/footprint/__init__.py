"""Rank the behavioral footprint of malware in sandbox logs by TF-IDF.

Typical flow: stream a report with :func:`iter_events`, keep the behavior
records with :func:`select_behavior_events`, count their keys with
:func:`build_document`, then :func:`rank_features` against ambient documents.
"""

__version__ = "0.1.0"

from .errors import DataError, FootprintError
from .features import (
    DEFAULT_CUTOFF,
    NO_CUTOFF,
    CutoffMode,
    CutoffSpec,
    DocumentMeta,
    FeatureDocument,
    FeatureKey,
    Label,
    build_document,
    canonicalize,
    dumps_fdoc,
    find_cutoff,
    loads_fdoc,
    merge_documents,
)
from .ingest import (
    EventKind,
    IngestOptions,
    LogEvent,
    ReportMeta,
    iter_events,
    open_report,
    parse_report,
    select_behavior_events,
)
from .ranking import (
    IdfMode,
    LogBase,
    Preset,
    RankedFeature,
    RankingConfig,
    TfMode,
    explain_ranking,
    inverse_document_frequency,
    rank_features,
    term_frequency,
    tfidf_weight,
)
from .report import RankingReport, emit
from .store import CorpusManifest, corpus_add, corpus_list, corpus_load, corpus_remove

__all__ = [
    "CorpusManifest",
    "CutoffMode",
    "CutoffSpec",
    "DEFAULT_CUTOFF",
    "DataError",
    "DocumentMeta",
    "EventKind",
    "FeatureDocument",
    "FeatureKey",
    "FootprintError",
    "IdfMode",
    "IngestOptions",
    "Label",
    "LogBase",
    "LogEvent",
    "NO_CUTOFF",
    "Preset",
    "RankedFeature",
    "RankingConfig",
    "RankingReport",
    "ReportMeta",
    "TfMode",
    "build_document",
    "canonicalize",
    "corpus_add",
    "corpus_list",
    "corpus_load",
    "corpus_remove",
    "dumps_fdoc",
    "emit",
    "explain_ranking",
    "find_cutoff",
    "inverse_document_frequency",
    "iter_events",
    "loads_fdoc",
    "merge_documents",
    "open_report",
    "parse_report",
    "rank_features",
    "select_behavior_events",
    "term_frequency",
    "tfidf_weight",
]
