"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 input or data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Sequence, TextIO

from . import __version__
from .errors import DataError, DuplicateDocId, IoFailure, MissingFile, UnknownDocId
from .features import DEFAULT_CUTOFF, NO_CUTOFF, CutoffSpec, FeatureDocument, build_document, dumps_fdoc, loads_fdoc, merge_documents
from .ingest import open_report, select_behavior_events
from .ranking import IdfMode, LogBase, Preset, RankingConfig, TfMode, explain_ranking, rank_features
from .report import FORMATS, emit
from .store import corpus_add, corpus_list, corpus_load, corpus_remove

CORPUS_ENV = "FOOTPRINT_CORPUS"
FIXED_CLOCK = "1970-01-01T00:00:00+00:00"

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

_PRESETS = {"paper-consistent": Preset.PAPER_CONSISTENT, "paper-stated": Preset.PAPER_STATED}
_TF = {"raw": TfMode.RAW_COUNT, "normalized": TfMode.LENGTH_NORMALIZED}
_IDF = {"unsmoothed": IdfMode.UNSMOOTHED, "smoothed": IdfMode.PLUS_ONE_SMOOTHED}
_LOG = {"e": LogBase.NATURAL, "10": LogBase.BASE10}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")

    def exit(self, status=0, message=None):
        # --help lands here; anything else is routed through error()
        if message:
            self._print_message(message, sys.stderr)
        raise SystemExit(status)


def _build_parser() -> _Parser:
    parser = _Parser(prog="footprint", description="Rank malware behavior features in sandbox logs by TF-IDF.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="turn a sandbox report into a feature document")
    p.add_argument("report", help="Cuckoo JSON report, or .jsonl/.ndjson records")
    p.add_argument("--out", required=True, help="output .fdoc path")
    p.add_argument("--id", dest="doc_id", help="document id (default: report file stem)")
    p.add_argument("--label", choices=("infected", "ambient"), default="ambient")
    cut = p.add_mutually_exclusive_group()
    cut.add_argument("--cutoff-pattern", metavar="P", help=f"truncate at the first key containing P (default {DEFAULT_CUTOFF.pattern})")
    cut.add_argument("--no-cutoff", action="store_true", help="keep every event")

    p = sub.add_parser("corpus-add", help="store a feature document in a corpus")
    p.add_argument("paths", nargs="+", metavar="[corpus-dir] doc.fdoc")

    p = sub.add_parser("corpus-list", help="list corpus documents")
    p.add_argument("corpus", nargs="?", metavar="corpus-dir")

    p = sub.add_parser("corpus-rm", help="remove a document from a corpus")
    p.add_argument("args", nargs="+", metavar="[corpus-dir] id")

    p = sub.add_parser("rank", help="rank the infected document's features")
    p.add_argument("--infected", action="append", required=True, metavar="DOC", help=".fdoc path or corpus id; repeat to merge")
    p.add_argument("--corpus", metavar="DIR", help=f"corpus directory (default ${CORPUS_ENV})")
    p.add_argument("--preset", choices=sorted(_PRESETS))
    p.add_argument("--tf", choices=sorted(_TF))
    p.add_argument("--idf", choices=sorted(_IDF))
    p.add_argument("--log-base", choices=sorted(_LOG))
    p.add_argument("--top", type=_positive, default=10, metavar="K", help="number of rank tiers (default 10)")
    p.add_argument("--format", choices=FORMATS, default="table")
    p.add_argument("--out", metavar="PATH", help="write here instead of stdout")
    p.add_argument("--fixed-clock", nargs="?", const=FIXED_CLOCK, metavar="ISO",
                   help="stamp the report with a fixed time for reproducible output")

    p = sub.add_parser("synth", help="generate a synthetic document or report")
    p.add_argument("--profile", required=True, type=_profile)
    p.add_argument("--seed", required=True, type=_seed)
    p.add_argument("--scale", type=_positive, default=1)
    p.add_argument("--emit", required=True, choices=("fdoc", "report"))
    p.add_argument("--out", required=True, metavar="PATH", help="output path, or - for stdout")

    sub.add_parser("version", help="print the version")
    return parser


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("must be an unsigned 64-bit integer")
    return value


def _profile(text: str):
    from .synth import SynthKind

    try:
        return SynthKind(text.replace("-", "_"))
    except ValueError:
        names = ", ".join(k.value for k in SynthKind)
        raise argparse.ArgumentTypeError(f"unknown profile {text!r} (choose from {names})") from None


# ---------------------------------------------------------------------------


class _Context:
    def __init__(self, stdout: TextIO, stderr: TextIO, clock: Callable[[], datetime]):
        self.stdout = stdout
        self.stderr = stderr
        self.clock = clock

    def say(self, text: str) -> None:
        print(text, file=self.stdout)

    def write_bytes(self, data: bytes) -> None:
        buffer = getattr(self.stdout, "buffer", None)
        if buffer is not None:
            self.stdout.flush()
            buffer.write(data)
            buffer.flush()
        else:
            self.stdout.write(data.decode("utf-8"))


def _read_bytes(path: str | Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except FileNotFoundError:
        raise MissingFile(f"no such file: {path}") from None
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def _write_file(path: str | Path, data: bytes) -> None:
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _corpus_dir(given: str | None) -> Path:
    if given:
        return Path(given)
    env = os.environ.get(CORPUS_ENV)
    if env:
        return Path(env)
    raise UsageError(f"no corpus directory given and ${CORPUS_ENV} is not set")


def _split_corpus(args: list[str], what: str) -> tuple[Path, str]:
    if len(args) == 2:
        return Path(args[0]), args[1]
    if len(args) == 1:
        return _corpus_dir(None), args[0]
    raise UsageError(f"expected [corpus-dir] {what}")


def _cmd_ingest(args, ctx: _Context) -> int:
    if args.no_cutoff:
        spec = NO_CUTOFF
    elif args.cutoff_pattern is not None:
        if not args.cutoff_pattern:
            raise UsageError("--cutoff-pattern must not be empty")
        spec = CutoffSpec(args.cutoff_pattern)
    else:
        spec = DEFAULT_CUTOFF
    try:
        reader, fh = open_report(args.report)
    except FileNotFoundError:
        raise MissingFile(f"no such file: {args.report}") from None
    except OSError as exc:
        raise IoFailure(f"cannot read {args.report}: {exc}") from exc
    with fh:
        doc = build_document(
            select_behavior_events(reader),
            spec,
            id=args.doc_id or Path(args.report).stem,
            label=args.label,
            source_ids=(args.report,),
        )
        # build_document stops at the cutoff; the digest and counts should
        # still cover the whole report
        meta = reader.finish()
    _write_file(args.out, dumps_fdoc(doc))
    cut = f", cutoff at eid {doc.meta.cutoff_eid}" if doc.meta.cutoff_applied else ""
    ctx.say(
        f"{args.out}: {len(doc)} features from {meta.event_count} events "
        f"({meta.skipped_count} skipped{cut}); sha256 {meta.sha_of_input}"
    )
    return EXIT_OK


def _cmd_corpus_add(args, ctx: _Context) -> int:
    root, path = _split_corpus(args.paths, "doc.fdoc")
    doc = loads_fdoc(_read_bytes(path))
    manifest = corpus_add(root, doc, now=ctx.clock())
    ctx.say(f"added {doc.id} ({doc.label.value}, {len(doc)} features); corpus now holds {manifest.count}")
    return EXIT_OK


def _cmd_corpus_list(args, ctx: _Context) -> int:
    manifest = corpus_list(_corpus_dir(args.corpus))
    ctx.say(f"corpus {manifest.name}: {manifest.count} documents")
    for e in manifest.entries:
        ctx.say(f"{e.doc_id}\t{e.label}\t{e.digest[:16]}\t{e.added_at}")
    return EXIT_OK


def _cmd_corpus_rm(args, ctx: _Context) -> int:
    root, doc_id = _split_corpus(args.args, "id")
    manifest = corpus_remove(root, doc_id)
    ctx.say(f"removed {doc_id}; corpus now holds {manifest.count}")
    return EXIT_OK


def _config(args) -> RankingConfig:
    modes = dict(
        tf_mode=_TF.get(args.tf),
        idf_mode=_IDF.get(args.idf),
        log_base=_LOG.get(args.log_base),
    )
    if args.preset is None:
        preset = Preset.CUSTOM if any(v is not None for v in modes.values()) else Preset.PAPER_CONSISTENT
    else:
        preset = _PRESETS[args.preset]
    try:
        return RankingConfig(preset, **modes)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _resolve_infected(refs: list[str], corpus: list[FeatureDocument]) -> tuple[FeatureDocument, list[FeatureDocument]]:
    """Return the (merged) infected document and the remaining corpus."""
    by_id = {d.id: d for d in corpus}
    picked: list[FeatureDocument] = []
    for ref in refs:
        if Path(ref).is_file():
            doc = loads_fdoc(_read_bytes(ref))
            known = by_id.get(doc.id)
            if known is not None and known.bag != doc.bag:
                raise DuplicateDocId(f"{ref} has id {doc.id!r}, which names a different document in the corpus")
        elif ref in by_id:
            doc = by_id[ref]
        else:
            raise UnknownDocId(f"{ref!r} is neither a readable .fdoc file nor a document id in the corpus")
        picked.append(doc)
    used = {d.id for d in picked}
    rest = [d for d in corpus if d.id not in used]
    if len(picked) == 1:
        return picked[0], rest
    return merge_documents(picked, "+".join(d.id for d in picked)), rest


def _cmd_rank(args, ctx: _Context) -> int:
    config = _config(args)
    if args.fixed_clock is not None:
        try:
            when = datetime.fromisoformat(args.fixed_clock)
        except ValueError:
            raise UsageError(f"--fixed-clock: not an ISO-8601 time: {args.fixed_clock!r}") from None
    else:
        when = None
    corpus = corpus_load(_corpus_dir(args.corpus))
    infected, rest = _resolve_infected(args.infected, corpus)
    docs = [infected] + rest
    ranked = rank_features(docs, infected.id, config)
    if when is None:
        when = ctx.clock()
    report = explain_ranking(
        ranked, args.top, config=config, n_docs=len(docs), infected_id=infected.id, generated_at=when,
    )
    data = emit(report, args.format)
    if args.out:
        _write_file(args.out, data)
    else:
        ctx.write_bytes(data)
    return EXIT_OK


def _cmd_synth(args, ctx: _Context) -> int:
    from .synth import Emit, SynthProfile, generate_document, write_report

    emit_kind = Emit.FDOC if args.emit == "fdoc" else Emit.FULL_REPORT
    profile = SynthProfile(args.profile, args.seed, args.scale, emit_kind)
    if emit_kind is Emit.FDOC:
        data = dumps_fdoc(generate_document(profile))
        if args.out == "-":
            ctx.write_bytes(data)
        else:
            _write_file(args.out, data)
        return EXIT_OK
    if args.out == "-":
        buffer = getattr(ctx.stdout, "buffer", None)
        if buffer is None:
            import io

            buf = io.BytesIO()
            write_report(profile, buf)
            ctx.write_bytes(buf.getvalue())
        else:
            ctx.stdout.flush()
            write_report(profile, buffer)
            buffer.flush()
        return EXIT_OK
    try:
        with open(args.out, "wb") as fh:
            write_report(profile, fh)
    except OSError as exc:
        raise IoFailure(f"cannot write {args.out}: {exc}") from exc
    return EXIT_OK


def _cmd_version(args, ctx: _Context) -> int:
    ctx.say(f"footprint {__version__}")
    return EXIT_OK


_COMMANDS = {
    "ingest": _cmd_ingest,
    "corpus-add": _cmd_corpus_add,
    "corpus-list": _cmd_corpus_list,
    "corpus-rm": _cmd_corpus_rm,
    "rank": _cmd_rank,
    "synth": _cmd_synth,
    "version": _cmd_version,
}


def _utc_now() -> datetime:
    return datetime.now(timezone.utc)


def run(
    argv: Sequence[str],
    stdin: TextIO | None = None,
    stdout: TextIO | None = None,
    stderr: TextIO | None = None,
    clock: Callable[[], datetime] = _utc_now,
) -> int:
    """Run one command and return its exit code. Never raises."""
    stdout = stdout if stdout is not None else sys.stdout
    stderr = stderr if stderr is not None else sys.stderr
    ctx = _Context(stdout, stderr, clock)
    try:
        args = _build_parser().parse_args(list(argv))
        return _COMMANDS[args.command](args, ctx)
    except UsageError as exc:
        print(f"usage error: {exc}", file=stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # argparse --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    except DataError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to exit 3
        print(f"internal error: {type(exc).__name__}: {exc}", file=stderr)
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run(sys.argv[1:]))
