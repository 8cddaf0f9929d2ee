import io
import json

import pytest

import footprint.cli as cli
from footprint import errors
from footprint.features import loads_fdoc
from footprint.synth import TOP_TIER_KEYS


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.run(list(map(str, argv)), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """An infected .fdoc from a synthetic report plus a 4-document ambient corpus."""
    root = tmp_path_factory.mktemp("cli")
    assert run("synth", "--profile", "wannacry", "--seed", 0, "--emit", "report", "--out", root / "w.json")[0] == 0
    code, out, _ = run("ingest", root / "w.json", "--out", root / "w.fdoc", "--label", "infected")
    assert code == 0, out
    kinds = ["ambient-browsing", "ambient-fileio", "ambient-email", "ambient-flights"]
    for seed, kind in enumerate(kinds):
        fdoc = root / f"{kind}.fdoc"
        assert run("synth", "--profile", kind, "--seed", seed, "--emit", "fdoc", "--out", fdoc)[0] == 0
        assert run("corpus-add", root / "amb4", fdoc)[0] == 0
    return root


def test_ingest_reports_74_features(workspace):
    doc = loads_fdoc((workspace / "w.fdoc").read_bytes())
    assert len(doc) == 74 and doc.label.value == "infected" and doc.id == "w"


def test_rank_table(workspace):
    code, out, err = run("rank", "--infected", workspace / "w.fdoc", "--corpus", workspace / "amb4",
                         "--preset", "paper-consistent", "--top", 9, "--format", "table")
    assert code == 0, err
    # continuation rows of a tier leave the rank and weight columns blank
    weights = [line.split()[1] for line in out.splitlines()[2:] if not line.startswith(" " * 6)]
    assert weights == ["299.36", "33.80", "24.14", "9.66", "8.05", "4.83", "3.22", "2.04", "1.61"]


def test_top_ten_adds_one_more_tier(workspace):
    code, out, _ = run("rank", "--infected", workspace / "w.fdoc", "--corpus", workspace / "amb4",
                       "--top", 10, "--format", "json", "--fixed-clock")
    tiers = json.loads(out)["tiers"]
    assert code == 0 and len(tiers) == 10
    assert {f["key"] for t in tiers[:9] for f in t["features"]} == set(TOP_TIER_KEYS)


def test_json_with_fixed_clock_is_byte_stable(workspace):
    argv = ["rank", "--infected", workspace / "w.fdoc", "--corpus", workspace / "amb4", "--format", "json", "--fixed-clock"]
    first, second = run(*argv), run(*argv)
    assert first[0] == 0 and first[1] == second[1]
    assert json.loads(first[1])["generated_at"] == cli.FIXED_CLOCK


def test_rank_writes_to_a_file(workspace, tmp_path):
    out = tmp_path / "r.csv"
    code, stdout, _ = run("rank", "--infected", workspace / "w.fdoc", "--corpus", workspace / "amb4",
                          "--format", "csv", "--out", out)
    assert code == 0 and stdout == ""
    assert out.read_text().startswith("rank,weight")


def test_infected_by_id_and_corpus_from_env(workspace, tmp_path, monkeypatch):
    corpus = tmp_path / "c"
    for fdoc in sorted(workspace.glob("*.fdoc")):
        assert run("corpus-add", corpus, fdoc)[0] == 0
    monkeypatch.setenv(cli.CORPUS_ENV, str(corpus))
    code, out, _ = run("corpus-list")
    assert code == 0 and "5 documents" in out
    by_id = run("rank", "--infected", "w", "--format", "json", "--fixed-clock")
    by_file = run("rank", "--infected", workspace / "w.fdoc", "--corpus", workspace / "amb4", "--format", "json", "--fixed-clock")
    assert by_id[0] == 0 and by_id[1] == by_file[1]
    assert run("corpus-rm", "ambient_email-2")[0] == 0
    assert "4 documents" in run("corpus-list")[1]


def test_multiple_infected_are_merged(workspace, tmp_path):
    corpus = tmp_path / "c"
    for fdoc in sorted(workspace.glob("ambient-*.fdoc")):
        run("corpus-add", corpus, fdoc)
    code, out, err = run("rank", "--infected", "ambient_email-2", "--infected", "ambient_fileio-1",
                         "--corpus", corpus, "--format", "json", "--fixed-clock")
    assert code == 0, err
    report = json.loads(out)
    assert report["corpus_summary"] == {"n_docs": 3, "infected_id": "ambient_email-2+ambient_fileio-1"}


def test_single_document_corpus_is_too_small(workspace, tmp_path):
    run("corpus-add", tmp_path / "one", workspace / "ambient-email.fdoc")
    code, _, err = run("rank", "--infected", "ambient_email-2", "--corpus", tmp_path / "one")
    assert code == 2 and "CorpusTooSmall" in err


def test_infected_file_is_added_for_counting(workspace, tmp_path):
    run("corpus-add", tmp_path / "one", workspace / "ambient-email.fdoc")
    code, out, _ = run("rank", "--infected", workspace / "w.fdoc", "--corpus", tmp_path / "one",
                       "--format", "json", "--fixed-clock")
    assert code == 0 and json.loads(out)["corpus_summary"]["n_docs"] == 2


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["rank", "--infected", "x", "--corpus", "c", "--bogus"],
        ["rank", "--infected", "x", "--corpus", "c", "--top", "0"],
        ["rank", "--infected", "x", "--corpus", "c", "--preset", "paper-stated", "--tf", "raw"],
        ["rank", "--infected", "x", "--corpus", "c", "--fixed-clock", "yesterday"],
        ["synth", "--profile", "nope", "--seed", "0", "--emit", "fdoc", "--out", "-"],
        ["synth", "--profile", "wannacry", "--seed", "-1", "--emit", "fdoc", "--out", "-"],
        ["ingest", "x.json", "--out", "x.fdoc", "--no-cutoff", "--cutoff-pattern", "eky"],
        ["corpus-list"],
    ],
)
def test_usage_errors_exit_1(argv, monkeypatch, tmp_path):
    monkeypatch.delenv(cli.CORPUS_ENV, raising=False)
    monkeypatch.chdir(tmp_path)
    code, _, err = run(*argv)
    assert code == 1, err
    assert err.startswith("usage error")


def _data_errors():
    seen, stack = [], [errors.DataError]
    while stack:
        cls = stack.pop()
        seen.append(cls)
        stack.extend(cls.__subclasses__())
    return sorted(set(seen), key=lambda c: c.__name__)


def _instance(cls):
    return cls("doc", "aaaa", "bbbb") if cls is errors.DigestMismatch else cls("injected")


@pytest.mark.parametrize("cls", _data_errors(), ids=lambda c: c.__name__)
def test_every_data_error_exits_2(cls, workspace, monkeypatch):
    def boom(*args, **kwargs):
        raise _instance(cls)

    monkeypatch.setattr(cli, "rank_features", boom)
    code, _, err = run("rank", "--infected", workspace / "w.fdoc", "--corpus", workspace / "amb4")
    assert code == 2
    assert err.startswith(f"error: {cls.__name__}:")


@pytest.mark.parametrize("exc", [RuntimeError("bug"), KeyError("k"), ZeroDivisionError()])
def test_unexpected_exceptions_exit_3(exc, workspace, monkeypatch):
    def boom(*args, **kwargs):
        raise exc

    monkeypatch.setattr(cli, "emit", boom)
    code, _, err = run("rank", "--infected", workspace / "w.fdoc", "--corpus", workspace / "amb4")
    assert code == 3 and err.startswith("internal error")


def test_missing_files_exit_2(tmp_path):
    code, _, err = run("ingest", tmp_path / "absent.json", "--out", tmp_path / "x.fdoc")
    assert code == 2 and "MissingFile" in err
    code, _, err = run("corpus-list", tmp_path / "absent")
    assert code == 2 and "MissingFile" in err


def test_malformed_report_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"behavior": {"processes": [')
    code, _, err = run("ingest", bad, "--out", tmp_path / "x.fdoc")
    assert code == 2 and "MalformedInput" in err


def test_ingest_without_cutoff(workspace, tmp_path):
    code, out, _ = run("ingest", workspace / "w.json", "--out", tmp_path / "all.fdoc", "--no-cutoff")
    assert code == 0 and "cutoff at" not in out
    assert len(loads_fdoc((tmp_path / "all.fdoc").read_bytes())) > 74


def test_synth_to_stdout():
    code, out, _ = run("synth", "--profile", "ambient_email", "--seed", 3, "--emit", "fdoc", "--out", "-")
    assert code == 0 and loads_fdoc(out.encode()).id == "ambient_email-3"


def test_version():
    assert run("version")[1].strip() == f"footprint {cli.__version__}"
