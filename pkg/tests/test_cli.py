from __future__ import annotations

import re
import subprocess
import sys
from pathlib import Path

import pytest

from reachjoin.cli import main
from reachjoin.query import Modifier, parse_query, rewrite_paths

from _util import bare_nt
from test_oracle import LAUREATES

CORPUS = Path(__file__).resolve().parents[1] / "corpus" / "appendix"
PATH_QUERY = 'SELECT ?p WHERE { ?p workedAt/locIn*/hasLabel "USA" }'


@pytest.fixture
def loaded(tmp_path, capsys):
    data = tmp_path / "ten.nt"
    data.write_text(bare_nt(LAUREATES))
    store = tmp_path / "store"
    assert main(["load", str(data), "-k", "2", "--data-dir", str(store)]) == 0
    out = capsys.readouterr().out
    return store, out


def test_load_summary(loaded):
    _, out = loaded
    assert "triples: 10" in out
    sizes = [int(a) for a in re.findall(r"subject-keyed (\d+)", out)]
    obj = [int(a) for a in re.findall(r"object-keyed (\d+)", out)]
    assert sum(sizes) == 10 and sum(sizes) + sum(obj) >= 10


def test_missing_file_exits_nonzero(tmp_path, capsys):
    assert main(["load", str(tmp_path / "nope.nt"), "--data-dir", str(tmp_path / "s")]) != 0
    assert "error [io]" in capsys.readouterr().err


def test_malformed_data_reports_stage(tmp_path, capsys):
    bad = tmp_path / "bad.nt"
    bad.write_text("<a> <b> <c> .\n<a> <b>\n")
    assert main(["load", str(bad), "--data-dir", str(tmp_path / "s")]) == 2
    err = capsys.readouterr().err
    assert "error [parse-data]" in err and "2" in err


def test_query_prints_sorted_rows(loaded, capsys):
    store, _ = loaded
    assert main(["query", "--data-dir", str(store), "-e", PATH_QUERY, "--audit"]) == 0
    cap = capsys.readouterr()
    assert cap.out.splitlines() == ["?p", "<turing1>"]
    assert "frontier rounds 1" in cap.err


def test_bad_query_reports_stage(loaded, capsys):
    store, _ = loaded
    assert main(["query", "--data-dir", str(store), "-e", "SELECT * WHERE { ?x p ?y FILTER(?x) }"]) == 2
    assert "error [parse-query]" in capsys.readouterr().err


def test_query_without_store(tmp_path, capsys):
    assert main(["query", "--data-dir", str(tmp_path / "none"), "-e", PATH_QUERY]) == 2
    assert "error [io]" in capsys.readouterr().err


def test_snapshot_reload_is_byte_identical(loaded, tmp_path, capsys):
    from reachjoin.store import Store
    store, _ = loaded
    again = tmp_path / "again"
    Store.load(store).save(again)
    fresh = tmp_path / "fresh"
    assert main(["load", str(tmp_path / "ten.nt"), "-k", "2", "--data-dir", str(fresh)]) == 0
    files = sorted(p.relative_to(store) for p in store.rglob("*") if p.is_file())
    assert files
    for rel in files:
        assert (again / rel).read_bytes() == (store / rel).read_bytes(), rel
        assert (fresh / rel).read_bytes() == (store / rel).read_bytes(), rel


def test_explain_only_does_not_execute(loaded, capsys):
    store, _ = loaded
    assert main(["query", "--data-dir", str(store), "-e", PATH_QUERY, "--explain-only"]) == 0
    cap = capsys.readouterr()
    assert "DRJ" in cap.out and "<turing1>" not in cap.out and "rows in" not in cap.err


def test_explain_dot(loaded, capsys):
    store, _ = loaded
    assert main(["explain", "--data-dir", str(store), "-e", PATH_QUERY, "--format", "dot"]) == 0
    assert capsys.readouterr().out.startswith("digraph")


def test_stats(loaded, capsys):
    store, _ = loaded
    assert main(["stats", "--data-dir", str(store)]) == 0
    out = capsys.readouterr().out
    assert "<locIn>" in out and "reachSel" in out


def test_oracle_check_agrees(loaded, capsys):
    store, _ = loaded
    assert main(["oracle-check", "--data-dir", str(store), "-e", PATH_QUERY]) == 0
    assert "results agree" in capsys.readouterr().out


def test_l1_plans_two_scans_and_one_drj(tmp_path, capsys):
    out = tmp_path / "h"
    assert main(["gen", "--out", str(out), "--hierarchy", "1"]) == 0
    assert main(["load", str(out / "dataset.nt"), "-k", "2", "--data-dir", str(tmp_path / "s")]) == 0
    capsys.readouterr()
    assert main(["explain", str(out / "L1.rq"), "--data-dir", str(tmp_path / "s")]) == 0
    plan = capsys.readouterr().out
    assert plan.count("DIS[") == 2 and plan.count("DRJ") == 1 and "subOrganizationOf*" in plan


def test_corpus_l1_and_d3_parse():
    l1 = parse_query((CORPUS / "L1.rq").read_text())
    assert any(a.modifier is Modifier.STAR for p in l1.patterns for a in p.path)
    d3 = rewrite_paths(parse_query((CORPUS / "D3.rq").read_text()).patterns)
    assert len(d3) == 8
    assert sum(t.atom.modifier is Modifier.STAR for t in d3) == 2


def test_every_corpus_query_parses():
    for f in sorted(CORPUS.glob("*.rq")):
        assert parse_query(f.read_text()).patterns, f.name


def test_gen_writes_instance(tmp_path, capsys):
    assert main(["gen", "--out", str(tmp_path / "g"), "--seed", "42", "--vertices", "40", "--queries", "2"]) == 0
    names = sorted(p.name for p in (tmp_path / "g").iterdir())
    assert names == ["answers0.tsv", "answers1.tsv", "dataset.nt", "query0.rq", "query1.rq"]


def test_bench_strong(capsys):
    assert main(["bench", "--universities", "1", "--k-list", "1,2", "--runs", "1",
                 "--transport", "inproc", "--sample-size", "100"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 4 and "geo-mean" in lines[0]


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "reachjoin.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("load", "query", "explain", "stats", "bench", "oracle-check", "gen"):
        assert cmd in proc.stdout
