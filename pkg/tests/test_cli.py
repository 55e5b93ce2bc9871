"""End-to-end tests of the audit CLI."""

import json

import pytest
from click.testing import CliRunner

from exifaudit.cli import main
from exifaudit.store import load_store

SPEC_TEXT = "app_count = 8\nleak_rate = 0.5\nseed = 3\n"


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def workspace(tmp_path, runner):
    """A synthesized corpus plus spec/config files, ready to audit."""
    spec_path = tmp_path / "corpus.spec"
    spec_path.write_text(SPEC_TEXT)
    corpus_dir = tmp_path / "corpus"
    result = runner.invoke(
        main, ["synth", "--spec", str(spec_path), "--out", str(corpus_dir)]
    )
    assert result.exit_code == 0, result.output
    config_path = tmp_path / "audit.conf"
    config_path.write_text("backend = oracle\nseed = 3\n")
    return tmp_path, corpus_dir, config_path


def test_synth_reports_what_it_wrote(workspace):
    tmp_path, corpus_dir, _ = workspace
    assert (corpus_dir / "corpus_manifest.json").exists()
    assert (corpus_dir / "knowledge.jsonl").exists()


def test_synth_rejects_bad_spec(runner, tmp_path):
    bad = tmp_path / "bad.spec"
    bad.write_text("app_count = 5\n")  # leak_rate missing
    result = runner.invoke(main, ["synth", "--spec", str(bad), "--out", str(tmp_path / "o")])
    assert result.exit_code == 3
    assert "config error" in result.output


def test_synth_missing_spec_file(runner, tmp_path):
    result = runner.invoke(
        main, ["synth", "--spec", str(tmp_path / "none.spec"), "--out", str(tmp_path / "o")]
    )
    assert result.exit_code == 3


def test_index_builds_a_loadable_store(workspace, runner):
    tmp_path, corpus_dir, _ = workspace
    store_path = tmp_path / "knowledge.store"
    result = runner.invoke(
        main,
        [
            "index",
            "--corpus",
            str(corpus_dir / "corpus_manifest.json"),
            "--store",
            str(store_path),
        ],
    )
    assert result.exit_code == 0, result.output
    assert "indexed 10 records" in result.output
    assert len(load_store(store_path)) == 10


def test_index_missing_manifest(runner, tmp_path):
    result = runner.invoke(
        main,
        ["index", "--corpus", str(tmp_path / "nope.json"), "--store", str(tmp_path / "s")],
    )
    assert result.exit_code == 3


def test_index_rejects_nonpositive_dim(workspace, runner):
    tmp_path, corpus_dir, _ = workspace
    result = runner.invoke(
        main,
        [
            "index",
            "--corpus",
            str(corpus_dir / "corpus_manifest.json"),
            "--store",
            str(tmp_path / "s"),
            "--dim",
            "0",
        ],
    )
    assert result.exit_code == 3


def test_run_audits_a_corpus_and_scores_it(workspace, runner):
    tmp_path, corpus_dir, config_path = workspace
    out_dir = tmp_path / "out"
    result = runner.invoke(
        main,
        [
            "run",
            "--config",
            str(config_path),
            "--input",
            str(corpus_dir),
            "--out",
            str(out_dir),
        ],
    )
    assert result.exit_code == 0, result.output
    assert "audited 8 apps" in result.output
    assert "accuracy 1.0000" in result.output
    docs = [
        json.loads(line)
        for line in (out_dir / "reports.jsonl").read_text().splitlines()
    ]
    assert len(docs) == 8
    agg = json.loads((out_dir / "aggregate.json").read_text())
    assert agg["apps_leaking_any"]["count"] == 4


def test_run_with_retrieval_store(workspace, runner):
    tmp_path, corpus_dir, _ = workspace
    store_path = tmp_path / "knowledge.store"
    runner.invoke(
        main,
        [
            "index",
            "--corpus",
            str(corpus_dir / "corpus_manifest.json"),
            "--store",
            str(store_path),
        ],
    )
    config_path = tmp_path / "rag.conf"
    config_path.write_text(f"backend = oracle\nstore_path = {store_path}\ntop_k = 2\n")
    out_dir = tmp_path / "out_rag"
    result = runner.invoke(
        main,
        [
            "run",
            "--config",
            str(config_path),
            "--input",
            str(corpus_dir),
            "--out",
            str(out_dir),
        ],
    )
    assert result.exit_code == 0, result.output
    assert "accuracy 1.0000" in result.output


def test_run_rejects_unknown_config_key(workspace, runner):
    tmp_path, corpus_dir, _ = workspace
    config_path = tmp_path / "bad.conf"
    config_path.write_text("backend = oracle\nturbo = yes\n")
    result = runner.invoke(
        main,
        [
            "run",
            "--config",
            str(config_path),
            "--input",
            str(corpus_dir),
            "--out",
            str(tmp_path / "o"),
        ],
    )
    assert result.exit_code == 3
    assert "config error" in result.output


def test_run_missing_config_file(workspace, runner):
    tmp_path, corpus_dir, _ = workspace
    result = runner.invoke(
        main,
        [
            "run",
            "--config",
            str(tmp_path / "absent.conf"),
            "--input",
            str(corpus_dir),
            "--out",
            str(tmp_path / "o"),
        ],
    )
    assert result.exit_code == 3


def test_run_signals_app_failures(workspace, runner):
    tmp_path, corpus_dir, config_path = workspace
    manifest = json.loads((corpus_dir / "corpus_manifest.json").read_text())
    victim_dir = corpus_dir / manifest["apps"][0]["dir"]
    (victim_dir / "app.apk").write_bytes(b"garbage")
    result = runner.invoke(
        main,
        [
            "run",
            "--config",
            str(config_path),
            "--input",
            str(corpus_dir),
            "--out",
            str(tmp_path / "out_fail"),
        ],
    )
    assert result.exit_code == 2
    assert "failed" in result.output
