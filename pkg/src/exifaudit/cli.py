"""Command line entry points: run an audit, synthesize a corpus, build a store.

Exit codes: 0 on success, 2 when the batch completed but some apps failed,
3 on configuration errors.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .config import load_config
from .embedding import DEFAULT_DIM
from .errors import ConfigError, IoFailure
from .pipeline import evaluate_against_truth, run_audit
from .store import index_corpus, save_store
from .synth import (
    MANIFEST_NAME,
    CorpusManifest,
    load_knowledge,
    parse_corpus_spec,
    synthesize_corpus,
)

EXIT_OK = 0
EXIT_APP_FAILURES = 2
EXIT_CONFIG = 3


@click.group()
def main():
    """Audit Android apps for EXIF metadata retention."""


@main.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(), help="Audit config file.")
@click.option("--input", "input_dir", required=True, type=click.Path(), help="APK directory or synthesized corpus.")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Directory for report files.")
def run_command(config_path, input_dir, out_dir):
    """Run the full gate/extract/retrieve/verdict pipeline."""
    try:
        config = load_config(config_path)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)

    reports, summary = run_audit(config, input_dir, out_dir)
    fraction = summary.leaking_fraction
    click.echo(
        f"audited {summary.total_apps} apps, {summary.gated_in} passed the gate,"
        f" {summary.apps_leaking_any} leak"
        + (f" ({fraction:.4f} of gated-in)" if fraction is not None else "")
    )
    manifest_path = Path(input_dir) / MANIFEST_NAME
    if manifest_path.exists():
        evaluation = evaluate_against_truth(reports, CorpusManifest.load(manifest_path))
        click.echo(
            f"against planted truth: {evaluation.correct}/{evaluation.total}"
            f" correct, accuracy {evaluation.accuracy:.4f}"
        )
    failures = [r for r in reports if r.error]
    if failures:
        click.echo(f"{len(failures)} apps failed; see reports.jsonl", err=True)
        sys.exit(EXIT_APP_FAILURES)
    sys.exit(EXIT_OK)


@main.command("synth")
@click.option("--spec", "spec_path", required=True, type=click.Path(), help="Corpus spec file.")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Corpus output directory.")
def synth_command(spec_path, out_dir):
    """Generate a synthetic corpus with planted ground truth."""
    try:
        text = Path(spec_path).read_text(encoding="utf-8")
        spec = parse_corpus_spec(text)
    except (OSError, ConfigError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        manifest = synthesize_corpus(spec, out_dir)
    except IoFailure as exc:
        click.echo(f"cannot write corpus: {exc}", err=True)
        sys.exit(EXIT_APP_FAILURES)
    leaky = sum(1 for a in manifest.apps if a.retained_types)
    click.echo(
        f"wrote {manifest.app_count} apps ({leaky} leaky) under {out_dir};"
        f" truth in {MANIFEST_NAME}"
    )
    sys.exit(EXIT_OK)


@main.command("index")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(), help="corpus_manifest.json of a synthesized corpus.")
@click.option("--store", "store_path", required=True, type=click.Path(), help="Vector store file to write.")
@click.option("--dim", default=DEFAULT_DIM, show_default=True, help="Embedding dimension.")
def index_command(corpus_path, store_path, dim):
    """Embed a corpus's labeled snippets into a vector store file."""
    corpus_path = Path(corpus_path)
    if not corpus_path.exists():
        click.echo(f"config error: no such corpus manifest: {corpus_path}", err=True)
        sys.exit(EXIT_CONFIG)
    if dim <= 0:
        click.echo("config error: dim must be positive", err=True)
        sys.exit(EXIT_CONFIG)
    records = load_knowledge(corpus_path.parent)
    store = index_corpus(records, dim=dim)
    save_store(store, store_path)
    click.echo(f"indexed {len(store)} records into {store_path}")
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
