"""The full audit over a directory of apps: gate, extract, retrieve, decide.

Two input layouts are understood. A directory containing a
corpus_manifest.json is treated as a synthesized corpus: each listed app
directory holds app.apk plus a src/ tree of decompiled-style sources. Any
other directory is scanned for *.apk files, whose code is read directly
from the DEX tables inside each package.

Per app the stages are: permission/intent gate; code block extraction;
similarity retrieval for prompt context; one analysis-plus-summary backend
round per block; a merge of block verdicts where retained beats removed
beats unknown. An app that fails the gate, or yields no blocks, gets an
all-unknown verdict with zero blocks analyzed. Per-app failures are
recorded on the report and never abort the batch.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .apk import POLICIES, GateDecision, gate_filter, open_package
from .axml import parse_binary_manifest
from .backend import make_backend
from .config import AuditConfig
from .dex import scan_dex_references
from .errors import AuditError
from .extract import DEFAULT_CATALOG, CodeBlock, extract_code_blocks, load_catalog
from .metadata import ALL_TYPES, MetadataType
from .prompts import build_rag_prompt
from .store import VectorStore, load_store, retrieve_similar
from .synth import MANIFEST_NAME, CorpusManifest
from .verdict import (
    Decision,
    EvaluationReport,
    Verdict,
    all_unknown_verdict,
    summarize_to_verdict,
)

RISK_TAGS = ("R6", "R9")

REPORTS_NAME = "reports.jsonl"
AGGREGATE_NAME = "aggregate.json"
COUNTS_NAME = "per_type_counts.csv"


@dataclass(frozen=True)
class LeakReport:
    """One app's audit outcome."""

    app_id: str
    gate: GateDecision
    blocks_analyzed: int
    verdict: Verdict
    leaked_types: frozenset[MetadataType]
    error: str | None = None

    def __post_init__(self):
        if self.leaked_types != self.verdict.retained_types:
            raise ValueError("leaked_types must equal the verdict's retained set")
        if not self.gate.passes and self.blocks_analyzed != 0:
            raise ValueError("a gated-out app cannot have analyzed blocks")


@dataclass(frozen=True)
class AggregateReport:
    """Corpus-level counts over one batch of leak reports."""

    total_apps: int
    gated_in: int
    apps_leaking_any: int
    leaking_fraction: float | None  # None when nothing passed the gate
    per_type_counts: dict[MetadataType, int]
    risk_tags: tuple[str, ...] = RISK_TAGS

    def __post_init__(self):
        if not 0 <= self.apps_leaking_any <= self.gated_in <= self.total_apps:
            raise ValueError("leak count, gated-in, and total must be nested")
        if self.leaking_fraction is not None and not 0.0 <= self.leaking_fraction <= 1.0:
            raise ValueError("leaking_fraction must lie in [0, 1]")


def aggregate(reports: list[LeakReport]) -> AggregateReport:
    """Count leaks over a batch; fractions use gated-in apps as denominator."""
    gated_in = sum(1 for r in reports if r.gate.passes)
    leaking = sum(1 for r in reports if r.leaked_types)
    counts = {t: 0 for t in ALL_TYPES}
    for report in reports:
        for mtype in report.leaked_types:
            counts[mtype] += 1
    return AggregateReport(
        total_apps=len(reports),
        gated_in=gated_in,
        apps_leaking_any=leaking,
        leaking_fraction=leaking / gated_in if gated_in else None,
        per_type_counts=counts,
    )


def merge_verdicts(verdicts: list[Verdict], analysis_digest: str) -> Verdict:
    """Combine per-block verdicts into one app verdict.

    For each category the strongest claim wins: retained over removed over
    unknown. Evidence of retention anywhere outweighs a strip elsewhere,
    since one leaking code path is enough to leak.
    """
    per_type: dict[MetadataType, Decision] = {}
    for mtype in ALL_TYPES:
        decisions = {v.per_type[mtype] for v in verdicts}
        if Decision.RETAINED in decisions:
            per_type[mtype] = Decision.RETAINED
        elif Decision.REMOVED in decisions:
            per_type[mtype] = Decision.REMOVED
        else:
            per_type[mtype] = Decision.UNKNOWN
    retained_rationales = [
        v.rationale
        for v in verdicts
        if any(d is Decision.RETAINED for d in v.per_type.values())
    ]
    if retained_rationales:
        rationale = "; ".join(dict.fromkeys(retained_rationales))
    elif verdicts:
        rationale = verdicts[0].rationale
    else:
        rationale = "no blocks produced a verdict"
    return Verdict(
        per_type=per_type,
        rationale=rationale,
        backend_id=verdicts[0].backend_id if verdicts else "none",
        raw_response_digest=analysis_digest,
        template_id=verdicts[0].template_id if verdicts else "none",
    )


def _discover_apps(input_dir: Path) -> tuple[list[tuple[str, Path, Path | None]], CorpusManifest | None]:
    """List (app_id, apk_path, source_root_or_None) for the input layout."""
    manifest_path = input_dir / MANIFEST_NAME
    if manifest_path.exists():
        manifest = CorpusManifest.load(manifest_path)
        apps = []
        for entry in manifest.apps:
            app_dir = input_dir / entry.directory
            apps.append((entry.app_id, app_dir / "app.apk", app_dir / "src"))
        return apps, manifest
    apps = [
        (path.stem, path, None) for path in sorted(input_dir.glob("*.apk"))
    ]
    return apps, None


class _AppAuditor:
    """Shared per-run state: backend, store, catalog, and knobs."""

    def __init__(self, config: AuditConfig):
        self.config = config
        self.policy = POLICIES[config.gate_policy]
        self.catalog = (
            load_catalog(config.catalog_path) if config.catalog_path else DEFAULT_CATALOG
        )
        self.store: VectorStore | None = (
            load_store(config.store_path, expected_dim=config.dim)
            if config.store_path
            else None
        )
        self.backend = make_backend(config.backend_config())

    def _context_for(self, block: CodeBlock):
        if self.store is None or self.store.is_empty:
            return []
        return retrieve_similar(
            self.store,
            block.text,
            self.config.top_k,
            min_similarity=self.config.min_similarity,
        )

    def _blocks_for(self, apk_path: Path, source_root: Path | None) -> list[CodeBlock]:
        if source_root is not None and source_root.is_dir():
            return extract_code_blocks(
                source_root,
                self.catalog,
                max_block_chars=self.config.max_block_chars,
            )
        package = open_package(apk_path)
        try:
            return scan_dex_references(package, self.catalog)
        except AuditError:
            return []

    def audit_app(self, app_id: str, apk_path: Path, source_root: Path | None) -> LeakReport:
        try:
            package = open_package(apk_path)
            info = parse_binary_manifest(package.manifest_bytes)
            gate = gate_filter(info, self.policy)
            if not gate.passes:
                verdict = all_unknown_verdict(
                    self.backend.backend_id, "gated out before analysis"
                )
                return LeakReport(app_id, gate, 0, verdict, frozenset())

            blocks = self._blocks_for(apk_path, source_root)
            if not blocks:
                verdict = all_unknown_verdict(
                    self.backend.backend_id, "no metadata-handling code found"
                )
                return LeakReport(app_id, gate, 0, verdict, frozenset())

            verdicts = []
            digests = []
            for block in blocks:
                bundle = build_rag_prompt(
                    block,
                    self._context_for(block),
                    template_id=self.config.analysis_template,
                    max_prompt_chars=self.config.max_prompt_chars,
                )
                analysis = self.backend.invoke(bundle)
                verdicts.append(
                    summarize_to_verdict(
                        analysis,
                        self.backend,
                        template_id=self.config.summary_template,
                        max_prompt_chars=self.config.max_prompt_chars,
                    )
                )
                digests.append(verdicts[-1].raw_response_digest)
            merged = merge_verdicts(verdicts, _combined_digest(digests))
            return LeakReport(
                app_id, gate, len(blocks), merged, merged.retained_types
            )
        except AuditError as exc:
            gate = GateDecision(
                passes=False,
                missing_permissions=frozenset(),
                image_share_supported=False,
                reasons=(f"audit failed: {exc}",),
            )
            verdict = all_unknown_verdict(self.backend.backend_id, "audit failed")
            return LeakReport(app_id, gate, 0, verdict, frozenset(), error=str(exc))


def _combined_digest(digests: list[str]) -> str:
    import hashlib

    joined = "\n".join(digests).encode("ascii")
    return "sha256:" + hashlib.sha256(joined).hexdigest()


def run_audit(
    config: AuditConfig, input_dir, out_dir=None
) -> tuple[list[LeakReport], AggregateReport]:
    """Audit every app under input_dir; optionally write the report files.

    Reports come back ordered by app id regardless of worker scheduling, so
    equal inputs give equal outputs. Per-app failures are captured in the
    report's error field.
    """
    input_dir = Path(input_dir)
    apps, _ = _discover_apps(input_dir)
    apps = sorted(apps, key=lambda item: item[0])
    auditor = _AppAuditor(config)

    if config.parallelism > 1 and len(apps) > 1:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            reports = list(pool.map(lambda a: auditor.audit_app(*a), apps))
    else:
        reports = [auditor.audit_app(*app) for app in apps]

    summary = aggregate(reports)
    if out_dir is not None:
        write_reports(reports, summary, out_dir)
    return reports, summary


def evaluate_against_truth(
    reports: list[LeakReport], manifest: CorpusManifest
) -> EvaluationReport:
    """Score verdicts against a corpus's planted truth.

    Only apps expected to pass the gate count; a report is correct when all
    five category decisions equal the planted expectation exactly.
    """
    by_id = {r.app_id: r for r in reports}
    total = 0
    correct = 0
    for app in manifest.apps:
        if not app.gate_expected:
            continue
        total += 1
        report = by_id.get(app.app_id)
        if report is None or report.error:
            continue
        produced = {t: report.verdict.per_type[t].value for t in ALL_TYPES}
        if produced == app.expected:
            correct += 1
    return EvaluationReport.from_counts(total, correct)


def _report_doc(report: LeakReport) -> dict:
    return {
        "app_id": report.app_id,
        "gate": {
            "passes": report.gate.passes,
            "missing_permissions": sorted(report.gate.missing_permissions),
            "image_share_supported": report.gate.image_share_supported,
            "reasons": list(report.gate.reasons),
        },
        "blocks_analyzed": report.blocks_analyzed,
        "verdict": {
            "per_type": {t.value: report.verdict.per_type[t].value for t in ALL_TYPES},
            "rationale": report.verdict.rationale,
            "backend_id": report.verdict.backend_id,
            "template_id": report.verdict.template_id,
            "raw_response_digest": report.verdict.raw_response_digest,
        },
        "leaked_types": sorted(t.value for t in report.leaked_types),
        "error": report.error,
    }


def _aggregate_doc(summary: AggregateReport) -> dict:
    return {
        "total_apps": summary.total_apps,
        "gated_in": summary.gated_in,
        "apps_leaking_any": {
            "count": summary.apps_leaking_any,
            "fraction": summary.leaking_fraction,
        },
        "per_type_counts": {t.value: summary.per_type_counts[t] for t in ALL_TYPES},
        "risk_tags": list(summary.risk_tags),
    }


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def write_reports(
    reports: list[LeakReport], summary: AggregateReport, out_dir
) -> None:
    """Write reports.jsonl, aggregate.json, and per_type_counts.csv.

    Files are written to a temp name and renamed into place, carry no
    timestamps or absolute paths, and list apps in id order, so a rerun
    over the same inputs reproduces them byte for byte.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    lines = [
        json.dumps(_report_doc(r), sort_keys=True)
        for r in sorted(reports, key=lambda r: r.app_id)
    ]
    _atomic_write_text(out / REPORTS_NAME, "\n".join(lines) + "\n" if lines else "")

    _atomic_write_text(
        out / AGGREGATE_NAME,
        json.dumps(_aggregate_doc(summary), indent=2, sort_keys=True) + "\n",
    )

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["metadata_type", "count"])
    for mtype in ALL_TYPES:
        writer.writerow([mtype.value, summary.per_type_counts[mtype]])
    _atomic_write_text(out / COUNTS_NAME, buffer.getvalue())
