"""Synthetic corpus generation tests."""

import json

import pytest

from exifaudit.apk import gate_filter, open_package
from exifaudit.axml import parse_binary_manifest
from exifaudit.errors import ConfigError
from exifaudit.exif import detect_sensitive_types, parse_exif
from exifaudit.extract import DEFAULT_CATALOG, extract_code_blocks
from exifaudit.metadata import ALL_TYPES, MetadataType
from exifaudit.synth import (
    CorpusManifest,
    SyntheticCorpusSpec,
    load_knowledge,
    parse_corpus_spec,
    planted_sources,
    synthesize_corpus,
)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    spec = SyntheticCorpusSpec(app_count=40, leak_rate=0.25, seed=13)
    manifest = synthesize_corpus(spec, out)
    return out, manifest


def test_quota_is_exact(corpus):
    _, manifest = corpus
    leaky = [a for a in manifest.apps if a.retained_types]
    assert len(manifest.apps) == 40
    assert len(leaky) == 10  # round(0.25 * 40)


def test_every_leaky_app_retains_something(corpus):
    _, manifest = corpus
    for app in manifest.apps:
        if app.retained_types:
            assert any(v == "retained" for v in app.expected.values())


def test_manifest_round_trips_through_json(corpus):
    out, manifest = corpus
    loaded = CorpusManifest.load(out / "corpus_manifest.json")
    assert loaded == manifest


def test_manifest_paths_are_relative(corpus):
    out, _ = corpus
    doc = json.loads((out / "corpus_manifest.json").read_text())
    for app in doc["apps"]:
        assert not app["dir"].startswith("/")


def test_generated_apks_pass_the_gate(corpus):
    out, manifest = corpus
    for app in manifest.apps[:5]:
        package = open_package(out / app.directory / "app.apk")
        decision = gate_filter(parse_binary_manifest(package.manifest_bytes))
        assert decision.passes == app.gate_expected


def test_capture_has_all_types_shared_has_retained(corpus):
    out, manifest = corpus
    for app in manifest.apps[:8]:
        capture = (out / app.directory / "capture.jpg").read_bytes()
        assert detect_sensitive_types(parse_exif(capture)).types == frozenset(ALL_TYPES)
        shared = (out / app.directory / "shared.jpg").read_bytes()
        assert detect_sensitive_types(parse_exif(shared)).types == app.retained_types


def test_planted_code_agrees_with_labels(corpus):
    out, manifest = corpus
    leaky = next(a for a in manifest.apps if a.retained_types)
    blocks = extract_code_blocks(out / leaky.directory / "src", DEFAULT_CATALOG)
    assert len(blocks) == 5
    texts = {b.source_id: b.text for b in blocks}
    for mtype in ALL_TYPES:
        handlers = [t for sid, t in texts.items() if mtype.value in sid]
        assert len(handlers) == 1
        if mtype in leaky.retained_types:
            assert "uploader.send" in handlers[0]
            assert "saveAttributes" not in handlers[0]
        else:
            assert "saveAttributes" in handlers[0]
            assert "uploader.send" not in handlers[0]


def test_determinism_across_runs(tmp_path):
    spec = SyntheticCorpusSpec(app_count=12, leak_rate=0.5, seed=99)
    a, b = tmp_path / "a", tmp_path / "b"
    synthesize_corpus(spec, a)
    synthesize_corpus(spec, b)
    files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_different_seeds_differ(tmp_path):
    spec_a = SyntheticCorpusSpec(app_count=10, leak_rate=0.5, seed=1)
    spec_b = SyntheticCorpusSpec(app_count=10, leak_rate=0.5, seed=2)
    ma = synthesize_corpus(spec_a, tmp_path / "s1")
    mb = synthesize_corpus(spec_b, tmp_path / "s2")
    assert [a.retained_types for a in ma.apps] != [b.retained_types for b in mb.apps]


def test_zero_leak_rate(tmp_path):
    manifest = synthesize_corpus(
        SyntheticCorpusSpec(app_count=6, leak_rate=0.0, seed=4), tmp_path
    )
    assert all(not a.retained_types for a in manifest.apps)


def test_full_leak_rate(tmp_path):
    manifest = synthesize_corpus(
        SyntheticCorpusSpec(app_count=6, leak_rate=1.0, seed=4), tmp_path
    )
    assert all(a.retained_types for a in manifest.apps)


def test_gate_fail_apps_are_clean_and_unknown(tmp_path):
    spec = SyntheticCorpusSpec(app_count=10, leak_rate=0.3, seed=5, gate_fail_count=3)
    manifest = synthesize_corpus(spec, tmp_path)
    failing = [a for a in manifest.apps if not a.gate_expected]
    assert len(failing) == 3
    for app in failing:
        assert not app.retained_types
        assert set(app.expected.values()) == {"unknown"}


def test_gate_fail_count_cannot_exceed_clean_apps(tmp_path):
    spec = SyntheticCorpusSpec(app_count=4, leak_rate=1.0, seed=1, gate_fail_count=1)
    with pytest.raises(ValueError):
        synthesize_corpus(spec, tmp_path)


def test_knowledge_covers_both_actions_for_all_types(corpus):
    out, _ = corpus
    records = load_knowledge(out)
    assert len(records) == 10
    ids = {r["id"] for r in records}
    for mtype in ALL_TYPES:
        assert f"strip-{mtype.value.lower()}" in ids
        assert f"retain-{mtype.value.lower()}" in ids


def test_planted_sources_one_file_per_type():
    sources = planted_sources(frozenset({MetadataType.GPS}))
    assert len(sources) == 5
    gps_files = [p for p in sources if "Gps" in p]
    assert gps_files == ["src/com/audit/sample/GpsHandler.java"]


def test_spec_validation():
    with pytest.raises(ValueError):
        SyntheticCorpusSpec(app_count=-1, leak_rate=0.5)
    with pytest.raises(ValueError):
        SyntheticCorpusSpec(app_count=1, leak_rate=1.5)
    with pytest.raises(ValueError):
        SyntheticCorpusSpec(
            app_count=1, leak_rate=0.5, per_type_retention={MetadataType.GPS: 2.0}
        )


def test_parse_corpus_spec_full():
    spec = parse_corpus_spec(
        "# demo\n"
        "app_count = 50\n"
        "leak_rate = 0.2\n"
        "seed = 9\n"
        "gate_fail_count = 1\n"
        "retention.Gps = 0.5\n"
    )
    assert spec.app_count == 50
    assert spec.leak_rate == 0.2
    assert spec.seed == 9
    assert spec.gate_fail_count == 1
    assert spec.per_type_retention[MetadataType.GPS] == 0.5
    assert spec.per_type_retention[MetadataType.DATETIME] == 0.95


def test_parse_corpus_spec_requires_core_keys():
    with pytest.raises(ConfigError):
        parse_corpus_spec("app_count = 5\n")
    with pytest.raises(ConfigError):
        parse_corpus_spec("leak_rate = 0.5\n")


def test_parse_corpus_spec_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        parse_corpus_spec("app_count = 5\nleak_rate = 0.1\nmystery = 1\n")
