"""Synthetic audit corpora: mock apps with planted, verifiable ground truth.

Each generated app is a directory holding a minimal APK (binary manifest
only), a small Java source tree whose EXIF handling either strips or
retains each metadata category, and an image pair: the full capture and
what the app would share. The manifest written alongside records exactly
what was planted, so a pipeline run over the corpus can be scored against
known truth.

Planted code and planted images always agree: a category listed as
retained has a read-then-upload method and survives in shared.jpg; every
other category has a null-out-and-save method and is absent from it.

Generation is deterministic: one seeded generator drives every draw in a
fixed order (leaky-app selection, gate-failure selection, then per-app
retention draws and pixel noise), so equal specs give byte-identical
corpora.
"""

from __future__ import annotations

import io
import json
import os
import random
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

from PIL import Image

from .axml import build_manifest
from .apk import INTERNET, READ_STORAGE, WRITE_STORAGE
from .errors import IoFailure
from .exif import build_planted_exif, insert_exif_segment, strip_metadata
from .metadata import ALL_TYPES, MetadataType

GENERATOR_ID = "exifaudit-synth-v1"
MANIFEST_NAME = "corpus_manifest.json"
KNOWLEDGE_NAME = "knowledge.jsonl"

# Fraction of leaky apps retaining each category, following the observed
# ratios of a large-scale audit (GPS is stripped far more often than the
# device identity fields).
DEFAULT_RETENTION: dict[MetadataType, float] = {
    MetadataType.GPS: 0.62,
    MetadataType.DATETIME: 0.95,
    MetadataType.SMARTPHONE_MODEL: 0.96,
    MetadataType.SMARTPHONE_BRAND: 0.96,
    MetadataType.DEVICE_SERIAL_NUMBER: 0.91,
}

_ZIP_DATE = (2020, 1, 1, 0, 0, 0)
_IMAGE_SIDE = 16
_GATE_PERMISSIONS = (READ_STORAGE, WRITE_STORAGE, INTERNET)


@dataclass(frozen=True)
class SyntheticCorpusSpec:
    """What to generate: how many apps, how leaky, and the seed."""

    app_count: int
    leak_rate: float
    per_type_retention: dict[MetadataType, float] = field(
        default_factory=lambda: dict(DEFAULT_RETENTION)
    )
    seed: int = 0
    gate_fail_count: int = 0

    def __post_init__(self):
        if self.app_count < 0:
            raise ValueError("app_count must be non-negative")
        if not 0.0 <= self.leak_rate <= 1.0:
            raise ValueError("leak_rate must lie in [0, 1]")
        for mtype, rate in self.per_type_retention.items():
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"retention for {mtype.value} must lie in [0, 1]")
        if self.gate_fail_count < 0:
            raise ValueError("gate_fail_count must be non-negative")


@dataclass(frozen=True)
class AppTruth:
    """Planted ground truth for one generated app."""

    app_id: str
    directory: str  # relative to the corpus root
    gate_expected: bool
    expected: dict[MetadataType, str]  # "removed" | "retained" | "unknown"
    retained_types: frozenset[MetadataType]


@dataclass(frozen=True)
class CorpusManifest:
    """The ground-truth document written next to a generated corpus."""

    app_count: int
    leak_rate: float
    seed: int
    apps: tuple[AppTruth, ...]
    knowledge_path: str = KNOWLEDGE_NAME
    generator: str = GENERATOR_ID

    def to_json(self) -> str:
        doc = {
            "generator": self.generator,
            "app_count": self.app_count,
            "leak_rate": self.leak_rate,
            "seed": self.seed,
            "knowledge": self.knowledge_path,
            "apps": [
                {
                    "app_id": a.app_id,
                    "dir": a.directory,
                    "gate_expected": a.gate_expected,
                    "expected": {t.value: a.expected[t] for t in ALL_TYPES},
                    "retained_types": sorted(t.value for t in a.retained_types),
                }
                for a in self.apps
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "CorpusManifest":
        doc = json.loads(text)
        apps = tuple(
            AppTruth(
                app_id=a["app_id"],
                directory=a["dir"],
                gate_expected=a["gate_expected"],
                expected={
                    t: a["expected"][t.value] for t in ALL_TYPES
                },
                retained_types=frozenset(
                    MetadataType(v) for v in a["retained_types"]
                ),
            )
            for a in doc["apps"]
        )
        return cls(
            app_count=doc["app_count"],
            leak_rate=doc["leak_rate"],
            seed=doc["seed"],
            apps=apps,
            knowledge_path=doc.get("knowledge", KNOWLEDGE_NAME),
            generator=doc.get("generator", GENERATOR_ID),
        )

    @classmethod
    def load(cls, path) -> "CorpusManifest":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


# Handler bodies planted per category. Retained code reads the value and
# hands it to an uploader with no strip; removed code nulls the tag and
# writes the file back. Each category lives in its own file so extraction
# cannot merge two concerns into one block.

_READ_SNIPPETS: dict[MetadataType, str] = {
    MetadataType.DATETIME: (
        "        String taken = exif.getAttribute(ExifInterface.TAG_DATETIME);\n"
        "        uploader.send(taken);\n"
    ),
    MetadataType.SMARTPHONE_BRAND: (
        "        String maker = exif.getAttribute(ExifInterface.TAG_MAKE);\n"
        "        uploader.send(maker);\n"
    ),
    MetadataType.SMARTPHONE_MODEL: (
        "        String device = exif.getAttribute(ExifInterface.TAG_MODEL);\n"
        "        uploader.send(device);\n"
    ),
    MetadataType.DEVICE_SERIAL_NUMBER: (
        "        String serial = exif.getAttribute(ExifInterface.TAG_BODY_SERIAL_NUMBER);\n"
        "        uploader.send(serial);\n"
    ),
    MetadataType.GPS: (
        "        double[] location = exif.getLatLong();\n"
        "        uploader.send(location);\n"
    ),
}

_STRIP_SNIPPETS: dict[MetadataType, str] = {
    MetadataType.DATETIME: (
        "        exif.setAttribute(ExifInterface.TAG_DATETIME, null);\n"
        "        exif.saveAttributes();\n"
    ),
    MetadataType.SMARTPHONE_BRAND: (
        "        exif.setAttribute(ExifInterface.TAG_MAKE, null);\n"
        "        exif.saveAttributes();\n"
    ),
    MetadataType.SMARTPHONE_MODEL: (
        "        exif.setAttribute(ExifInterface.TAG_MODEL, null);\n"
        "        exif.saveAttributes();\n"
    ),
    MetadataType.DEVICE_SERIAL_NUMBER: (
        "        exif.setAttribute(ExifInterface.TAG_BODY_SERIAL_NUMBER, null);\n"
        "        exif.saveAttributes();\n"
    ),
    MetadataType.GPS: (
        "        exif.setAttribute(ExifInterface.TAG_GPS_LATITUDE, null);\n"
        "        exif.setAttribute(ExifInterface.TAG_GPS_LONGITUDE, null);\n"
        "        exif.saveAttributes();\n"
    ),
}


def _java_source(class_name: str, method_name: str, body: str) -> str:
    return (
        f"package com.audit.sample;\n\n"
        f"import androidx.exifinterface.media.ExifInterface;\n"
        f"import java.io.IOException;\n\n"
        f"public class {class_name} {{\n"
        f"    public void {method_name}(ExifInterface exif) throws IOException {{\n"
        f"{body}"
        f"    }}\n"
        f"}}\n"
    )


def planted_sources(retained: frozenset[MetadataType]) -> dict[str, str]:
    """Relative path → file text for one app's source tree."""
    sources: dict[str, str] = {}
    for mtype in ALL_TYPES:
        if mtype in retained:
            name = f"{mtype.value}Handler"
            body = _READ_SNIPPETS[mtype]
            method = "shareWithMetadata"
        else:
            name = f"{mtype.value}Cleaner"
            body = _STRIP_SNIPPETS[mtype]
            method = "scrubBeforeShare"
        sources[f"src/com/audit/sample/{name}.java"] = _java_source(name, method, body)
    return sources


def _knowledge_records() -> list[dict[str, str]]:
    """Labeled snippets for the retrieval store, one per category and action."""
    records = []
    for mtype in ALL_TYPES:
        records.append(
            {
                "id": f"strip-{mtype.value.lower()}",
                "text": _STRIP_SNIPPETS[mtype].strip(),
                "label": f"removes {mtype.value} before sharing",
            }
        )
        records.append(
            {
                "id": f"retain-{mtype.value.lower()}",
                "text": _READ_SNIPPETS[mtype].strip(),
                "label": f"uploads {mtype.value} unmodified",
            }
        )
    return records


def _base_jpeg(rng: random.Random) -> bytes:
    pixels = rng.randbytes(_IMAGE_SIDE * _IMAGE_SIDE * 3)
    image = Image.frombytes("RGB", (_IMAGE_SIDE, _IMAGE_SIDE), pixels)
    buffer = io.BytesIO()
    image.save(buffer, format="JPEG", quality=90)
    return buffer.getvalue()


def _planted_blob(app_index: int, types: frozenset[MetadataType]) -> bytes:
    return build_planted_exif(
        datetime="2020:01:15 12:30:45" if MetadataType.DATETIME in types else None,
        make="AuditPhone" if MetadataType.SMARTPHONE_BRAND in types else None,
        model="AP-1" if MetadataType.SMARTPHONE_MODEL in types else None,
        serial=f"SN{app_index:06d}" if MetadataType.DEVICE_SERIAL_NUMBER in types else None,
        gps=(37.7749, -122.4194) if MetadataType.GPS in types else None,
    )


def _write_apk(path: Path, package_name: str, gate_passes: bool) -> None:
    permissions = _GATE_PERMISSIONS if gate_passes else (READ_STORAGE, WRITE_STORAGE)
    manifest = build_manifest(package_name, permissions, ("image/*",))
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as archive:
        info = zipfile.ZipInfo("AndroidManifest.xml", date_time=_ZIP_DATE)
        archive.writestr(info, manifest)


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def synthesize_corpus(spec: SyntheticCorpusSpec, out_dir) -> CorpusManifest:
    """Generate the corpus under out_dir and return its ground truth.

    Leaky apps are chosen by exact quota, round(leak_rate * app_count), not
    independent draws, so corpus-level fractions are exact. A leaky app whose
    retention draws all come up empty is forced to retain one category so the
    leaky count stays exact. Gate-failing apps are drawn from the clean
    remainder.
    """
    root = Path(out_dir)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create corpus directory {out_dir}: {exc}") from exc

    quota = round(spec.leak_rate * spec.app_count)
    if spec.gate_fail_count > spec.app_count - quota:
        raise ValueError("gate_fail_count exceeds the number of clean apps")

    rng = random.Random(spec.seed)
    leaky = set(rng.sample(range(spec.app_count), quota)) if quota else set()
    clean_pool = [i for i in range(spec.app_count) if i not in leaky]
    gate_fail = (
        set(rng.sample(clean_pool, spec.gate_fail_count))
        if spec.gate_fail_count
        else set()
    )

    apps: list[AppTruth] = []
    retention = {t: spec.per_type_retention.get(t, DEFAULT_RETENTION[t]) for t in ALL_TYPES}
    try:
        for index in range(spec.app_count):
            app_id = f"app{index:04d}"
            app_dir = root / app_id
            app_dir.mkdir(exist_ok=True)

            if index in leaky:
                retained = frozenset(
                    t for t in ALL_TYPES if rng.random() < retention[t]
                )
                if not retained:
                    retained = frozenset({rng.choice(ALL_TYPES)})
            else:
                retained = frozenset()

            gate_ok = index not in gate_fail
            _write_apk(app_dir / "app.apk", f"com.audit.sample.{app_id}", gate_ok)

            for rel, text in planted_sources(retained).items():
                _write_text(app_dir / rel, text)

            base = _base_jpeg(rng)
            capture = insert_exif_segment(base, _planted_blob(index, frozenset(ALL_TYPES)))
            (app_dir / "capture.jpg").write_bytes(capture)
            if retained:
                shared = insert_exif_segment(base, _planted_blob(index, retained))
            else:
                shared = strip_metadata(capture)
            (app_dir / "shared.jpg").write_bytes(shared)

            if gate_ok:
                expected = {
                    t: "retained" if t in retained else "removed" for t in ALL_TYPES
                }
            else:
                expected = {t: "unknown" for t in ALL_TYPES}
            apps.append(
                AppTruth(
                    app_id=app_id,
                    directory=app_id,
                    gate_expected=gate_ok,
                    expected=expected,
                    retained_types=retained,
                )
            )

        knowledge_lines = [
            json.dumps(record, sort_keys=True) for record in _knowledge_records()
        ]
        (root / KNOWLEDGE_NAME).write_text(
            "\n".join(knowledge_lines) + "\n", encoding="utf-8"
        )

        manifest = CorpusManifest(
            app_count=spec.app_count,
            leak_rate=spec.leak_rate,
            seed=spec.seed,
            apps=tuple(apps),
        )
        _atomic_write(root / MANIFEST_NAME, manifest.to_json())
    except OSError as exc:
        raise IoFailure(f"cannot write corpus files: {exc}") from exc
    return manifest


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def parse_corpus_spec(text: str) -> SyntheticCorpusSpec:
    """Parse a corpus spec from key/value lines.

    Keys: app_count (required), leak_rate (required), seed, gate_fail_count,
    and retention.<TypeName> overrides, e.g. `retention.Gps = 0.5`. Comments
    start with '#'.
    """
    from .errors import ConfigError

    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()

    try:
        app_count = int(values.pop("app_count"))
        leak_rate = float(values.pop("leak_rate"))
    except KeyError as exc:
        raise ConfigError(f"corpus spec is missing {exc.args[0]}") from exc
    except ValueError as exc:
        raise ConfigError(f"bad corpus spec value: {exc}") from exc

    seed = int(values.pop("seed", "0"))
    gate_fail_count = int(values.pop("gate_fail_count", "0"))
    retention = dict(DEFAULT_RETENTION)
    for key in list(values):
        if key.startswith("retention."):
            name = key.split(".", 1)[1]
            try:
                retention[MetadataType(name)] = float(values.pop(key))
            except ValueError as exc:
                raise ConfigError(f"bad retention override {key!r}: {exc}") from exc
    if values:
        raise ConfigError(f"unknown corpus spec keys: {sorted(values)}")
    try:
        return SyntheticCorpusSpec(
            app_count=app_count,
            leak_rate=leak_rate,
            per_type_retention=retention,
            seed=seed,
            gate_fail_count=gate_fail_count,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_knowledge(corpus_root) -> list[dict[str, str]]:
    """The labeled snippet records of a generated corpus, for indexing."""
    path = Path(corpus_root) / KNOWLEDGE_NAME
    records = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            records.append(json.loads(line))
    return records
