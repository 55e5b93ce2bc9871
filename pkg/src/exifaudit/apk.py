"""APK container access and the permission/intent gate.

The gate reproduces the funnel that narrows a large app population down to
the ones worth auditing: an app must request storage read, storage write,
and network permissions, and must declare at least one intent filter that
accepts images. An app with no intent-filter data elements fails closed; we
never guess about undeclared share surfaces.
"""

from __future__ import annotations

import zipfile
from dataclasses import dataclass, field
from pathlib import Path

from .axml import ManifestInfo
from .errors import MissingManifest, NotAnArchive

MANIFEST_ENTRY = "AndroidManifest.xml"


@dataclass
class ApkPackage:
    """An opened APK: entry listing plus eagerly-read manifest bytes.

    Only the manifest is decompressed at open time; any other entry is read
    on demand through read_entry so large packages stay cheap to gate.
    """

    path: Path
    entries: tuple[str, ...]
    manifest_bytes: bytes

    def read_entry(self, name: str) -> bytes:
        with zipfile.ZipFile(self.path) as zf:
            return zf.read(name)


def open_package(path) -> ApkPackage:
    """Open an APK (a ZIP container) and pull out its manifest bytes."""
    path = Path(path)
    try:
        zf = zipfile.ZipFile(path)
    except (zipfile.BadZipFile, OSError) as exc:
        raise NotAnArchive(f"{path} is not a readable ZIP archive: {exc}") from exc
    with zf:
        names = tuple(zf.namelist())
        if MANIFEST_ENTRY not in names:
            raise MissingManifest(f"{path} has no {MANIFEST_ENTRY} entry")
        manifest = zf.read(MANIFEST_ENTRY)
    return ApkPackage(path=path, entries=names, manifest_bytes=manifest)


@dataclass(frozen=True)
class PermissionGroup:
    """One required capability; any synonym satisfies it, the canonical name
    is what reports show when it is missing."""

    canonical: str
    synonyms: frozenset[str]


@dataclass(frozen=True)
class GatePolicy:
    """Named set of required permission groups for the audit gate."""

    name: str
    required: tuple[PermissionGroup, ...]


def _group(canonical: str, *extra: str) -> PermissionGroup:
    return PermissionGroup(canonical=canonical, synonyms=frozenset((canonical, *extra)))


READ_STORAGE = "android.permission.READ_EXTERNAL_STORAGE"
WRITE_STORAGE = "android.permission.WRITE_EXTERNAL_STORAGE"
INTERNET = "android.permission.INTERNET"

STRICT_POLICY = GatePolicy(
    name="strict",
    required=(
        _group(READ_STORAGE),
        _group(WRITE_STORAGE),
        _group(INTERNET),
    ),
)

# Storage access was split per media type in later platform versions; the
# relaxed policy accepts the image-scoped permission as a read synonym.
MODERN_POLICY = GatePolicy(
    name="modern",
    required=(
        _group(READ_STORAGE, "android.permission.READ_MEDIA_IMAGES"),
        _group(WRITE_STORAGE),
        _group(INTERNET),
    ),
)

POLICIES = {p.name: p for p in (STRICT_POLICY, MODERN_POLICY)}


@dataclass(frozen=True)
class GateDecision:
    """Outcome of the gate with enough detail to audit the decision itself."""

    passes: bool
    missing_permissions: frozenset[str]
    image_share_supported: bool
    reasons: tuple[str, ...] = field(default=())


def _accepts_images(mime: str) -> bool:
    return mime == "image/*" or mime.startswith("image/") or mime == "*/*"


def gate_filter(manifest: ManifestInfo, policy: GatePolicy = STRICT_POLICY) -> GateDecision:
    """Decide whether an app enters the audit under the given policy.

    passes is true exactly when every required permission group is satisfied
    and some intent-filter data element accepts images. reasons spell out
    every failed condition; an empty reason list accompanies a pass.
    """
    missing = frozenset(
        group.canonical
        for group in policy.required
        if not (group.synonyms & manifest.requested_permissions)
    )
    image_ok = any(_accepts_images(m) for m in manifest.intent_mime_types)

    reasons: list[str] = []
    for canonical in sorted(missing):
        reasons.append(f"required permission not requested: {canonical}")
    if not image_ok:
        if manifest.intent_mime_types:
            reasons.append(
                "no intent filter accepts images (declared: "
                + ", ".join(sorted(manifest.intent_mime_types))
                + ")"
            )
        else:
            reasons.append("no intent-filter data elements declared; failing closed")

    return GateDecision(
        passes=not missing and image_ok,
        missing_permissions=missing,
        image_share_supported=image_ok,
        reasons=tuple(reasons),
    )
