"""Package opening and permission/intent gate tests."""

import itertools
import zipfile

import pytest

from exifaudit.apk import (
    INTERNET,
    MODERN_POLICY,
    READ_STORAGE,
    STRICT_POLICY,
    WRITE_STORAGE,
    gate_filter,
    open_package,
)
from exifaudit.axml import build_manifest, parse_binary_manifest
from exifaudit.errors import MissingManifest, NotAnArchive

from conftest import FULL_PERMISSIONS


def write_apk(path, manifest_bytes, extra=()):
    with zipfile.ZipFile(path, "w") as archive:
        archive.writestr("AndroidManifest.xml", manifest_bytes)
        for name, data in extra:
            archive.writestr(name, data)


def gate(perms, mimes, policy=STRICT_POLICY):
    info = parse_binary_manifest(build_manifest("com.t", perms, mimes))
    return gate_filter(info, policy)


def test_open_package_reads_manifest(tmp_path, gating_manifest):
    apk = tmp_path / "a.apk"
    write_apk(apk, gating_manifest, extra=[("classes.dex", b"x")])
    package = open_package(apk)
    assert package.manifest_bytes == gating_manifest
    assert "classes.dex" in package.entries
    assert package.read_entry("classes.dex") == b"x"


def test_open_package_not_a_zip(tmp_path):
    bad = tmp_path / "b.apk"
    bad.write_bytes(b"MZ not a zip")
    with pytest.raises(NotAnArchive):
        open_package(bad)


def test_open_package_missing_file(tmp_path):
    with pytest.raises(NotAnArchive):
        open_package(tmp_path / "absent.apk")


def test_open_package_without_manifest(tmp_path):
    apk = tmp_path / "c.apk"
    with zipfile.ZipFile(apk, "w") as archive:
        archive.writestr("classes.dex", b"x")
    with pytest.raises(MissingManifest):
        open_package(apk)


def test_gate_passes_only_full_set_with_image():
    decision = gate(FULL_PERMISSIONS, ("image/*",))
    assert decision.passes
    assert decision.missing_permissions == frozenset()
    assert decision.image_share_supported
    assert decision.reasons == ()


def test_gate_truth_table_exhaustive():
    permission_pool = (READ_STORAGE, WRITE_STORAGE, INTERNET)
    passing = []
    for bits in itertools.product((False, True), repeat=3):
        perms = tuple(p for p, keep in zip(permission_pool, bits) if keep)
        for mimes in ((), ("application/pdf",), ("image/*",)):
            decision = gate(perms, mimes)
            if decision.passes:
                passing.append((perms, mimes))
    assert passing == [(permission_pool, ("image/*",))]


def test_gate_reports_missing_canonical_names():
    decision = gate((READ_STORAGE,), ("image/*",))
    assert not decision.passes
    assert decision.missing_permissions == frozenset({WRITE_STORAGE, INTERNET})
    assert len(decision.reasons) == 2


def test_gate_fail_closed_without_mime_data():
    decision = gate(FULL_PERMISSIONS, ())
    assert not decision.passes
    assert not decision.image_share_supported
    assert any("no" in r.lower() for r in decision.reasons)


@pytest.mark.parametrize(
    "mime,ok",
    [
        ("image/*", True),
        ("image/png", True),
        ("image/jpeg", True),
        ("*/*", True),
        ("application/pdf", False),
        ("video/mp4", False),
        ("text/*", False),
    ],
)
def test_gate_mime_matching(mime, ok):
    assert gate(FULL_PERMISSIONS, (mime,)).passes is ok


def test_modern_policy_accepts_media_images_permission():
    perms = (
        "android.permission.READ_MEDIA_IMAGES",
        WRITE_STORAGE,
        INTERNET,
    )
    assert not gate(perms, ("image/*",), STRICT_POLICY).passes
    assert gate(perms, ("image/*",), MODERN_POLICY).passes


def test_gate_default_policy_is_strict():
    info = parse_binary_manifest(build_manifest("com.d", FULL_PERMISSIONS, ("image/*",)))
    assert gate_filter(info).passes
