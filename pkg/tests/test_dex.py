"""DEX build/parse round trip and reference scanning tests."""

import hashlib
import struct
import zipfile
import zlib

import pytest

from exifaudit.apk import open_package
from exifaudit.dex import (
    DexClassSpec,
    DexMethodSpec,
    build_dex,
    iter_method_references,
    parse_dex,
    scan_dex_bytes,
    scan_dex_references,
)
from exifaudit.errors import MalformedDex, NoDexEntries
from exifaudit.extract import DEFAULT_CATALOG
from exifaudit.metadata import MetadataType

EXIF_CLASS = "Landroidx/exifinterface/media/ExifInterface;"

SAMPLE = [
    DexClassSpec(
        descriptor="Lcom/app/Share;",
        methods=(
            DexMethodSpec(
                name="post",
                invokes=((EXIF_CLASS, "getLatLong"), ("Lcom/app/Net;", "send")),
            ),
            DexMethodSpec(
                name="readStamp",
                field_reads=((EXIF_CLASS, "TAG_DATETIME"),),
            ),
        ),
    ),
    DexClassSpec(
        descriptor="Lcom/app/Plain;",
        methods=(
            DexMethodSpec(name="noop", const_strings=("hello world",)),
        ),
    ),
]


@pytest.fixture(scope="module")
def sample_dex():
    return build_dex(SAMPLE)


def test_header_checksums_are_real(sample_dex):
    assert sample_dex[:4] == b"dex\n"
    checksum = struct.unpack_from("<I", sample_dex, 8)[0]
    assert checksum == zlib.adler32(sample_dex[12:])
    assert sample_dex[12:32] == hashlib.sha1(sample_dex[32:]).digest()
    file_size = struct.unpack_from("<I", sample_dex, 32)[0]
    assert file_size == len(sample_dex)


def test_round_trip_strings_and_methods(sample_dex):
    dex = parse_dex(sample_dex)
    assert "getLatLong" in dex.strings
    assert "hello world" in dex.strings
    refs = {r.method_name: r for r in iter_method_references(dex)}
    assert set(refs) == {"post", "readStamp", "noop"}
    assert (EXIF_CLASS, "getLatLong") in refs["post"].invoked
    assert (EXIF_CLASS, "TAG_DATETIME") in refs["readStamp"].fields_accessed
    assert refs["noop"].string_literals == ("hello world",)


def test_scan_matches_catalog_types(sample_dex):
    blocks = scan_dex_bytes("classes.dex", sample_dex, DEFAULT_CATALOG)
    by_id = {b.source_id: b for b in blocks}
    assert len(blocks) == 2
    share = by_id["classes.dex:Lcom/app/Share;->post"]
    assert share.implicated_types == frozenset({MetadataType.GPS})
    assert "getLatLong" in share.text
    stamp = by_id["classes.dex:Lcom/app/Share;->readStamp"]
    assert stamp.implicated_types == frozenset({MetadataType.DATETIME})


def test_scan_requires_dex_entries(tmp_path, gating_manifest):
    apk = tmp_path / "nodex.apk"
    with zipfile.ZipFile(apk, "w") as archive:
        archive.writestr("AndroidManifest.xml", gating_manifest)
    with pytest.raises(NoDexEntries):
        scan_dex_references(open_package(apk), DEFAULT_CATALOG)


def test_scan_walks_all_dex_entries(tmp_path, gating_manifest, sample_dex):
    second = build_dex(
        [
            DexClassSpec(
                descriptor="Lcom/app/More;",
                methods=(
                    DexMethodSpec(
                        name="copy",
                        invokes=((EXIF_CLASS, "getAttribute"),),
                        const_strings=("TAG_MAKE",),
                    ),
                ),
            )
        ]
    )
    apk = tmp_path / "two.apk"
    with zipfile.ZipFile(apk, "w") as archive:
        archive.writestr("AndroidManifest.xml", gating_manifest)
        archive.writestr("classes.dex", sample_dex)
        archive.writestr("classes2.dex", second)
    blocks = scan_dex_references(open_package(apk), DEFAULT_CATALOG)
    sources = {b.source_id.split(":")[0] for b in blocks}
    assert sources == {"classes.dex", "classes2.dex"}
    more = [b for b in blocks if "More" in b.source_id]
    assert more and more[0].implicated_types == frozenset({MetadataType.SMARTPHONE_BRAND})


def test_bad_magic_rejected(sample_dex):
    broken = b"dey\n" + sample_dex[4:]
    with pytest.raises(MalformedDex):
        parse_dex(broken)


def test_truncation_rejected(sample_dex):
    with pytest.raises(MalformedDex):
        parse_dex(sample_dex[:60])
    with pytest.raises(MalformedDex):
        parse_dex(sample_dex[:-10])


def test_wrong_endian_tag_rejected(sample_dex):
    broken = bytearray(sample_dex)
    struct.pack_into("<I", broken, 0x28, 0x78563412)
    with pytest.raises(MalformedDex):
        parse_dex(bytes(broken))


def test_build_is_deterministic():
    assert build_dex(SAMPLE) == build_dex(SAMPLE)


def test_mutf8_supplementary_characters_round_trip():
    spec = [
        DexClassSpec(
            descriptor="Lcom/app/U;",
            methods=(DexMethodSpec(name="emoji", const_strings=("pin \U0001f4cd here",)),),
        )
    ]
    dex = parse_dex(build_dex(spec))
    assert "pin \U0001f4cd here" in dex.strings
