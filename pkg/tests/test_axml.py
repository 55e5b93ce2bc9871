"""Binary manifest encode/decode tests."""

import struct

import pytest

from exifaudit.axml import ANDROID_NS_URI, build_manifest, parse_binary_manifest
from exifaudit.errors import MalformedAxml, UnsupportedEncoding

PERMS = (
    "android.permission.INTERNET",
    "android.permission.READ_EXTERNAL_STORAGE",
)


def test_round_trip_utf16():
    blob = build_manifest("com.example.app", PERMS, ("image/*", "image/png"))
    info = parse_binary_manifest(blob)
    assert info.package_name == "com.example.app"
    assert info.requested_permissions == frozenset(PERMS)
    assert info.intent_mime_types == frozenset({"image/*", "image/png"})
    assert info.activity_count == 1


def test_round_trip_utf8():
    blob = build_manifest("org.utf8.pkg", PERMS, ("video/mp4",), utf8=True)
    info = parse_binary_manifest(blob)
    assert info.package_name == "org.utf8.pkg"
    assert info.requested_permissions == frozenset(PERMS)
    assert info.intent_mime_types == frozenset({"video/mp4"})


def test_encodings_differ_but_agree():
    a = build_manifest("com.x", PERMS, ("image/*",), utf8=False)
    b = build_manifest("com.x", PERMS, ("image/*",), utf8=True)
    assert a != b
    assert parse_binary_manifest(a) == parse_binary_manifest(b)


def test_empty_manifest():
    info = parse_binary_manifest(build_manifest("com.min", (), ()))
    assert info.requested_permissions == frozenset()
    assert info.intent_mime_types == frozenset()


def test_multiple_activities_counted():
    blob = build_manifest("com.multi", (), ("image/*",), activity_count=3)
    assert parse_binary_manifest(blob).activity_count == 3


def test_build_is_deterministic():
    assert build_manifest("com.d", PERMS, ("image/*",)) == build_manifest(
        "com.d", PERMS, ("image/*",)
    )


def test_permission_order_does_not_matter():
    assert build_manifest("com.o", PERMS, ()) == build_manifest(
        "com.o", tuple(reversed(PERMS)), ()
    )


def test_not_axml_rejected():
    with pytest.raises(MalformedAxml):
        parse_binary_manifest(b"<?xml version=\"1.0\"?><manifest/>")


def test_truncated_document_rejected():
    blob = build_manifest("com.trunc", PERMS, ("image/*",))
    with pytest.raises(MalformedAxml):
        parse_binary_manifest(blob[: len(blob) // 2])


def test_unknown_string_pool_flag_rejected():
    blob = bytearray(build_manifest("com.flag", (), ()))
    # string pool header directly follows the 8-byte document header; its
    # flags word sits 16 bytes into the chunk
    flags_off = 8 + 16
    flags = struct.unpack_from("<I", blob, flags_off)[0]
    struct.pack_into("<I", blob, flags_off, flags | 0x40)
    with pytest.raises(UnsupportedEncoding):
        parse_binary_manifest(bytes(blob))


def test_whitespace_permission_dropped():
    # a permission value of only spaces is not a valid permission name
    blob = build_manifest("com.ws", ("  ",), ())
    assert parse_binary_manifest(blob).requested_permissions == frozenset()


def test_bad_mime_shapes_dropped():
    blob = build_manifest("com.badmime", (), ("noslash", "a/b/c", "/half", "half/"))
    assert parse_binary_manifest(blob).intent_mime_types == frozenset()


def test_namespace_uri_constant():
    assert ANDROID_NS_URI == "http://schemas.android.com/apk/res/android"
