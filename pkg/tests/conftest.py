import io
import random

import pytest
from PIL import Image

from exifaudit.axml import build_manifest
from exifaudit.exif import build_planted_exif, insert_exif_segment

FULL_PERMISSIONS = (
    "android.permission.READ_EXTERNAL_STORAGE",
    "android.permission.WRITE_EXTERNAL_STORAGE",
    "android.permission.INTERNET",
)


def make_base_jpeg(seed=0, side=16):
    rng = random.Random(seed)
    image = Image.frombytes("RGB", (side, side), rng.randbytes(side * side * 3))
    buffer = io.BytesIO()
    image.save(buffer, format="JPEG", quality=90)
    return buffer.getvalue()


def make_tagged_jpeg(seed=0, datetime=None, make=None, model=None, serial=None, gps=None):
    blob = build_planted_exif(
        datetime=datetime, make=make, model=model, serial=serial, gps=gps
    )
    return insert_exif_segment(make_base_jpeg(seed), blob)


@pytest.fixture
def base_jpeg():
    return make_base_jpeg()


@pytest.fixture
def gating_manifest():
    """Binary manifest that passes the strict gate."""
    return build_manifest("com.sample.pass", FULL_PERMISSIONS, ("image/*",))
