"""The five sensitive metadata categories the audit tracks.

The serialized names are stable strings used in reports, catalogs and verdict
JSON; changing them would break stored artifacts, so they are part of the
package's file-format contract.
"""

from __future__ import annotations

import enum


class MetadataType(enum.Enum):
    DATETIME = "DateTime"
    SMARTPHONE_MODEL = "SmartphoneModel"
    SMARTPHONE_BRAND = "SmartphoneBrand"
    DEVICE_SERIAL_NUMBER = "DeviceSerialNumber"
    GPS = "Gps"

    def __str__(self) -> str:  # report files use the stable value
        return self.value

    @classmethod
    def from_name(cls, name: str) -> "MetadataType":
        for member in cls:
            if member.value == name:
                return member
        raise ValueError(f"unknown metadata type name: {name!r}")


ALL_TYPES: tuple[MetadataType, ...] = tuple(MetadataType)
