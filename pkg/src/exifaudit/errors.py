"""Exception types raised across the audit pipeline.

Every error the package raises deliberately derives from AuditError so callers
can catch one base class at the CLI boundary. The leaf names mirror the failure
they describe; modules only raise the leaves that belong to their stage.
"""

from __future__ import annotations


class AuditError(Exception):
    """Base class for all errors raised by this package."""


# --- package / manifest ingestion ---------------------------------------

class NotAnArchive(AuditError):
    """The input file is not a readable ZIP container."""


class MissingManifest(AuditError):
    """The archive has no AndroidManifest.xml entry."""


class MalformedAxml(AuditError):
    """Binary manifest bytes violate the chunk structure they declare."""


class UnsupportedEncoding(AuditError):
    """String pool declares flags outside the 8-bit/16-bit encodings."""


# --- code extraction -----------------------------------------------------

class MalformedDex(AuditError):
    """DEX header magic or size/offset checks failed."""


class NoDexEntries(AuditError):
    """The package contains no classes*.dex entry to scan."""


class UnreadableSource(AuditError):
    """A source file could not be read; reported per file, never fatal."""


# --- vector store --------------------------------------------------------

class DuplicateId(AuditError):
    """Two corpus records share an id."""


class VersionMismatch(AuditError):
    """Store file embedding version or dimension differs from expectation."""


class CorruptStore(AuditError):
    """Store file is truncated or fails its checksum."""


# --- prompt engine / backends -------------------------------------------

class UnknownTemplate(AuditError):
    """No template registered under the requested id."""


class PromptOverflow(AuditError):
    """User prompt cannot fit the prompt budget even with no context."""


class BackendTimeout(AuditError):
    """Backend did not answer within the deadline after all retries."""


class BackendRejected(AuditError):
    """Backend refused the request; the response body is preserved."""

    def __init__(self, message: str, body: str = ""):
        super().__init__(message)
        self.body = body


class UnparseableSummary(AuditError):
    """Summary response failed schema validation twice."""


# --- EXIF laboratory -----------------------------------------------------

class NotJpeg(AuditError):
    """Input bytes do not start with a JPEG start-of-image marker."""


class MalformedExif(AuditError):
    """EXIF segment declares offsets or sizes outside its own bounds."""


class IoFailure(AuditError):
    """Filesystem read or write failed while building a corpus."""


# --- configuration -------------------------------------------------------

class ConfigError(AuditError):
    """Audit configuration is missing, unreadable, or invalid."""
