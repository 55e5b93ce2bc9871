"""Structured verdicts: summarize a long analysis response into typed decisions.

The summary stage exists because stage-one responses are long prose. It asks
the backend to answer with exactly one JSON object conforming to the schema
shipped in data/verdict_schema.json, validates that answer, and converts it
into a Verdict covering every metadata category. A response that fails
validation is re-asked once; a second failure raises UnparseableSummary.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass
from importlib import resources

import jsonschema

from .backend import RawResponse, invoke_backend
from .errors import UnparseableSummary
from .metadata import ALL_TYPES, MetadataType
from .prompts import DEFAULT_MAX_PROMPT_CHARS, build_summary_prompt

SUMMARY_TEMPLATE_ID = "verdict-summary-v1"


class Decision(enum.Enum):
    REMOVED = "removed"
    RETAINED = "retained"
    UNKNOWN = "unknown"

    def __str__(self) -> str:
        return self.value


def _load_schema() -> dict:
    text = resources.files("exifaudit.data").joinpath("verdict_schema.json").read_text()
    return json.loads(text)


_SCHEMA = _load_schema()
_VALIDATOR = jsonschema.Draft202012Validator(_SCHEMA)


@dataclass(frozen=True)
class Verdict:
    """One app-or-block decision per metadata category, with provenance."""

    per_type: dict[MetadataType, Decision]
    rationale: str
    backend_id: str
    raw_response_digest: str
    template_id: str = SUMMARY_TEMPLATE_ID

    def __post_init__(self):
        if set(self.per_type) != set(ALL_TYPES):
            missing = {t.value for t in ALL_TYPES} - {t.value for t in self.per_type}
            raise ValueError(f"verdict must cover every metadata type; missing {missing}")
        if any(d is Decision.RETAINED for d in self.per_type.values()) and not self.rationale:
            raise ValueError("a verdict with retained entries needs a rationale")
        if not self.raw_response_digest.startswith("sha256:"):
            raise ValueError("raw_response_digest must be a sha256: checksum")

    @property
    def retained_types(self) -> frozenset[MetadataType]:
        return frozenset(
            t for t, d in self.per_type.items() if d is Decision.RETAINED
        )


@dataclass(frozen=True)
class EvaluationReport:
    """Match rate of produced verdicts against known labels."""

    total: int
    correct: int
    accuracy: float

    @classmethod
    def from_counts(cls, total: int, correct: int) -> "EvaluationReport":
        if correct > total or correct < 0 or total < 0:
            raise ValueError("correct must lie in [0, total]")
        return cls(total=total, correct=correct, accuracy=correct / total if total else 0.0)


def _digest(text: str) -> str:
    return "sha256:" + hashlib.sha256(text.encode("utf-8")).hexdigest()


def _extract_json_object(text: str) -> dict:
    """The outermost {...} span of the response, parsed.

    Backends are asked for exactly one JSON object but may wrap it in prose;
    everything before the first brace and after the last is ignored.
    """
    start = text.find("{")
    end = text.rfind("}")
    if start < 0 or end <= start:
        raise ValueError("no JSON object in response")
    parsed = json.loads(text[start : end + 1])
    if not isinstance(parsed, dict):
        raise ValueError("response JSON is not an object")
    return parsed


def _parse_summary(text: str) -> tuple[dict[MetadataType, Decision], str]:
    payload = _extract_json_object(text)
    _VALIDATOR.validate(payload)
    named = payload["verdict"]
    per_type = {
        t: Decision(named[t.value]) if t.value in named else Decision.UNKNOWN
        for t in ALL_TYPES
    }
    return per_type, payload["rationale"]


def summarize_to_verdict(
    response: RawResponse,
    backend,
    template_id: str = SUMMARY_TEMPLATE_ID,
    max_prompt_chars: int = DEFAULT_MAX_PROMPT_CHARS,
) -> Verdict:
    """Run the summary stage over a raw analysis response.

    `backend` may be a BackendConfig or an already-constructed backend
    instance. The digest recorded in the Verdict is of the analysis response
    being summarized, so a verdict can be traced back to the text it covers.
    """
    bundle = build_summary_prompt(
        response.text, template_id=template_id, max_prompt_chars=max_prompt_chars
    )
    last_error: Exception | None = None
    summary = None
    for _ in range(2):  # one initial ask plus one re-ask
        summary = invoke_backend(bundle, backend)
        try:
            per_type, rationale = _parse_summary(summary.text)
        except (ValueError, jsonschema.ValidationError) as exc:
            last_error = exc
            continue
        return Verdict(
            per_type=per_type,
            rationale=rationale,
            backend_id=summary.backend_id,
            raw_response_digest=_digest(response.text),
            template_id=template_id,
        )
    raise UnparseableSummary(
        f"summary response failed schema validation twice: {last_error}"
    )


def all_unknown_verdict(backend_id: str, reason: str) -> Verdict:
    """The verdict for an app that produced nothing to analyze."""
    return Verdict(
        per_type={t: Decision.UNKNOWN for t in ALL_TYPES},
        rationale=reason,
        backend_id=backend_id,
        raw_response_digest=_digest(""),
    )
