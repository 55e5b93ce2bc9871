"""Summarization backends: a deterministic rule oracle and a remote client.

The oracle exists so the whole pipeline can run and be tested offline with
answers that are right by construction: it applies a fixed rule table to the
code in the prompt and writes the same analysis every time. The remote
backend speaks the common chat-completion wire shape (JSON messages in,
choices out) with deterministic decoding requested, a bearer token taken
from an environment variable, and bounded retries with exponential backoff.

Rule table applied per metadata category, in precedence order:

    1. a setAttribute(<category tag>, null) call with a saveAttributes call
       after it means the category is removed;
    2. otherwise a read of the category (getAttribute on its tag, or its
       typed read method) followed later by an upload-family keyword means
       it is retained;
    3. otherwise the code says nothing about the category: unknown.
"""

from __future__ import annotations

import re
import threading
import time
from dataclasses import dataclass
import os

import requests

from .errors import BackendRejected, BackendTimeout
from .metadata import ALL_TYPES, MetadataType
from .prompts import PromptBundle
from .templates import PROMPT_SEPARATOR, SUMMARY_MARKER

ORACLE_BACKEND_ID = "oracle:rules-v1"

DECISION_REMOVED = "removed"
DECISION_RETAINED = "retained"
DECISION_UNKNOWN = "unknown"

# Tag-constant fragments per category, matched case-sensitively inside
# getAttribute/setAttribute argument lists.
_TAG_FRAGMENTS: dict[MetadataType, tuple[str, ...]] = {
    MetadataType.DATETIME: ("TAG_DATETIME",),
    MetadataType.SMARTPHONE_BRAND: ("TAG_MAKE",),
    MetadataType.SMARTPHONE_MODEL: ("TAG_MODEL",),
    MetadataType.DEVICE_SERIAL_NUMBER: ("TAG_BODY_SERIAL_NUMBER", "BodySerialNumber"),
    MetadataType.GPS: ("TAG_GPS_",),
}

# Case-insensitive read-method names per category.
_READ_METHODS: dict[MetadataType, tuple[str, ...]] = {
    MetadataType.DATETIME: ("getdatetime",),
    MetadataType.GPS: ("getlatlong", "getgps"),
    MetadataType.SMARTPHONE_BRAND: (),
    MetadataType.SMARTPHONE_MODEL: (),
    MetadataType.DEVICE_SERIAL_NUMBER: (),
}

_UPLOAD_MARKERS = ("upload", "send(", "post(", "http", "enqueue", "socket", "transmit")

_SET_CALL = re.compile(r"setAttribute\s*\(([^()]*)\)", re.IGNORECASE)
_GET_CALL = re.compile(r"getAttribute\s*\(([^()]*)\)", re.IGNORECASE)
_NULL_ARG = re.compile(r",\s*null\s*$", re.IGNORECASE)


def _analyze_category(code: str, lowered: str, mtype: MetadataType) -> tuple[str, str]:
    """Apply the rule table to one category; returns (decision, reason)."""
    tags = _TAG_FRAGMENTS[mtype]

    for match in _SET_CALL.finditer(code):
        args = match.group(1)
        if any(tag in args for tag in tags) and _NULL_ARG.search(args):
            if "saveattributes" in lowered[match.end():]:
                return (
                    DECISION_REMOVED,
                    "the tag is nulled with setAttribute and written back"
                    " with saveAttributes",
                )

    read_at = -1
    for match in _GET_CALL.finditer(code):
        if any(tag in match.group(1) for tag in tags):
            read_at = match.start()
            break
    if read_at < 0:
        for method in _READ_METHODS[mtype]:
            at = lowered.find(method)
            if at != -1:
                read_at = at
                break
    if read_at >= 0:
        tail = lowered[read_at:]
        if any(marker in tail for marker in _UPLOAD_MARKERS):
            return (
                DECISION_RETAINED,
                "the value is read and reaches an upload call with no strip",
            )

    return (DECISION_UNKNOWN, "the code does not touch this category")


def _user_part(final_prompt: str) -> str:
    """The content after the last separator line; the whole prompt if none."""
    if PROMPT_SEPARATOR in final_prompt:
        return final_prompt.rsplit(PROMPT_SEPARATOR, 1)[1]
    return final_prompt


_ANALYSIS_LINE = re.compile(
    r"^- (?P<name>\w+): (?P<decision>removed|retained|unknown)", re.MULTILINE
)


def oracle_analysis(code: str) -> str:
    """Deterministic stage-one response: one finding line per category."""
    lowered = code.lower()
    lines = ["metadata handling analysis"]
    for mtype in ALL_TYPES:
        decision, reason = _analyze_category(code, lowered, mtype)
        lines.append(f"- {mtype.value}: {decision}; {reason}")
    return "\n".join(lines)


def oracle_summary(analysis_text: str) -> str:
    """Deterministic stage-two response: the JSON the schema describes."""
    import json

    verdict: dict[str, str] = {}
    for match in _ANALYSIS_LINE.finditer(analysis_text):
        name, decision = match.group("name"), match.group("decision")
        if any(t.value == name for t in ALL_TYPES):
            verdict[name] = decision
    retained = sorted(name for name, d in verdict.items() if d == DECISION_RETAINED)
    if retained:
        rationale = (
            ", ".join(retained) + " are read and reach an upload call without a strip"
            if len(retained) > 1
            else retained[0] + " is read and reaches an upload call without a strip"
        )
    else:
        rationale = "no category shows retention evidence"
    return json.dumps({"verdict": verdict, "rationale": rationale}, sort_keys=True)


@dataclass(frozen=True)
class RawResponse:
    """What a backend answered, with latency and token counts when known."""

    text: str
    backend_id: str
    latency_s: float
    prompt_tokens: int | None = None
    completion_tokens: int | None = None


@dataclass(frozen=True)
class BackendConfig:
    """Which backend to talk to and how patiently."""

    kind: str = "oracle"  # "oracle" | "remote"
    endpoint: str = ""
    model: str = ""
    token_env: str = "AUDITOR_LLM_TOKEN"
    timeout_s: float = 30.0
    max_retries: int = 3
    backoff_s: float = 1.0
    max_in_flight: int = 4


class OracleBackend:
    """Pure function of (final prompt, rule table); no I/O, no state."""

    backend_id = ORACLE_BACKEND_ID

    def __init__(self, config: BackendConfig | None = None):
        self.config = config or BackendConfig(kind="oracle")

    def invoke(self, bundle: PromptBundle) -> RawResponse:
        started = time.perf_counter()
        content = _user_part(bundle.final_prompt)
        if SUMMARY_MARKER in bundle.final_prompt.rsplit(PROMPT_SEPARATOR, 1)[0]:
            text = oracle_summary(content)
        else:
            text = oracle_analysis(content)
        return RawResponse(
            text=text,
            backend_id=self.backend_id,
            latency_s=time.perf_counter() - started,
        )


class RemoteBackend:
    """Chat-completion client with retry, backoff, and an in-flight cap."""

    def __init__(self, config: BackendConfig):
        if not config.endpoint:
            raise BackendRejected("remote backend requires an endpoint")
        self.config = config
        self.backend_id = f"remote:{config.model or config.endpoint}"
        self._slots = threading.Semaphore(max(1, config.max_in_flight))

    def invoke(self, bundle: PromptBundle) -> RawResponse:
        token = os.environ.get(self.config.token_env, "")
        if not token:
            raise BackendRejected(
                f"auth token environment variable {self.config.token_env} is not set"
            )
        payload = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": bundle.final_prompt}],
            "temperature": 0,
        }
        headers = {"Authorization": f"Bearer {token}"}
        started = time.perf_counter()
        last_error: Exception | None = None
        with self._slots:
            for attempt in range(self.config.max_retries):
                if attempt:
                    time.sleep(self.config.backoff_s * (2 ** (attempt - 1)))
                try:
                    resp = requests.post(
                        self.config.endpoint,
                        json=payload,
                        headers=headers,
                        timeout=self.config.timeout_s,
                    )
                except (
                    requests.exceptions.Timeout,
                    requests.exceptions.ConnectionError,
                ) as exc:
                    last_error = exc
                    continue
                if resp.status_code in (429,) or resp.status_code >= 500:
                    last_error = BackendRejected(
                        f"backend answered {resp.status_code}", body=resp.text
                    )
                    continue
                if resp.status_code < 200 or resp.status_code >= 300:
                    raise BackendRejected(
                        f"backend refused the request with {resp.status_code}",
                        body=resp.text,
                    )
                return self._parse(resp, started)
        raise BackendTimeout(
            f"backend unavailable after {self.config.max_retries} attempts:"
            f" {last_error}"
        )

    def _parse(self, resp, started: float) -> RawResponse:
        try:
            body = resp.json()
            text = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendRejected(
                f"backend response not in chat-completion shape: {exc}",
                body=resp.text,
            ) from exc
        usage = body.get("usage") or {}
        return RawResponse(
            text=text,
            backend_id=self.backend_id,
            latency_s=time.perf_counter() - started,
            prompt_tokens=usage.get("prompt_tokens"),
            completion_tokens=usage.get("completion_tokens"),
        )


def make_backend(config: BackendConfig):
    if config.kind == "oracle":
        return OracleBackend(config)
    if config.kind == "remote":
        return RemoteBackend(config)
    raise BackendRejected(f"unknown backend kind {config.kind!r}")


def invoke_backend(bundle: PromptBundle, backend) -> RawResponse:
    """Send an assembled prompt to a backend (instance or config).

    An empty final prompt is rejected locally; nothing is sent for it.
    """
    if not bundle.final_prompt.strip():
        raise BackendRejected("refusing to send an empty final prompt")
    if isinstance(backend, BackendConfig):
        backend = make_backend(backend)
    return backend.invoke(bundle)
