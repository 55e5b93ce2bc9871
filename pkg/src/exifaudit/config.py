"""Audit configuration: a small key/value file parsed into one dataclass.

Format: one `key = value` per line, `#` starts a comment, blank lines are
ignored. Unknown keys are errors so typos cannot silently fall back to
defaults. Paths are resolved relative to the config file's directory and
must exist at load time.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .apk import POLICIES
from .backend import BackendConfig
from .embedding import DEFAULT_DIM
from .errors import ConfigError
from .extract import DEFAULT_MAX_BLOCK_CHARS
from .prompts import DEFAULT_MAX_PROMPT_CHARS


@dataclass(frozen=True)
class AuditConfig:
    gate_policy: str = "strict"
    catalog_path: str = ""  # empty means the built-in default catalog
    store_path: str = ""  # empty means no retrieval context
    dim: int = DEFAULT_DIM
    top_k: int = 3
    min_similarity: float = 0.0
    backend: str = "oracle"
    endpoint: str = ""
    model: str = ""
    token_env: str = "AUDITOR_LLM_TOKEN"
    timeout_s: float = 30.0
    max_retries: int = 3
    backoff_s: float = 1.0
    max_in_flight: int = 4
    analysis_template: str = "rag-exif-audit-v1"
    summary_template: str = "verdict-summary-v1"
    max_block_chars: int = DEFAULT_MAX_BLOCK_CHARS
    max_prompt_chars: int = DEFAULT_MAX_PROMPT_CHARS
    parallelism: int = 4
    seed: int = 0
    out_dir: str = ""

    def backend_config(self) -> BackendConfig:
        return BackendConfig(
            kind=self.backend,
            endpoint=self.endpoint,
            model=self.model,
            token_env=self.token_env,
            timeout_s=self.timeout_s,
            max_retries=self.max_retries,
            backoff_s=self.backoff_s,
            max_in_flight=self.max_in_flight,
        )


_INT_KEYS = {"dim", "top_k", "max_retries", "max_in_flight", "max_block_chars",
             "max_prompt_chars", "parallelism", "seed"}
_FLOAT_KEYS = {"min_similarity", "timeout_s", "backoff_s"}
_POSITIVE = {"dim", "top_k", "timeout_s", "backoff_s", "max_in_flight",
             "max_prompt_chars", "parallelism", "max_retries"}
_PATH_KEYS = {"catalog_path", "store_path"}


def parse_config_text(text: str, base_dir: Path | None = None) -> AuditConfig:
    known = {f.name for f in fields(AuditConfig)}
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            if key in _INT_KEYS:
                values[key] = int(value)
            elif key in _FLOAT_KEYS:
                values[key] = float(value)
            else:
                values[key] = value
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc

    for key in _PATH_KEYS & set(values):
        if values[key]:
            path = Path(values[key])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            if not path.exists():
                raise ConfigError(f"{key} does not exist: {path}")
            values[key] = str(path)

    config = AuditConfig(**values)
    _validate(config)
    return config


def _validate(config: AuditConfig) -> None:
    for key in _POSITIVE:
        if getattr(config, key) <= 0:
            raise ConfigError(f"{key} must be positive")
    if config.max_block_chars < 64:
        raise ConfigError("max_block_chars must be at least 64")
    if not -1.0 <= config.min_similarity <= 1.0:
        raise ConfigError("min_similarity must lie in [-1, 1]")
    if config.gate_policy not in POLICIES:
        raise ConfigError(
            f"unknown gate_policy {config.gate_policy!r};"
            f" known: {sorted(POLICIES)}"
        )
    if config.backend not in ("oracle", "remote"):
        raise ConfigError(f"backend must be 'oracle' or 'remote', not {config.backend!r}")
    if config.backend == "remote" and not config.endpoint:
        raise ConfigError("remote backend requires an endpoint")


def load_config(path) -> AuditConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, base_dir=path.parent)
