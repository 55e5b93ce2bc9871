"""Audit pipeline for EXIF metadata retention in Android image-sharing apps.

The package covers the whole loop: open an APK and gate it on permissions
and share intents, pull metadata-handling code out of sources or DEX
bytecode, retrieve similar labeled snippets for prompt context, have a
backend decide per category whether metadata is removed or retained, and
aggregate per-app verdicts into corpus statistics. A laboratory half
parses, detects, and strips real EXIF data and synthesizes labeled corpora
so every stage can be verified against planted ground truth.
"""

from .apk import (
    GateDecision,
    GatePolicy,
    MODERN_POLICY,
    POLICIES,
    STRICT_POLICY,
    gate_filter,
    open_package,
)
from .axml import ManifestInfo, build_manifest, parse_binary_manifest
from .backend import (
    BackendConfig,
    OracleBackend,
    RawResponse,
    RemoteBackend,
    invoke_backend,
    make_backend,
)
from .config import AuditConfig, load_config
from .embedding import (
    DEFAULT_DIM,
    EMBEDDING_VERSION,
    EmbeddingVector,
    cosine_similarity,
    embed_text,
    rank_by_cosine,
)
from .errors import AuditError
from .exif import (
    ExifRecord,
    SensitiveFindings,
    detect_sensitive_types,
    parse_exif,
    strip_metadata,
)
from .extract import (
    CodeBlock,
    DEFAULT_CATALOG,
    KeywordCatalog,
    classify_block_keywords,
    extract_code_blocks,
    load_catalog,
)
from .dex import scan_dex_references
from .metadata import ALL_TYPES, MetadataType
from .pipeline import (
    AggregateReport,
    LeakReport,
    aggregate,
    evaluate_against_truth,
    run_audit,
)
from .prompts import (
    FslExampleSet,
    PromptBundle,
    build_fsl_prompt,
    build_rag_prompt,
    build_summary_prompt,
)
from .store import (
    CorpusRecord,
    RetrievalResult,
    VectorStore,
    index_corpus,
    load_store,
    retrieve_similar,
    save_store,
)
from .synth import CorpusManifest, SyntheticCorpusSpec, synthesize_corpus
from .templates import PROMPT_SEPARATOR, SUMMARY_MARKER, get_template
from .verdict import (
    Decision,
    EvaluationReport,
    Verdict,
    summarize_to_verdict,
)

__version__ = "0.1.0"

__all__ = [
    "ALL_TYPES",
    "AggregateReport",
    "AuditConfig",
    "AuditError",
    "BackendConfig",
    "CodeBlock",
    "CorpusManifest",
    "CorpusRecord",
    "DEFAULT_CATALOG",
    "DEFAULT_DIM",
    "Decision",
    "EMBEDDING_VERSION",
    "EmbeddingVector",
    "EvaluationReport",
    "ExifRecord",
    "FslExampleSet",
    "GateDecision",
    "GatePolicy",
    "KeywordCatalog",
    "LeakReport",
    "MODERN_POLICY",
    "ManifestInfo",
    "MetadataType",
    "OracleBackend",
    "POLICIES",
    "PROMPT_SEPARATOR",
    "PromptBundle",
    "RawResponse",
    "RemoteBackend",
    "RetrievalResult",
    "STRICT_POLICY",
    "SUMMARY_MARKER",
    "SensitiveFindings",
    "SyntheticCorpusSpec",
    "VectorStore",
    "Verdict",
    "aggregate",
    "build_fsl_prompt",
    "build_manifest",
    "build_rag_prompt",
    "build_summary_prompt",
    "classify_block_keywords",
    "cosine_similarity",
    "detect_sensitive_types",
    "embed_text",
    "evaluate_against_truth",
    "extract_code_blocks",
    "gate_filter",
    "get_template",
    "index_corpus",
    "invoke_backend",
    "load_catalog",
    "load_config",
    "load_store",
    "make_backend",
    "open_package",
    "parse_binary_manifest",
    "parse_exif",
    "rank_by_cosine",
    "retrieve_similar",
    "run_audit",
    "save_store",
    "scan_dex_references",
    "strip_metadata",
    "summarize_to_verdict",
    "synthesize_corpus",
]
