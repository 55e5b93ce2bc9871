"""Versioned prompt template registry.

Every prompt the pipeline sends is assembled from a registered template so a
verdict can always be traced back to the exact instruction text that produced
it (the template_id travels with the verdict). Ids are versioned; editing an
instruction means registering a new id, never mutating an old one.

Final prompts follow one assembly law: rendered context, then the separator
line below, then the user prompt, with context texts and the user prompt
embedded verbatim and in order.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import UnknownTemplate

# The fixed delimiter between assembled context and the user prompt.
PROMPT_SEPARATOR = "\n===== user input =====\n"

# Marker the summary template carries so a rule-driven backend can tell the
# summarize stage apart from the analysis stage by prompt content alone.
SUMMARY_MARKER = "Respond with exactly one JSON object"


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    header: str
    context_heading: str
    context_item: str  # format string over {label} and {text}
    empty_context: str


_REGISTRY: dict[str, PromptTemplate] = {}


def _register(template: PromptTemplate) -> PromptTemplate:
    _REGISTRY[template.template_id] = template
    return template


def get_template(template_id: str) -> PromptTemplate:
    try:
        return _REGISTRY[template_id]
    except KeyError:
        raise UnknownTemplate(
            f"no template registered as {template_id!r}; known: {sorted(_REGISTRY)}"
        ) from None


def registered_ids() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


RAG_AUDIT_V1 = _register(
    PromptTemplate(
        template_id="rag-exif-audit-v1",
        header=(
            "You are a careful Android code reviewer.\n"
            "Decide, for each image metadata category (DateTime, SmartphoneModel,\n"
            "SmartphoneBrand, DeviceSerialNumber, Gps), whether the code below\n"
            "removes it or retains it when an image leaves the device.\n"
            "Answer one line per category in the form\n"
            "'- <category>: removed|retained|unknown; <short reason>'.\n"
        ),
        context_heading="Labeled reference snippets, most similar first:\n",
        context_item="[{label}]\n{text}\n",
        empty_context="No reference snippets were retrieved for this input.\n",
    )
)

FSL_LABELING_V1 = _register(
    PromptTemplate(
        template_id="fsl-labeling-v1",
        header=(
            "Task: {task}\n"
            "Label the final input the same way the worked examples are labeled.\n"
            "Answer with the label only.\n"
        ),
        context_heading="Worked examples:\n",
        context_item="Input:\n{text}\nLabel: {label}\n",
        empty_context="No worked examples were provided.\n",
    )
)

VERDICT_SUMMARY_V1 = _register(
    PromptTemplate(
        template_id="verdict-summary-v1",
        header=(
            "You turn a written metadata-handling analysis into a machine-readable"
            " summary.\n"
            + SUMMARY_MARKER
            + ' of the shape {"verdict": {"<category>": "removed"|"retained"|"unknown"},'
            ' "rationale": "<short text>"} and nothing else.\n'
            "Categories: DateTime, SmartphoneModel, SmartphoneBrand,"
            " DeviceSerialNumber, Gps. Omit a category only if the analysis never"
            " mentions it.\n"
        ),
        context_heading="",
        context_item="[{label}]\n{text}\n",
        empty_context="",
    )
)
