"""Prompt assembly: retrieved context or worked examples plus a user prompt.

Both builders obey the same law: the final prompt is the rendered context
followed by the separator line followed by the user prompt, verbatim and in
order. Trimming under a character budget only ever drops whole context items,
least-similar (or last-listed) first; the user prompt is never cut. When even
a context-free prompt cannot fit, assembly fails with PromptOverflow rather
than silently truncating what the backend sees.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import PromptOverflow
from .extract import CodeBlock
from .store import RetrievalResult
from .templates import PROMPT_SEPARATOR, get_template

DEFAULT_MAX_PROMPT_CHARS = 16000


@dataclass(frozen=True)
class PromptBundle:
    """A fully assembled prompt plus the pieces it was assembled from."""

    template_id: str
    user_prompt: str
    relevant_information: tuple[tuple[str, str], ...]  # (label, text), in order
    final_prompt: str
    dropped_context: int = 0


@dataclass(frozen=True)
class FslExampleSet:
    """A task description with worked input/label examples."""

    task_description: str
    examples: tuple[tuple[str, str], ...]  # (input text, label)


def _render(template_id: str, contexts: tuple[tuple[str, str], ...], task: str | None) -> str:
    template = get_template(template_id)
    header = template.header.format(task=task) if task is not None else template.header
    if not contexts:
        return header + template.empty_context
    parts = [header, template.context_heading]
    for label, text in contexts:
        parts.append(template.context_item.format(label=label, text=text))
    return "".join(parts)


def _assemble(
    template_id: str,
    contexts: tuple[tuple[str, str], ...],
    user_prompt: str,
    max_prompt_chars: int,
    task: str | None = None,
) -> PromptBundle:
    kept = list(contexts)
    while True:
        final = _render(template_id, tuple(kept), task) + PROMPT_SEPARATOR + user_prompt
        if len(final) <= max_prompt_chars:
            return PromptBundle(
                template_id=template_id,
                user_prompt=user_prompt,
                relevant_information=tuple(kept),
                final_prompt=final,
                dropped_context=len(contexts) - len(kept),
            )
        if not kept:
            raise PromptOverflow(
                f"user prompt of {len(user_prompt)} chars cannot fit the"
                f" {max_prompt_chars}-char budget even without context"
            )
        kept.pop()  # inputs arrive best-first, so the tail is least valuable


def build_rag_prompt(
    block: CodeBlock,
    retrieved: list[RetrievalResult],
    template_id: str = "rag-exif-audit-v1",
    max_prompt_chars: int = DEFAULT_MAX_PROMPT_CHARS,
) -> PromptBundle:
    """Assemble the analysis prompt for one code block.

    Retrieved records are embedded most-similar first; under budget pressure
    the least similar are dropped first.
    """
    contexts = tuple((r.record.label, r.record.text) for r in retrieved)
    return _assemble(template_id, contexts, block.text, max_prompt_chars)


def build_fsl_prompt(
    example_set: FslExampleSet,
    user_input: str,
    template_id: str = "fsl-labeling-v1",
    max_prompt_chars: int = DEFAULT_MAX_PROMPT_CHARS,
) -> PromptBundle:
    """Assemble a few-shot labeling prompt; examples keep their given order."""
    contexts = tuple((label, text) for text, label in example_set.examples)
    return _assemble(
        template_id,
        contexts,
        user_input,
        max_prompt_chars,
        task=example_set.task_description,
    )


def build_summary_prompt(
    analysis_text: str,
    template_id: str = "verdict-summary-v1",
    max_prompt_chars: int = DEFAULT_MAX_PROMPT_CHARS,
) -> PromptBundle:
    """Assemble the JSON-summary prompt over a prior analysis response."""
    return _assemble(template_id, (), analysis_text, max_prompt_chars)
