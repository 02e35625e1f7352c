"""Prompt construction and concept-list response parsing.

Three template generations ship as package data: v1 is the bare task
statement with examples, v2 adds instruction paragraphs on singular forms,
everyday words, and person names, v3 pairs those instructions with a
worked example that carries a "Reason:" line.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .corpus import Sentence

log = logging.getLogger(__name__)

_VERSIONS = ("v1", "v2", "v3")
_EXAMPLE_PLACEHOLDER = "{in-context example}"
_SENTENCE_PLACEHOLDER = "{math_sentence}"
_ITEM_QUOTES = "\"'"
_WRAPPING_QUOTES = "\"'`‘’“”"


@dataclass(frozen=True)
class InContextExample:
    context: str
    concepts: tuple[str, ...]
    reason: str | None = None

    def render(self) -> str:
        items = ", ".join(_render_item(c) for c in self.concepts)
        text = f"Context: '{self.context}'\nConcepts: [{items}]"
        if self.reason:
            text += f"\nReason: {self.reason}"
        return text


@dataclass(frozen=True)
class PromptTemplate:
    version: str
    instruction_text: str
    in_context_examples: tuple[InContextExample, ...] = ()

    def __post_init__(self) -> None:
        if self.version not in _VERSIONS:
            raise ValueError(f"unknown template version {self.version!r}")
        if self.version == "v1" and any(e.reason for e in self.in_context_examples):
            raise ValueError("v1 examples must not carry reasons")
        if self.version == "v3" and not all(e.reason for e in self.in_context_examples):
            raise ValueError("v3 examples must all carry a reason")


@dataclass(frozen=True)
class LLMResponse:
    raw_text: str
    parsed_concepts: tuple[str, ...]
    parse_status: str  # ok | empty | unparseable


def _render_item(item: str) -> str:
    # Items holding an apostrophe switch to double quotes so the scanner
    # can recover them unambiguously.
    if "'" in item:
        return f'"{item}"'
    return f"'{item}'"


def _template_text(version: str) -> str:
    path = resources.files("mathcept").joinpath("data", "templates", f"{version}.txt")
    return path.read_text(encoding="utf-8")


def load_examples(path: str | Path) -> tuple[InContextExample, ...]:
    """Parse an example bank: blocks of Context/Concepts[/Reason] lines
    separated by blank lines."""
    text = Path(path).read_text(encoding="utf-8")
    return parse_example_bank(text)


def parse_example_bank(text: str) -> tuple[InContextExample, ...]:
    examples = []
    for block in re.split(r"\n\s*\n", text.strip()):
        lines = block.strip().splitlines()
        if not lines:
            continue
        context = None
        concepts: tuple[str, ...] = ()
        reason_lines: list[str] = []
        in_reason = False
        for line in lines:
            if line.startswith("Context:"):
                context = line[len("Context:"):].strip().strip("'\"")
                in_reason = False
            elif line.startswith("Concepts:"):
                parsed = parse_concepts(line)
                concepts = parsed.parsed_concepts
                in_reason = False
            elif line.startswith("Reason:"):
                reason_lines = [line[len("Reason:"):].strip()]
                in_reason = True
            elif in_reason:
                reason_lines.append(line.strip())
        if context is None:
            raise ValueError(f"example block missing 'Context:' line: {block!r}")
        examples.append(
            InContextExample(
                context=context,
                concepts=concepts,
                reason=" ".join(reason_lines) if reason_lines else None,
            )
        )
    return tuple(examples)


def _default_bank(version: str) -> tuple[InContextExample, ...]:
    name = "detailed.txt" if version == "v3" else "plain.txt"
    path = resources.files("mathcept").joinpath("data", "examples", name)
    return parse_example_bank(path.read_text(encoding="utf-8"))


def get_template(
    version: str, examples: tuple[InContextExample, ...] | None = None
) -> PromptTemplate:
    """Load a packaged template generation with its default example bank."""
    if version not in _VERSIONS:
        raise ValueError(f"unknown template version {version!r}; expected one of {_VERSIONS}")
    return PromptTemplate(
        version=version,
        instruction_text=_template_text(version),
        in_context_examples=_default_bank(version) if examples is None else examples,
    )


def build_prompt(sentence: Sentence, template: PromptTemplate) -> str:
    """Render the prompt for one sentence; deterministic, ends with
    "Concepts:" so the model completes the list."""
    if not sentence.text.strip():
        raise ValueError("sentence text is empty")
    if not template.in_context_examples:
        log.warning("template %s has zero in-context examples", template.version)
    examples = "\n\n".join(e.render() for e in template.in_context_examples)
    text = template.instruction_text
    text = text.replace(_EXAMPLE_PLACEHOLDER, examples)
    text = text.replace(_SENTENCE_PLACEHOLDER, f"'{sentence.text}'")
    return text.rstrip("\n")


def parse_concepts(raw: str) -> LLMResponse:
    """Recover the concept list from model output.

    Finds the first bracketed list (after an optional "Concepts:" label),
    reads single- or double-quoted items with a scanner that only closes a
    quote when a comma or the closing bracket follows, and ignores trailing
    prose such as a "Reason:" paragraph.
    """
    start = raw.find("[")
    if start == -1:
        return LLMResponse(raw, (), "unparseable")
    items, end = _scan_list(raw, start)
    if items is None:
        return LLMResponse(raw, (), "unparseable")
    if raw.find("[", end) != -1:
        log.warning("response contains multiple bracketed lists; using the first")
    cleaned = tuple(i for i in items if i)
    if not cleaned:
        return LLMResponse(raw, (), "empty")
    return LLMResponse(raw, cleaned, "ok")


def _clean_bare_item(item: str) -> str:
    # Bare (unquoted) items may carry stray wrapping quotes; quoted items
    # arrive with their delimiters already removed and stay verbatim.
    item = item.strip()
    while len(item) >= 2 and item[0] in _WRAPPING_QUOTES and item[-1] in _WRAPPING_QUOTES:
        item = item[1:-1].strip()
    return item


def _scan_list(text: str, start: int) -> tuple[list[str] | None, int]:
    """Scan from the "[" at `start`; return (items, index past "]")."""
    items: list[str] = []
    i = start + 1
    n = len(text)
    while True:
        while i < n and text[i].isspace():
            i += 1
        if i >= n:
            return None, i
        if text[i] == "]":
            return items, i + 1
        if text[i] in _ITEM_QUOTES:
            quote = text[i]
            i += 1
            piece = []
            while i < n:
                if text[i] == quote:
                    j = i + 1
                    while j < n and text[j].isspace():
                        j += 1
                    if j < n and text[j] in ",]":
                        break
                piece.append(text[i])
                i += 1
            if i >= n:
                return None, i
            items.append("".join(piece))
            i += 1
        else:
            piece = []
            while i < n and text[i] not in ",]":
                piece.append(text[i])
                i += 1
            if i >= n:
                return None, i
            bare = _clean_bare_item("".join(piece))
            if bare:
                items.append(bare)
        while i < n and text[i].isspace():
            i += 1
        if i < n and text[i] == ",":
            i += 1
        elif i < n and text[i] == "]":
            return items, i + 1
