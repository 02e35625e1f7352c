"""Per-sentence extraction orchestration and concept post-filtering.

extract_sentence wires prompt → gateway → parser → normalizer →
post_filter; run_batch applies it across a dataset into an AnnotationSet.
baseline_extract is the no-model control: greedy lexicon matching.
"""

from __future__ import annotations

import json
import logging
import string
from collections import deque
from dataclasses import dataclass, field, replace

from .concepts import (
    Concept,
    ConceptStatus,
    NameUsage,
    RemovalReason,
    RuleConfig,
    classify_name_usage,
    is_meta_term,
    normalize_term,
    singularize,
    split_prepositional,
)
from .corpus import Dataset, Sentence
from .gateway import Gateway
from .prompting import PromptTemplate, build_prompt, parse_concepts

log = logging.getLogger(__name__)

_EDGE_PUNCT = "".join(c for c in string.punctuation if c not in "-'") + "‘’“”"

PROVENANCES = ("human", "llm", "rule_baseline", "file-gold")


@dataclass
class AnnotationSet:
    """One annotator's concepts over a dataset, keyed by sentence id."""

    annotator_id: str
    dataset_name: str
    per_sentence: dict[str, list[Concept]] = field(default_factory=dict)
    provenance: str = "human"

    def __post_init__(self) -> None:
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def set_sentence(self, sentence_id: str, concepts: list[Concept]) -> list[Concept]:
        """Replace the fragment for one sentence, deduping on normalized."""
        deduped: list[Concept] = []
        seen: set[str] = set()
        for c in concepts:
            if c.status is not ConceptStatus.REJECTED and c.normalized in seen:
                continue
            seen.add(c.normalized)
            deduped.append(c)
        self.per_sentence[sentence_id] = deduped
        return deduped


@dataclass
class FilterReport:
    """Accounting for one post_filter pass: every input concept is either
    kept or logged in `removed`; derived concepts appear in `added`."""

    removed: list[tuple[Concept, RemovalReason]] = field(default_factory=list)
    added: list[Concept] = field(default_factory=list)
    kept_count: int = 0
    notes: list[str] = field(default_factory=list)

    def merge(self, other: "FilterReport") -> None:
        self.removed.extend(other.removed)
        self.added.extend(other.added)
        self.kept_count += other.kept_count
        self.notes.extend(other.notes)

    def summary(self) -> dict:
        reasons: dict[str, int] = {}
        for _, reason in self.removed:
            reasons[reason.value] = reasons.get(reason.value, 0) + 1
        return {
            "kept": self.kept_count,
            "removed": len(self.removed),
            "added": len(self.added),
            "removed_by_reason": reasons,
            "notes": self.notes,
        }


def _rejected(concept: Concept, reason: RemovalReason) -> Concept:
    return replace(concept, status=ConceptStatus.REJECTED, removal_reason=reason)


def post_filter(
    items: list[Concept], config: RuleConfig
) -> tuple[list[Concept], FilterReport]:
    """Apply the guideline filters in a fixed order.

    Empty strip, re-singularize, meta blacklist, bare person name,
    preposition split, dedupe. Derived concepts (split fragments, rescued
    adjectives, re-singularized forms) re-enter the chain from the top, so
    a second pass over the output changes nothing.
    """
    report = FilterReport()
    kept: list[Concept] = []
    seen: set[str] = set()
    queue = deque(items)
    while queue:
        concept = queue.popleft()
        if concept.status is ConceptStatus.REJECTED:
            report.removed.append((concept, concept.removal_reason or RemovalReason.EMPTY))
            continue
        term = concept.normalized
        if not term.strip():
            report.removed.append((_rejected(concept, RemovalReason.EMPTY), RemovalReason.EMPTY))
            continue

        resingularized = singularize(term, config)
        if resingularized != term:
            report.removed.append(
                (_rejected(concept, RemovalReason.PLURAL_ARTIFACT), RemovalReason.PLURAL_ARTIFACT)
            )
            fixed = replace(concept, normalized=resingularized)
            report.added.append(fixed)
            queue.appendleft(fixed)
            continue

        if is_meta_term(term, config):
            tokens = term.split()
            # A mathematical adjective modifying a contentless noun keeps
            # its own entry ("nilpotent case" -> "nilpotent"); fully
            # blacklisted phrases do not ("open question").
            if (
                len(tokens) == 2
                and tokens[0].lower() in config.math_adjectives
                and term.lower() not in config.meta_blacklist
            ):
                rescued = Concept(surface=concept.surface, normalized=tokens[0])
                report.added.append(rescued)
                queue.appendleft(rescued)
            report.removed.append(
                (_rejected(concept, RemovalReason.META_WORD), RemovalReason.META_WORD)
            )
            continue

        if classify_name_usage(term, config) is NameUsage.BARE_NAME:
            report.removed.append(
                (
                    _rejected(concept, RemovalReason.BARE_PERSON_NAME),
                    RemovalReason.BARE_PERSON_NAME,
                )
            )
            continue

        if config.split_long_spans:
            fragments = split_prepositional(term, config)
            if fragments != [term]:
                report.removed.append(
                    (
                        _rejected(concept, RemovalReason.PREPOSITION_SPLIT),
                        RemovalReason.PREPOSITION_SPLIT,
                    )
                )
                derived = [Concept(surface=f, normalized=f) for f in fragments]
                report.added.extend(derived)
                queue.extendleft(reversed(derived))
                continue

        if term in seen:
            report.removed.append(
                (_rejected(concept, RemovalReason.DUPLICATE), RemovalReason.DUPLICATE)
            )
            continue
        seen.add(term)
        kept.append(concept)

    report.kept_count = len(kept)
    return kept, report


def extract_sentence(
    sentence: Sentence,
    template: PromptTemplate,
    gateway: Gateway,
    config: RuleConfig,
) -> tuple[list[Concept], FilterReport]:
    """Prompt the model for one sentence and filter its parsed concepts."""
    prompt = build_prompt(sentence, template)
    raw = gateway.complete(prompt)
    response = parse_concepts(raw)
    if response.parse_status == "unparseable":
        log.warning("sentence %s: unparseable response", sentence.id)
        report = FilterReport(notes=[f"sentence {sentence.id}: unparseable response"])
        return [], report
    concepts = [normalize_term(item, config) for item in response.parsed_concepts]
    return post_filter(concepts, config)


def run_batch(
    dataset: Dataset,
    template: PromptTemplate,
    gateway: Gateway,
    config: RuleConfig,
    annotator_id: str,
    workers: int = 1,
    checkpoint_path=None,
) -> tuple[AnnotationSet, FilterReport, dict[str, str]]:
    """Extract over a whole dataset.

    Returns (annotations, aggregate filter report, {sentence_id: error}
    for failed sentences). Failed sentences are absent from the
    annotation set; a sentence that parsed to zero concepts is present
    with an empty list. Reruns resume: a checkpoint file and/or a
    record-mode cassette let completed prompts skip the network.
    """
    if not dataset.sentences:
        raise ValueError(f"dataset {dataset.name!r} is empty")
    annotations = AnnotationSet(
        annotator_id=annotator_id, dataset_name=dataset.name, provenance="llm"
    )
    aggregate = FilterReport()
    failures: dict[str, str] = {}
    prompts = [build_prompt(s, template) for s in dataset.sentences]
    responses, batch_failures = gateway.complete_batch(
        prompts, concurrency=workers, checkpoint_path=checkpoint_path
    )
    for index, sentence in enumerate(dataset.sentences):
        if index in batch_failures:
            failures[sentence.id] = batch_failures[index]
            log.warning("sentence %s failed: %s", sentence.id, batch_failures[index])
            continue
        response = parse_concepts(responses[index])
        if response.parse_status == "unparseable":
            log.warning("sentence %s: unparseable response", sentence.id)
            aggregate.notes.append(f"sentence {sentence.id}: unparseable response")
            annotations.set_sentence(sentence.id, [])
            continue
        concepts = [normalize_term(item, config) for item in response.parsed_concepts]
        kept, report = post_filter(concepts, config)
        annotations.set_sentence(sentence.id, kept)
        aggregate.merge(report)
    return annotations, aggregate, failures


def baseline_extract(
    sentence: Sentence,
    lexicon: set[str],
    config: RuleConfig | None = None,
) -> list[Concept]:
    """Greedy longest-match of lexicon terms over the sentence.

    Tokens are edge-punctuation-stripped, singularized, and casefolded for
    matching; matches are emitted in the lexicon's stored form, deduped,
    in reading order.
    """
    if config is None:
        config = RuleConfig.default()
    if not lexicon:
        return []
    by_key = {}
    max_len = 1
    for term in sorted(lexicon):
        by_key.setdefault(term.casefold(), term)
        max_len = max(max_len, term.count(" ") + 1)

    surfaces = [t.strip(_EDGE_PUNCT) for t in sentence.text.split()]
    surfaces = [t for t in surfaces if t]
    keys = [singularize(t, config).casefold() for t in surfaces]

    out: list[Concept] = []
    seen: set[str] = set()
    i = 0
    while i < len(keys):
        for k in range(min(max_len, len(keys) - i), 0, -1):
            candidate = " ".join(keys[i:i + k])
            if candidate in by_key:
                normalized = by_key[candidate]
                if normalized not in seen:
                    seen.add(normalized)
                    out.append(
                        Concept(surface=" ".join(surfaces[i:i + k]), normalized=normalized)
                    )
                i += k
                break
        else:
            i += 1
    return out


def annotation_lines(
    annotations: AnnotationSet, sentence_order: list[str] | None = None
) -> list[str]:
    """Serialize to jsonl lines, one per annotated sentence."""
    ids = sentence_order if sentence_order is not None else list(annotations.per_sentence)
    lines = []
    for sid in ids:
        if sid not in annotations.per_sentence:
            continue
        obj = {
            "sentence_id": sid,
            "annotator": annotations.annotator_id,
            "concepts": [c.as_dict() for c in annotations.per_sentence[sid]],
        }
        lines.append(json.dumps(obj, ensure_ascii=False))
    return lines


def to_jsonl(
    annotations: AnnotationSet, sentence_order: list[str] | None = None
) -> bytes:
    lines = annotation_lines(annotations, sentence_order)
    return ("\n".join(lines) + "\n" if lines else "").encode("utf-8")


def from_jsonl(
    data: bytes | str, dataset_name: str, provenance: str = "human"
) -> dict[str, AnnotationSet]:
    """Parse exported annotation jsonl back into AnnotationSets by annotator."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    sets: dict[str, AnnotationSet] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
        annotator = obj["annotator"]
        bucket = sets.setdefault(
            annotator,
            AnnotationSet(
                annotator_id=annotator, dataset_name=dataset_name, provenance=provenance
            ),
        )
        bucket.per_sentence[obj["sentence_id"]] = [
            Concept.from_dict(c) for c in obj["concepts"]
        ]
    return sets
