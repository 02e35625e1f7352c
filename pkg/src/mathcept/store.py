"""Durable store for datasets, annotations, and adjudication decisions.

Datasets live as atomically written jsonl files under <root>/datasets/;
annotations and decisions are an append-only event log (<root>/events.jsonl)
replayed into memory at startup. Replaying the log from empty reproduces
the exact current state; a torn trailing line from a crash is dropped.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

from . import agreement as agreement_mod
from . import corpus
from .concepts import Concept, ConceptStatus, RemovalReason, RuleConfig, normalize_term
from .corpus import Dataset
from .pipeline import AnnotationSet, annotation_lines, from_jsonl

log = logging.getLogger(__name__)

GOLD_ANNOTATOR = "file-gold"
_NAME_RE = re.compile(r"^[A-Za-z0-9._-]+$")
VERDICTS = ("keep", "reject", "replace")


class StoreError(RuntimeError):
    pass


class UnknownDatasetError(StoreError):
    def __init__(self, name: str):
        super().__init__(f"unknown dataset {name!r}")


class DuplicateDatasetError(StoreError):
    pass


class CorruptLogError(StoreError):
    pass


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class AdjudicationDecision:
    dataset_name: str
    concept_normalized: str
    source_annotators: tuple[str, ...]
    verdict: str  # keep | reject | replace
    replacement: str | None = None
    adjudicator_id: str = ""
    timestamp: str = field(default_factory=_utcnow)

    def as_dict(self) -> dict:
        return {
            "dataset": self.dataset_name,
            "concept": self.concept_normalized,
            "source_annotators": list(self.source_annotators),
            "verdict": self.verdict,
            "replacement": self.replacement,
            "adjudicator": self.adjudicator_id,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "AdjudicationDecision":
        return cls(
            dataset_name=raw["dataset"],
            concept_normalized=raw["concept"],
            source_annotators=tuple(raw.get("source_annotators", [])),
            verdict=raw["verdict"],
            replacement=raw.get("replacement"),
            adjudicator_id=raw.get("adjudicator", ""),
            timestamp=raw.get("timestamp", ""),
        )


@dataclass(frozen=True)
class QueueItem:
    concept_normalized: str
    present_in: tuple[str, ...]
    absent_from: tuple[str, ...]
    example_sentence_ids: tuple[str, ...]
    resolved: bool = False

    def as_dict(self) -> dict:
        return {
            "concept": self.concept_normalized,
            "present_in": list(self.present_in),
            "absent_from": list(self.absent_from),
            "example_sentence_ids": list(self.example_sentence_ids),
            "resolved": self.resolved,
        }


@dataclass
class DisagreementQueue:
    dataset_name: str
    annotator_a: str
    annotator_b: str
    items: list[QueueItem] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "dataset": self.dataset_name,
            "a": self.annotator_a,
            "b": self.annotator_b,
            "items": [item.as_dict() for item in self.items],
        }


class Store:
    """Root-directory-backed store with an in-memory index."""

    def __init__(self, root: str | Path, config: RuleConfig | None = None):
        self.root = Path(root)
        self.config = config or RuleConfig.default()
        self.datasets_dir = self.root / "datasets"
        self.events_path = self.root / "events.jsonl"
        self.datasets: dict[str, Dataset] = {}
        # (dataset, annotator) -> AnnotationSet
        self._annotations: dict[tuple[str, str], AnnotationSet] = {}
        # (dataset, concept_normalized) -> latest decision
        self._decisions: dict[tuple[str, str], AdjudicationDecision] = {}
        self._lock = threading.Lock()
        self.root.mkdir(parents=True, exist_ok=True)
        self.datasets_dir.mkdir(parents=True, exist_ok=True)
        self._load_datasets()
        self._replay_events()

    # ------------------------------------------------------------- loading

    def _load_datasets(self) -> None:
        for path in sorted(self.datasets_dir.glob("*.jsonl")):
            name = path.stem
            dataset = corpus.ingest(path.read_bytes(), "jsonl", name)
            self._register_dataset(dataset)

    def _register_dataset(self, dataset: Dataset) -> None:
        self.datasets[dataset.name] = dataset
        if dataset.gold:
            gold = AnnotationSet(
                annotator_id=GOLD_ANNOTATOR,
                dataset_name=dataset.name,
                provenance="file-gold",
            )
            for sid in (s.id for s in dataset.sentences):
                if sid in dataset.gold:
                    # Shipped gold concepts are stored as-is, without
                    # re-normalization.
                    gold.per_sentence[sid] = [
                        Concept(surface=term, normalized=term)
                        for term in dataset.gold[sid]
                    ]
            self._annotations[(dataset.name, GOLD_ANNOTATOR)] = gold

    def _replay_events(self) -> None:
        if not self.events_path.exists():
            return
        raw = self.events_path.read_bytes()
        lines = raw.split(b"\n")
        # A fully written log ends with a newline, so the final split piece
        # is empty; anything else is a torn tail from a crash.
        tail = lines.pop() if lines else b""
        if tail:
            log.warning("dropping torn trailing event log line (%d bytes)", len(tail))
            # Cut the torn bytes off so later appends start on a fresh line.
            with self.events_path.open("r+b") as fh:
                fh.truncate(len(raw) - len(tail))
        for line_no, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                event = json.loads(line.decode("utf-8"))
            except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                raise CorruptLogError(
                    f"{self.events_path}:{line_no}: unreadable event ({exc})"
                ) from exc
            self._apply_event(event, line_no)

    def _apply_event(self, event: dict, line_no: int) -> None:
        kind = event.get("type")
        if kind == "dataset":
            return  # informational marker; state comes from the dataset file
        if kind == "annotation":
            key = (event["dataset"], event["annotator"])
            if event["dataset"] not in self.datasets:
                raise CorruptLogError(
                    f"{self.events_path}:{line_no}: annotation for unknown dataset"
                    f" {event['dataset']!r}"
                )
            bucket = self._annotations.get(key)
            if bucket is None:
                bucket = AnnotationSet(
                    annotator_id=event["annotator"],
                    dataset_name=event["dataset"],
                    provenance=event.get("provenance", "human"),
                )
                self._annotations[key] = bucket
            bucket.per_sentence[event["sentence_id"]] = [
                Concept.from_dict(c) for c in event["concepts"]
            ]
            return
        if kind == "decision":
            decision = AdjudicationDecision.from_dict(event)
            self._decisions[(decision.dataset_name, decision.concept_normalized)] = decision
            return
        raise CorruptLogError(f"{self.events_path}:{line_no}: unknown event type {kind!r}")

    def _append_event(self, event: dict) -> None:
        with self.events_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, ensure_ascii=False) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    # ------------------------------------------------------------ datasets

    def add_dataset(self, dataset: Dataset) -> Dataset:
        with self._lock:
            if not _NAME_RE.match(dataset.name):
                raise StoreError(
                    f"dataset name {dataset.name!r} must match {_NAME_RE.pattern}"
                )
            if dataset.name in self.datasets:
                raise DuplicateDatasetError(f"dataset {dataset.name!r} already exists")
            payload = corpus.export(dataset, "jsonl")
            target = self.datasets_dir / f"{dataset.name}.jsonl"
            tmp = target.with_suffix(".jsonl.tmp")
            with tmp.open("wb") as fh:
                fh.write(payload)
                fh.flush()
                os.fsync(fh.fileno())
            tmp.rename(target)
            self._register_dataset(dataset)
            self._append_event(
                {
                    "type": "dataset",
                    "dataset": dataset.name,
                    "sentence_count": len(dataset.sentences),
                    "ts": _utcnow(),
                }
            )
            return dataset

    def ingest_dataset(self, raw: bytes | str, format: str, name: str) -> Dataset:
        return self.add_dataset(corpus.ingest(raw, format, name))

    def get_dataset(self, name: str) -> Dataset:
        if name not in self.datasets:
            raise UnknownDatasetError(name)
        return self.datasets[name]

    def list_datasets(self) -> list[dict]:
        return [
            {"name": name, "sentence_count": len(self.datasets[name].sentences)}
            for name in sorted(self.datasets)
        ]

    # --------------------------------------------------------- annotations

    def annotators(self, dataset: str) -> list[str]:
        self.get_dataset(dataset)
        return sorted(a for (d, a) in self._annotations if d == dataset)

    def annotation_set(
        self, dataset: str, annotator: str, decisions: bool = False
    ) -> AnnotationSet:
        self.get_dataset(dataset)
        key = (dataset, annotator)
        if key not in self._annotations:
            raise StoreError(f"no annotations by {annotator!r} on dataset {dataset!r}")
        return self._adjudicated_view(self._annotations[key]) if decisions else self._annotations[key]

    def submit_annotation(
        self,
        dataset: str,
        sentence_id: str,
        annotator_id: str,
        concepts: list[str],
        provenance: str = "human",
    ) -> list[Concept]:
        """Normalize, dedupe, and durably record one sentence's concepts.

        Resubmitting for the same (sentence, annotator) replaces the prior
        fragment.
        """
        ds = self.get_dataset(dataset)
        if not annotator_id or not annotator_id.strip():
            raise StoreError("annotator_id must be non-empty")
        if annotator_id == GOLD_ANNOTATOR:
            raise StoreError(f"annotator id {GOLD_ANNOTATOR!r} is reserved for ingested gold")
        if all(s.id != sentence_id for s in ds.sentences):
            raise StoreError(f"unknown sentence {sentence_id!r} in dataset {dataset!r}")
        normalized = [normalize_term(c, self.config) for c in concepts]
        with self._lock:
            key = (dataset, annotator_id)
            bucket = self._annotations.get(key)
            if bucket is None:
                bucket = AnnotationSet(
                    annotator_id=annotator_id, dataset_name=dataset, provenance=provenance
                )
                self._annotations[key] = bucket
            stored = bucket.set_sentence(sentence_id, normalized)
            self._append_event(
                {
                    "type": "annotation",
                    "dataset": dataset,
                    "sentence_id": sentence_id,
                    "annotator": annotator_id,
                    "provenance": provenance,
                    "concepts": [c.as_dict() for c in stored],
                    "ts": _utcnow(),
                }
            )
            return stored

    def store_annotation_set(self, annotations: AnnotationSet) -> None:
        """Persist a whole precomputed AnnotationSet (e.g. a pipeline run),
        concept objects verbatim."""
        ds = self.get_dataset(annotations.dataset_name)
        if annotations.annotator_id == GOLD_ANNOTATOR:
            raise StoreError(f"annotator id {GOLD_ANNOTATOR!r} is reserved for ingested gold")
        order = [s.id for s in ds.sentences]
        with self._lock:
            key = (annotations.dataset_name, annotations.annotator_id)
            bucket = self._annotations.get(key)
            if bucket is None:
                bucket = AnnotationSet(
                    annotator_id=annotations.annotator_id,
                    dataset_name=annotations.dataset_name,
                    provenance=annotations.provenance,
                )
                self._annotations[key] = bucket
            for sid in order:
                if sid not in annotations.per_sentence:
                    continue
                concepts = list(annotations.per_sentence[sid])
                bucket.per_sentence[sid] = concepts
                self._append_event(
                    {
                        "type": "annotation",
                        "dataset": annotations.dataset_name,
                        "sentence_id": sid,
                        "annotator": annotations.annotator_id,
                        "provenance": annotations.provenance,
                        "concepts": [c.as_dict() for c in concepts],
                        "ts": _utcnow(),
                    }
                )

    def import_annotations(self, dataset: str, data: bytes | str) -> list[str]:
        """Restore annotation jsonl exactly as exported; returns annotators."""
        self.get_dataset(dataset)
        sets = from_jsonl(data, dataset)
        for annotations in sets.values():
            self.store_annotation_set(annotations)
        return sorted(sets)

    # -------------------------------------------------------- adjudication

    def decisions_for(self, dataset: str) -> list[AdjudicationDecision]:
        return [d for (ds, _), d in sorted(self._decisions.items()) if ds == dataset]

    def _adjudicated_view(self, annotations: AnnotationSet) -> AnnotationSet:
        """Apply live decisions to one annotator's per-sentence concepts."""
        out = AnnotationSet(
            annotator_id=annotations.annotator_id,
            dataset_name=annotations.dataset_name,
            provenance=annotations.provenance,
        )
        for sid, concepts in annotations.per_sentence.items():
            adjusted: list[Concept] = []
            seen: set[str] = set()
            for c in concepts:
                decision = self._decisions.get((annotations.dataset_name, c.normalized))
                target = c
                if (
                    decision is not None
                    and annotations.annotator_id in decision.source_annotators
                    and c.status is ConceptStatus.ACCEPTED
                ):
                    if decision.verdict == "reject":
                        target = replace(
                            c,
                            status=ConceptStatus.REJECTED,
                            removal_reason=RemovalReason.ADJUDICATED_OUT,
                        )
                    elif decision.verdict == "replace":
                        target = replace(c, normalized=decision.replacement)
                if target.status is ConceptStatus.ACCEPTED:
                    # A replacement may collide with a concept already in
                    # the sentence; keep one copy.
                    if target.normalized in seen:
                        continue
                    seen.add(target.normalized)
                adjusted.append(target)
            out.per_sentence[sid] = adjusted
        return out

    def global_set(self, dataset: str, annotator: str, decisions: bool = False) -> set[str]:
        return agreement_mod.global_set(self.annotation_set(dataset, annotator, decisions))

    def build_disagreement_queue(
        self, dataset: str, annotator_a: str, annotator_b: str
    ) -> DisagreementQueue:
        """Materialize the symmetric difference of two annotators' global
        sets, with provenance and example sentences per item."""
        set_a = self.annotation_set(dataset, annotator_a)
        set_b = self.annotation_set(dataset, annotator_b)
        ga = agreement_mod.global_set(set_a)
        gb = agreement_mod.global_set(set_b)
        order = [s.id for s in self.get_dataset(dataset).sentences]
        queue = DisagreementQueue(
            dataset_name=dataset, annotator_a=annotator_a, annotator_b=annotator_b
        )
        for concept in sorted(ga.symmetric_difference(gb)):
            holder, absent = (
                (annotator_a, annotator_b) if concept in ga else (annotator_b, annotator_a)
            )
            source = set_a if concept in ga else set_b
            examples = [
                sid
                for sid in order
                if any(
                    c.normalized == concept and c.status is ConceptStatus.ACCEPTED
                    for c in source.per_sentence.get(sid, [])
                )
            ]
            queue.items.append(
                QueueItem(
                    concept_normalized=concept,
                    present_in=(holder,),
                    absent_from=(absent,),
                    example_sentence_ids=tuple(examples[:5]),
                    resolved=(dataset, concept) in self._decisions,
                )
            )
        return queue

    def submit_adjudication(self, decision: AdjudicationDecision) -> dict[str, list[str]]:
        """Record a final verdict; returns each source annotator's
        adjudicated global concept list."""
        self.get_dataset(decision.dataset_name)
        if decision.verdict not in VERDICTS:
            raise StoreError(f"unknown verdict {decision.verdict!r}")
        if not decision.source_annotators:
            raise StoreError("decision needs at least one source annotator")
        if decision.verdict == "replace":
            if not decision.replacement or not decision.replacement.strip():
                raise StoreError("replace verdict requires a replacement term")
            replacement = normalize_term(decision.replacement, self.config)
            if replacement.status is ConceptStatus.REJECTED:
                raise StoreError("replacement term is empty after normalization")
            decision = replace(decision, replacement=replacement.normalized)
        known = set()
        for annotator in decision.source_annotators:
            known |= self.global_set(decision.dataset_name, annotator)
        already = (decision.dataset_name, decision.concept_normalized) in self._decisions
        if decision.concept_normalized not in known and not already:
            raise StoreError(
                f"concept {decision.concept_normalized!r} is not held by any of"
                f" {list(decision.source_annotators)} on dataset {decision.dataset_name!r}"
            )
        with self._lock:
            self._decisions[
                (decision.dataset_name, decision.concept_normalized)
            ] = decision
            self._append_event({"type": "decision", **decision.as_dict(), "ts": _utcnow()})
        return {
            annotator: sorted(self.global_set(decision.dataset_name, annotator, decisions=True))
            for annotator in decision.source_annotators
        }

    # ------------------------------------------------------------- export

    def export_annotations(
        self,
        dataset: str,
        annotator: str | None = None,
        include_decisions: bool = False,
    ) -> bytes:
        ds = self.get_dataset(dataset)
        order = [s.id for s in ds.sentences]
        names = [annotator] if annotator is not None else self.annotators(dataset)
        lines: list[str] = []
        for name in names:
            annotations = self.annotation_set(dataset, name, decisions=include_decisions)
            if not include_decisions:
                lines.extend(annotation_lines(annotations, order))
                continue
            for sid in order:
                if sid not in annotations.per_sentence:
                    continue
                concepts = []
                for c in annotations.per_sentence[sid]:
                    entry = c.as_dict()
                    decision = self._decisions.get((dataset, c.normalized))
                    if decision is not None and name in decision.source_annotators:
                        entry["verdict"] = decision.verdict
                    elif (
                        c.status is ConceptStatus.REJECTED
                        and c.removal_reason is RemovalReason.ADJUDICATED_OUT
                    ):
                        entry["verdict"] = "reject"
                    concepts.append(entry)
                lines.append(
                    json.dumps(
                        {"sentence_id": sid, "annotator": name, "concepts": concepts},
                        ensure_ascii=False,
                    )
                )
        return ("\n".join(lines) + "\n" if lines else "").encode("utf-8")

    def agreement_report(
        self, dataset: str, annotators: list[str], decisions: bool = True
    ) -> agreement_mod.AgreementReport:
        sets = [self.annotation_set(dataset, a, decisions=decisions) for a in annotators]
        return agreement_mod.compute_report(sets)
