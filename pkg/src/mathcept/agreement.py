"""Inter-annotator agreement statistics.

All statistics run over global (dataset-pooled) sets of accepted
normalized concepts: the deduplicated union (master-list), the 0/1
concept-by-annotator incidence matrix, pairwise Jaccard similarity, the
all-annotator full-agreement rate, and pairwise set differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .concepts import ConceptStatus
from .pipeline import AnnotationSet


def global_set(
    annotations: AnnotationSet,
    case_fold: bool = False,
    include_candidates: bool = False,
) -> set[str]:
    """Pool one annotator's accepted normalized concepts across sentences."""
    statuses = {ConceptStatus.ACCEPTED}
    if include_candidates:
        statuses.add(ConceptStatus.CANDIDATE)
    out = set()
    for concepts in annotations.per_sentence.values():
        for c in concepts:
            if c.status in statuses:
                out.add(c.normalized.casefold() if case_fold else c.normalized)
    return out


def master_list(
    sets: list[AnnotationSet],
    scope: str = "global",
    case_fold: bool = False,
    include_candidates: bool = False,
):
    """Union of all annotators' concepts, lexicographically ordered.

    scope="global" pools across sentences and returns one list;
    scope="per_sentence" returns {sentence_id: list}.
    """
    if not sets:
        raise ValueError("master_list requires at least one annotation set")
    if scope == "global":
        union: set[str] = set()
        for s in sets:
            union |= global_set(s, case_fold, include_candidates)
        return sorted(union)
    if scope == "per_sentence":
        statuses = {ConceptStatus.ACCEPTED}
        if include_candidates:
            statuses.add(ConceptStatus.CANDIDATE)
        per: dict[str, set[str]] = {}
        for s in sets:
            for sentence_id, concepts in s.per_sentence.items():
                bucket = per.setdefault(sentence_id, set())
                for c in concepts:
                    if c.status in statuses:
                        bucket.add(c.normalized.casefold() if case_fold else c.normalized)
        return {sid: sorted(values) for sid, values in sorted(per.items())}
    raise ValueError(f"unknown scope {scope!r}")


@dataclass
class IncidenceMatrix:
    concepts: list[str]
    annotators: list[str]
    cells: list[list[int]]  # |concepts| rows x |annotators| columns

    def column_sum(self, annotator: str) -> int:
        j = self.annotators.index(annotator)
        return sum(row[j] for row in self.cells)

    def jaccard_from_matrix(self, a: str, b: str) -> float:
        i = self.annotators.index(a)
        j = self.annotators.index(b)
        both = sum(1 for row in self.cells if row[i] and row[j])
        either = sum(1 for row in self.cells if row[i] or row[j])
        if either == 0:
            raise ValueError("both annotator sets are empty")
        return both / either


def incidence(sets: list[AnnotationSet], case_fold: bool = False) -> IncidenceMatrix:
    if not sets:
        raise ValueError("incidence requires at least one annotation set")
    globals_ = [global_set(s, case_fold) for s in sets]
    concepts = master_list(sets, case_fold=case_fold)
    annotators = [s.annotator_id for s in sets]
    cells = [[1 if concept in g else 0 for g in globals_] for concept in concepts]
    return IncidenceMatrix(concepts=concepts, annotators=annotators, cells=cells)


def jaccard(a: set[str], b: set[str]) -> float:
    if not a and not b:
        raise ValueError("Jaccard similarity is undefined for two empty sets")
    return len(a & b) / len(a | b)


def full_agreement(sets: list[AnnotationSet], case_fold: bool = False) -> tuple[int, float]:
    """(size of the all-annotator intersection, that size over the union)."""
    if len(sets) < 2:
        raise ValueError("full_agreement requires at least two annotation sets")
    globals_ = [global_set(s, case_fold) for s in sets]
    union = set().union(*globals_)
    if not union:
        raise ValueError("all annotation sets are empty")
    common = set.intersection(*globals_)
    return len(common), len(common) / len(union)


def diff(
    a: AnnotationSet, b: AnnotationSet, case_fold: bool = False
) -> tuple[list[str], list[str], list[str]]:
    """(only in a, only in b, common), each lexicographically ordered."""
    if a.dataset_name != b.dataset_name:
        raise ValueError(
            f"annotation sets cover different datasets: {a.dataset_name!r} vs {b.dataset_name!r}"
        )
    ga = global_set(a, case_fold)
    gb = global_set(b, case_fold)
    return sorted(ga - gb), sorted(gb - ga), sorted(ga & gb)


@dataclass
class AgreementReport:
    annotators: list[str]
    counts: dict[str, int]
    union_size: int
    full_agreement_count: int
    full_agreement_rate: float
    pairwise_jaccard: dict[tuple[str, str], float]
    diffs: dict[tuple[str, str], tuple[list[str], list[str], list[str]]] = field(
        default_factory=dict
    )

    def to_json(self) -> str:
        doc = {
            "annotators": self.annotators,
            "counts": self.counts,
            "union_size": self.union_size,
            "full_agreement_count": self.full_agreement_count,
            "full_agreement_rate": round(self.full_agreement_rate, 3),
            "pairwise": [
                {"a": a, "b": b, "jaccard": round(value, 3)}
                for (a, b), value in sorted(self.pairwise_jaccard.items())
            ],
            "diffs": [
                {"a": a, "b": b, "only_a": only_a, "only_b": only_b, "common": common}
                for (a, b), (only_a, only_b, common) in sorted(self.diffs.items())
            ],
        }
        return json.dumps(doc, ensure_ascii=False, indent=2)

    def to_text(self) -> str:
        lines = [
            f"{a} and {b} | {value:.3f}"
            for (a, b), value in sorted(self.pairwise_jaccard.items())
        ]
        lines.append(
            f"full agreement | {self.full_agreement_count}/{self.union_size}"
            f" = {self.full_agreement_rate:.3f}"
        )
        return "\n".join(lines)


def compute_report(
    sets: list[AnnotationSet],
    case_fold: bool = False,
    include_diffs: bool = True,
) -> AgreementReport:
    if len(sets) < 2:
        raise ValueError("an agreement report requires at least two annotation sets")
    globals_ = {s.annotator_id: global_set(s, case_fold) for s in sets}
    annotators = [s.annotator_id for s in sets]
    count, rate = full_agreement(sets, case_fold)
    pairwise: dict[tuple[str, str], float] = {}
    diffs: dict[tuple[str, str], tuple[list[str], list[str], list[str]]] = {}
    for i, a in enumerate(annotators):
        for b in annotators[i + 1:]:
            pairwise[(a, b)] = jaccard(globals_[a], globals_[b])
            if include_diffs:
                ga, gb = globals_[a], globals_[b]
                diffs[(a, b)] = (sorted(ga - gb), sorted(gb - ga), sorted(ga & gb))
    return AgreementReport(
        annotators=annotators,
        counts={a: len(globals_[a]) for a in annotators},
        union_size=len(set().union(*globals_.values())),
        full_agreement_count=count,
        full_agreement_rate=rate,
        pairwise_jaccard=pairwise,
        diffs=diffs,
    )
