import json
from pathlib import Path

import pytest

from mathcept.concepts import Concept, RuleConfig
from mathcept.corpus import Dataset, Sentence
from mathcept.gateway import Cassette
from mathcept.pipeline import AnnotationSet
from mathcept.prompting import build_prompt


@pytest.fixture(scope="session")
def config() -> RuleConfig:
    return RuleConfig.default()


@pytest.fixture
def mini_dataset() -> Dataset:
    return Dataset(
        name="mini",
        sentences=[
            Sentence("000", "We show that both approaches give equivalent bicategories."),
            Sentence(
                "001",
                "Let PreOrd(C) be the category of internal preorders in an exact category C.",
            ),
            Sentence("002", "This gives a Lie algebra over the base field."),
        ],
    )


def make_annotation_set(
    annotator: str,
    concepts: list[str],
    dataset: str = "synthetic",
    sentence_id: str = "000",
    provenance: str = "human",
) -> AnnotationSet:
    """One-sentence AnnotationSet holding already-normalized concepts."""
    annotations = AnnotationSet(
        annotator_id=annotator, dataset_name=dataset, provenance=provenance
    )
    annotations.per_sentence[sentence_id] = [
        Concept(surface=c, normalized=c) for c in concepts
    ]
    return annotations


def record_responses(path: Path, dataset: Dataset, template, responses: dict[str, str]) -> Cassette:
    """Build a replay cassette mapping each sentence's prompt to a response."""
    cassette = Cassette(path)
    for sentence in dataset.sentences:
        from mathcept.gateway import Exchange, prompt_hash

        if sentence.id not in responses:
            continue
        prompt = build_prompt(sentence, template)
        cassette.append(
            Exchange(
                prompt_hash=prompt_hash(prompt),
                prompt_text=prompt,
                response_text=responses[sentence.id],
                model_id="stub",
                timestamp="2024-01-01T00:00:00+00:00",
            )
        )
    return cassette


def jsonl_bytes(rows: list[dict]) -> bytes:
    return ("\n".join(json.dumps(r, ensure_ascii=False) for r in rows) + "\n").encode()
