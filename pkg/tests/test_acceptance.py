"""Acceptance suite.

One test per acceptance criterion. Each prints a single
"acceptance | <criterion> | PASS/FAIL" line (visible even under output
capture) and enforces its runtime budget. Numeric tolerances are pinned
in the assertions.
"""

import json
import os
import random
import signal
import subprocess
import sys
import time
from contextlib import contextmanager

import pytest

from mathcept.agreement import full_agreement, incidence, jaccard
from mathcept.concepts import (
    ConceptStatus,
    expand_subspans,
    normalize_term,
    split_prepositional,
)
from mathcept.corpus import Dataset, Sentence
from mathcept.gateway import Cassette, Gateway, GatewayConfig
from mathcept.pipeline import post_filter, run_batch, to_jsonl
from mathcept.prompting import get_template, parse_concepts
from mathcept.store import Store

from conftest import jsonl_bytes, make_annotation_set, record_responses


@contextmanager
def criterion(capsys, name: str, limit_seconds: float):
    """Time a criterion body and print one summary line for it."""
    start = time.monotonic()
    details: list[str] = []
    failed = False
    try:
        yield details
    except BaseException:
        failed = True
        raise
    finally:
        elapsed = time.monotonic() - start
        over = elapsed > limit_seconds
        status = "FAIL" if (failed or over) else "PASS"
        tail = f"; {'; '.join(details)}" if details else ""
        with capsys.disabled():
            print(
                f"acceptance | {name} | {status} |"
                f" {elapsed:.2f}s of {limit_seconds:.0f}s{tail}",
                flush=True,
            )
    if over and not failed:
        raise AssertionError(f"{name}: runtime {elapsed:.2f}s over {limit_seconds}s limit")


def synthetic_pair(size_a: int, size_b: int, overlap: int) -> tuple[set, set]:
    common = {f"shared-{i:04d}" for i in range(overlap)}
    return (
        common | {f"a-only-{i:04d}" for i in range(size_a - overlap)},
        common | {f"b-only-{i:04d}" for i in range(size_b - overlap)},
    )


def test_two_annotator_agreement_arithmetic(capsys):
    with criterion(capsys, "two-annotator agreement arithmetic", 1.0) as details:
        human, machine = synthetic_pair(673, 740, 490)
        assert len(machine - human) == 250
        assert len(human - machine) == 183
        raw = jaccard(human, machine)
        assert abs(raw - 0.531) <= 0.001, f"raw jaccard {raw:.6f} not within 0.531±0.001"

        # An adjudicator strikes 147 of the machine-only items.
        machine_only = sorted(machine - human)
        adjudicated = machine - set(machine_only[:147])
        assert len(machine_only) - 147 == 103
        assert len(adjudicated) == 593, f"adjudicated set size {len(adjudicated)} != 593"
        final = jaccard(human, adjudicated)
        assert abs(final - 0.631) <= 0.001, f"adjudicated jaccard {final:.6f} not within 0.631±0.001"
        details.append(f"jaccard {raw:.3f} -> {final:.3f}, adjudicated size 593, tol ±0.001")


def test_four_annotator_agreement_arithmetic(capsys):
    with criterion(capsys, "four-annotator agreement arithmetic", 1.0) as details:
        common = [f"core-{i:04d}" for i in range(120)]
        extras = [f"extra-{i:04d}" for i in range(207)]
        sets = []
        for k in range(4):
            own = [e for i, e in enumerate(extras) if i % 4 == k]
            sets.append(make_annotation_set(f"annotator-{k + 1}", common + own))
        count, rate = full_agreement(sets)
        assert count == 120
        union = set()
        for s in sets:
            union |= {c.normalized for cs in s.per_sentence.values() for c in cs}
        assert len(union) == 327
        assert abs(rate - 0.367) <= 0.001, f"full agreement {rate:.6f} not within 0.367±0.001"
        details.append(f"120/327 = {rate:.3f}, tol ±0.001")


NORMALIZE_CASES = [
    ("equivalent bicategories", "equivalent bicategory"),
    ("functors", "functor"),
    ("sheaves", "sheaf"),
    ("matrices", "matrix"),
]

REJECT_CASES = [
    "Grothendieck",
    "previous work",
    "decade",
    "theorem",
    "open question",
    "construction",
    "corollary",
]

RETAIN_CASES = [
    "Grothendieck's construction",
    "Cauchy sequence",
    "sheaf",
    "Lie algebra",
    "Turing machine",
    "nilpotent algebra",
]

SPLIT_CASES = [
    ("sheaf of germs of analytic functions", ["sheaf", "germ", "analytic function"]),
    ("area between the tangents to two circles", ["area", "tangent", "circle"]),
]

ADJECTIVE_CASES = [
    ("nilpotent case", ["nilpotent"]),
]

SUBSPAN_CASES = [
    ("enriched accessible category", ["accessible category", "category"]),
]


def test_guideline_golden_suite(capsys, config):
    with criterion(capsys, "guideline golden suite", 1.0) as details:
        total = 0
        for raw, expected in NORMALIZE_CASES:
            got = normalize_term(raw, config).normalized
            assert got == expected, f"normalize({raw!r}) = {got!r}, want {expected!r}"
            total += 1
        for raw in REJECT_CASES:
            kept, _ = post_filter([normalize_term(raw, config)], config)
            assert kept == [], f"{raw!r} should be rejected, kept {kept!r}"
            total += 1
        for raw in RETAIN_CASES:
            concept = normalize_term(raw, config)
            kept, _ = post_filter([concept], config)
            assert [c.normalized for c in kept] == [concept.normalized], (
                f"{raw!r} should be retained"
            )
            total += 1
        for raw, expected in SPLIT_CASES:
            got = split_prepositional(normalize_term(raw, config).normalized, config)
            assert got == expected, f"split({raw!r}) = {got!r}, want {expected!r}"
            kept, _ = post_filter([normalize_term(raw, config)], config)
            assert [c.normalized for c in kept] == expected
            total += 1
        for raw, expected in ADJECTIVE_CASES:
            kept, _ = post_filter([normalize_term(raw, config)], config)
            got = [c.normalized for c in kept]
            assert got == expected, f"filter({raw!r}) = {got!r}, want {expected!r}"
            total += 1
        for raw, expected in SUBSPAN_CASES:
            subs = expand_subspans(raw, config)
            assert [c.normalized for c in subs] == expected
            assert all(c.status is ConceptStatus.CANDIDATE for c in subs)
            total += 1
        assert total >= 15, f"only {total} golden cases, need at least 15"
        details.append(f"{total} cases, zero tolerance")


def test_jaccard_property_suite(capsys):
    with criterion(capsys, "jaccard property suite", 10.0) as details:
        rng = random.Random(20260814)
        universe = [f"term-{i:02d}" for i in range(30)]
        pairs = 0
        while pairs < 1000:
            a = set(rng.sample(universe, rng.randint(0, 30)))
            b = set(rng.sample(universe, rng.randint(0, 30)))
            if not a and not b:
                with pytest.raises(ValueError):
                    jaccard(a, b)
                continue
            j = jaccard(a, b)
            assert 0.0 <= j <= 1.0
            assert j == jaccard(b, a)
            assert (j == 1.0) == (a == b)
            assert (j == 0.0) == (not a & b)
            matrix = incidence(
                [
                    make_annotation_set("left", sorted(a)),
                    make_annotation_set("right", sorted(b)),
                ]
            )
            assert matrix.jaccard_from_matrix("left", "right") == j
            pairs += 1
        details.append(f"{pairs} pairs, matrix-derived equals set-derived exactly")


FIXTURE_SENTENCES = [
    ("000", "We show that both approaches give equivalent bicategories."),
    ("001", "Let PreOrd(C) be the category of internal preorders in an exact category C."),
    ("002", "This gives a Lie algebra over the base field."),
    ("003", "The sheaf of germs of analytic functions is our main object."),
    ("004", "We recall Grothendieck's construction for fibrations."),
    ("005", "Every Cauchy sequence converges in a complete metric space."),
    ("006", "The nilpotent case requires a separate argument."),
    ("007", "A Turing machine accepts this language."),
    ("008", "The theorem follows from the previous work."),
    ("009", "Consider enriched accessible categories and their limits."),
]

FIXTURE_RESPONSES = {
    "000": "Concepts: ['equivalent bicategories']",
    "001": "Concepts: ['PreOrd(C)', 'internal preorders', 'exact category']",
    "002": "Concepts: ['Lie algebra', 'base field']",
    "003": "Concepts: ['sheaf of germs of analytic functions']",
    "004": "Concepts: [\"Grothendieck's construction\", 'fibration']",
    "005": "Concepts: ['Cauchy sequence', 'complete metric space']",
    "006": "Concepts: ['nilpotent case']",
    "007": "Concepts: ['Turing machine', 'language']",
    "008": "Concepts: ['theorem', 'previous work']",
    "009": "Concepts: ['enriched accessible categories', 'limits']",
}


class InterruptingGateway(Gateway):
    """Raises after a fixed number of completions to simulate a dying run."""

    def __init__(self, *args, fail_after: int, **kwargs):
        super().__init__(*args, **kwargs)
        self._remaining = fail_after

    def complete(self, prompt: str) -> str:
        if self._remaining <= 0:
            raise RuntimeError("simulated interruption")
        self._remaining -= 1
        return super().complete(prompt)


def test_pipeline_determinism(capsys, config, tmp_path):
    with criterion(capsys, "pipeline determinism", 5.0) as details:
        dataset = Dataset(
            name="fixture",
            sentences=[Sentence(sid, text) for sid, text in FIXTURE_SENTENCES],
        )
        template = get_template("v2")
        cassette_path = tmp_path / "cassette.jsonl"
        record_responses(cassette_path, dataset, template, FIXTURE_RESPONSES)
        order = [s.id for s in dataset.sentences]

        def gateway():
            return Gateway(
                GatewayConfig(mode="replay", requests_per_minute=0),
                cassette=Cassette(cassette_path),
            )

        exports = []
        for _ in range(2):
            annotations, _, failures = run_batch(
                dataset, template, gateway(), config, "llm-1"
            )
            assert failures == {}
            exports.append(to_jsonl(annotations, order))

        # Third run dies after 4 sentences, then resumes off its checkpoint.
        checkpoint = tmp_path / "progress.jsonl"
        interrupted = InterruptingGateway(
            GatewayConfig(mode="replay", requests_per_minute=0),
            cassette=Cassette(cassette_path),
            fail_after=4,
        )
        _, _, failures = run_batch(
            dataset, template, interrupted, config, "llm-1", checkpoint_path=checkpoint
        )
        assert len(failures) == 6, f"expected 6 interrupted sentences, got {len(failures)}"
        resumed, _, failures = run_batch(
            dataset, template, gateway(), config, "llm-1", checkpoint_path=checkpoint
        )
        assert failures == {}
        exports.append(to_jsonl(resumed, order))

        assert exports[0] == exports[1] == exports[2], "exports differ across runs"
        assert len(exports[0].splitlines()) == 10
        details.append("3 byte-identical exports, one interrupted and resumed")


def render_list(items: list[str]) -> str:
    rendered = []
    for item in items:
        quote = '"' if "'" in item else "'"
        rendered.append(f"{quote}{item}{quote}")
    return "[" + ", ".join(rendered) + "]"


def test_parser_robustness(capsys):
    with criterion(capsys, "parser robustness", 10.0) as details:
        plain = parse_concepts("Concepts: ['internal preorder', 'exact category']")
        assert plain.parse_status == "ok"
        assert plain.parsed_concepts == ("internal preorder", "exact category")

        reasoned = parse_concepts(
            "Concepts: ['monoidal structure', 'Day convolution']\n"
            "Reason: the first is a structure and the second a construction on it."
        )
        assert reasoned.parse_status == "ok"
        assert reasoned.parsed_concepts == ("monoidal structure", "Day convolution")

        empty = parse_concepts("Concepts: []")
        assert empty.parse_status == "empty"
        assert empty.parsed_concepts == ()

        possessive = parse_concepts("Concepts: [\"Grothendieck's construction\"]")
        assert possessive.parse_status == "ok"
        assert possessive.parsed_concepts == ("Grothendieck's construction",)

        refusal = parse_concepts("I'm sorry, but I cannot extract concepts here.")
        assert refusal.parse_status == "unparseable"

        alphabet = "abcdefgh XYZ-',.!0189"
        rng = random.Random(20260814)
        failures = 0
        for _ in range(1000):
            items = []
            for _ in range(rng.randint(1, 8)):
                size = rng.randint(1, 12)
                item = "".join(rng.choice(alphabet) for _ in range(size)).strip()
                if item:
                    items.append(item)
            if not items:
                items = ["fallback"]
            text = f"Concepts: {render_list(items)}"
            if rng.random() < 0.3:
                text += "\nReason: generated."
            parsed = parse_concepts(text)
            if parsed.parsed_concepts != tuple(items) or parsed.parse_status != "ok":
                failures += 1
        assert failures == 0, f"{failures} fuzz round-trip failures of 1000"
        details.append("named formats plus 1000-list fuzz, zero failures")


CRASH_WRITER = """
import json, sys
from mathcept.store import Store

root = sys.argv[1]
rows = [
    {"id": f"{i:03d}", "context": f"Sentence {i} mentions functors and sheaves."}
    for i in range(5)
]
raw = "\\n".join(json.dumps(r) for r in rows) + "\\n"
store = Store(root)
store.ingest_dataset(raw, "jsonl", "crash")
print("ready", flush=True)
i = 0
while True:
    store.submit_annotation(
        "crash",
        f"{i % 5:03d}",
        "writer",
        [f"concept {i}", "functor", "equivalent bicategories"],
    )
    i += 1
"""


def committed_annotation_state(events_path) -> dict[str, list]:
    """Independent read of the event log: last complete annotation per sentence."""
    state: dict[str, list] = {}
    raw = events_path.read_bytes()
    lines = raw.split(b"\n")
    lines.pop()  # empty piece after the final newline, or a torn tail
    for line in lines:
        if not line.strip():
            continue
        event = json.loads(line)
        if event.get("type") == "annotation":
            state[event["sentence_id"]] = event["concepts"]
    return state


def test_persistence_crash_safety(capsys, tmp_path):
    with criterion(capsys, "persistence crash safety", 30.0) as details:
        root = tmp_path / "crash-store"
        child = subprocess.Popen(
            [sys.executable, "-c", CRASH_WRITER, str(root)],
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
        )
        try:
            assert child.stdout.readline().strip() == "ready"
            time.sleep(0.25)
        finally:
            os.kill(child.pid, signal.SIGKILL)
            child.wait()

        expected = committed_annotation_state(root / "events.jsonl")
        assert expected, "writer produced no committed events"

        store = Store(root)
        got = {
            sid: [c.as_dict() for c in concepts]
            for sid, concepts in store.annotation_set("crash", "writer").per_sentence.items()
        }
        assert got == expected, "restarted store differs from last committed state"

        exported = store.export_annotations("crash")
        dataset_bytes = (root / "datasets" / "crash.jsonl").read_bytes()
        mirror = Store(tmp_path / "mirror")
        mirror.ingest_dataset(dataset_bytes, "jsonl", "crash")
        mirror.import_annotations("crash", exported)
        assert mirror.export_annotations("crash") == exported

        again = Store(root).export_annotations("crash")
        assert again == exported
        details.append(
            f"SIGKILL mid-stream, {len(expected)} sentences recovered,"
            " export-import-export byte-identical"
        )
