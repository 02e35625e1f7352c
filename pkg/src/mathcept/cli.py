"""Command-line entry point.

Subcommands: ingest, export, extract, baseline, filter, agree, diff,
adjudicate-queue, serve, replay-verify. Machine-readable results go to
stdout, diagnostics to stderr. Exit codes: 0 success, 1 operational
error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import random
import sys
from pathlib import Path

from . import agreement as agreement_mod
from . import corpus, pipeline
from .concepts import RuleConfig
from .corpus import CorpusError, Dataset
from .gateway import Cassette, Gateway, GatewayConfig, GatewayError
from .prompting import get_template, load_examples
from .store import Store, StoreError

log = logging.getLogger(__name__)


def _add_store_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--store",
        default=os.environ.get("MATHCEPT_STORE", "mathcept-store"),
        help="store root directory (env MATHCEPT_STORE)",
    )
    parser.add_argument("--config", help="rule config file (key = value lines)")


def _rule_config(args) -> RuleConfig:
    if getattr(args, "config", None):
        return RuleConfig.from_file(args.config)
    return RuleConfig.default()


def _store(args) -> Store:
    return Store(args.store, config=_rule_config(args))


def _emit(obj) -> None:
    print(json.dumps(obj, ensure_ascii=False, indent=2))


def _read_input(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    return Path(path).read_bytes()


def _write_output(path: str | None, payload: bytes) -> None:
    if path is None or path == "-":
        sys.stdout.buffer.write(payload)
        sys.stdout.buffer.flush()
    else:
        Path(path).write_bytes(payload)


def _gateway(args, for_write: bool = True) -> Gateway:
    cassette = Cassette(args.cassette) if args.cassette else None
    config = GatewayConfig.from_env(
        mode=args.mode,
        max_retries=args.max_retries,
        requests_per_minute=args.rpm,
    )
    if args.mode in ("replay", "record") and cassette is None:
        raise GatewayError(f"--mode {args.mode} requires --cassette")
    return Gateway(config, cassette=cassette)


def _template(args):
    template = get_template(args.template)
    if getattr(args, "examples", None):
        template = get_template(args.template, examples=load_examples(args.examples))
    return template


def cmd_ingest(args) -> int:
    store = _store(args)
    dataset = store.ingest_dataset(_read_input(args.file), args.format, args.name)
    _emit({"name": dataset.name, "sentence_count": len(dataset.sentences)})
    return 0


def cmd_export(args) -> int:
    store = _store(args)
    if args.annotator or args.decisions:
        payload = store.export_annotations(
            args.dataset, args.annotator, include_decisions=args.decisions
        )
    else:
        payload = corpus.export(store.get_dataset(args.dataset), args.format)
    _write_output(args.out, payload)
    return 0


def _sampled(dataset: Dataset, sample: int | None, seed: int) -> Dataset:
    if sample is None or sample >= len(dataset.sentences):
        return dataset
    rng = random.Random(seed)
    picked = rng.sample(range(len(dataset.sentences)), sample)
    sentences = [dataset.sentences[i] for i in sorted(picked)]
    return Dataset(name=dataset.name, sentences=sentences, gold=dataset.gold)


def cmd_extract(args) -> int:
    store = _store(args)
    dataset = _sampled(store.get_dataset(args.dataset), args.sample, args.seed)
    annotations, report, failures = pipeline.run_batch(
        dataset,
        _template(args),
        _gateway(args),
        store.config,
        args.annotator,
        workers=args.workers,
        checkpoint_path=args.checkpoint,
    )
    store.store_annotation_set(annotations)
    summary = report.summary()
    summary["annotator"] = args.annotator
    summary["sentences"] = len(annotations.per_sentence)
    summary["failures"] = failures
    _emit(summary)
    if failures:
        print(f"{len(failures)} sentence(s) failed", file=sys.stderr)
        return 1
    return 0


def cmd_baseline(args) -> int:
    store = _store(args)
    dataset = store.get_dataset(args.dataset)
    lexicon = {
        line.strip()
        for line in Path(args.lexicon).read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.startswith("#")
    }
    annotations = pipeline.AnnotationSet(
        annotator_id=args.annotator, dataset_name=dataset.name, provenance="rule_baseline"
    )
    for sentence in dataset.sentences:
        annotations.set_sentence(
            sentence.id, pipeline.baseline_extract(sentence, lexicon, store.config)
        )
    store.store_annotation_set(annotations)
    total = sum(len(v) for v in annotations.per_sentence.values())
    _emit({"annotator": args.annotator, "sentences": len(dataset.sentences), "concepts": total})
    return 0


def cmd_filter(args) -> int:
    store = _store(args)
    source = store.annotation_set(args.dataset, args.annotator)
    target_id = getattr(args, "as") or f"{args.annotator}-filtered"
    filtered = pipeline.AnnotationSet(
        annotator_id=target_id, dataset_name=args.dataset, provenance=source.provenance
    )
    aggregate = pipeline.FilterReport()
    for sid, concepts in source.per_sentence.items():
        kept, report = pipeline.post_filter(list(concepts), store.config)
        filtered.set_sentence(sid, kept)
        aggregate.merge(report)
    store.store_annotation_set(filtered)
    summary = aggregate.summary()
    summary["annotator"] = target_id
    _emit(summary)
    return 0


def cmd_agree(args) -> int:
    store = _store(args)
    names = [a.strip() for a in args.annotators.split(",") if a.strip()]
    report = store.agreement_report(args.dataset, names, decisions=args.decisions)
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
        print(f"wrote {args.out}", file=sys.stderr)
    print(report.to_text())
    return 0


def cmd_diff(args) -> int:
    store = _store(args)
    set_a = store.annotation_set(args.dataset, args.a, decisions=args.decisions)
    set_b = store.annotation_set(args.dataset, args.b, decisions=args.decisions)
    only_a, only_b, common = agreement_mod.diff(set_a, set_b)
    _emit(
        {
            "a": args.a,
            "b": args.b,
            "only_a": only_a,
            "only_b": only_b,
            "common": common,
            "counts": {"only_a": len(only_a), "only_b": len(only_b), "common": len(common)},
        }
    )
    return 0


def cmd_adjudicate_queue(args) -> int:
    store = _store(args)
    queue = store.build_disagreement_queue(args.dataset, args.a, args.b)
    _emit(queue.as_dict())
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    static = args.static
    if static is None:
        candidate = Path("frontend") / "dist"
        static = candidate if candidate.is_dir() else None
    serve(
        args.store,
        host=args.host,
        port=args.port,
        static_dir=static,
        config=_rule_config(args),
    )
    return 0


def cmd_replay_verify(args) -> int:
    store = _store(args)
    dataset = store.get_dataset(args.dataset)
    stored = store.annotation_set(args.dataset, args.annotator)
    gateway = Gateway(
        GatewayConfig(mode="replay", requests_per_minute=0),
        cassette=Cassette(args.cassette),
    )
    recomputed, _, failures = pipeline.run_batch(
        dataset, _template(args), gateway, store.config, args.annotator
    )
    order = [s.id for s in dataset.sentences]
    stored_bytes = pipeline.to_jsonl(stored, order)
    recomputed_bytes = pipeline.to_jsonl(recomputed, order)
    if failures:
        _emit({"verified": False, "failures": failures})
        return 1
    if stored_bytes == recomputed_bytes:
        _emit({"verified": True, "sentences": len(order)})
        return 0
    differing = [
        sid
        for sid in order
        if stored.per_sentence.get(sid) != recomputed.per_sentence.get(sid)
    ]
    _emit({"verified": False, "differing_sentences": differing})
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mathcept",
        description="Extract, normalize, compare, and adjudicate mathematical concepts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load a jsonl/csv sentence file into the store")
    _add_store_args(p)
    p.add_argument("--file", required=True, help="input path or - for stdin")
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--name", required=True, help="dataset name")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("export", help="export a dataset or stored annotations")
    _add_store_args(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--annotator", help="export this annotator's annotations instead")
    p.add_argument("--decisions", action="store_true", help="apply adjudication decisions")
    p.add_argument("--out", help="output path (default stdout)")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("extract", help="run LLM extraction over a dataset")
    _add_store_args(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--annotator", required=True)
    p.add_argument("--template", choices=("v1", "v2", "v3"), default="v3")
    p.add_argument("--examples", help="override the in-context example bank file")
    p.add_argument("--mode", choices=("live", "record", "replay"), default="replay")
    p.add_argument("--cassette", help="prompt/response cassette jsonl")
    p.add_argument("--checkpoint", help="batch progress file for resumable runs")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--rpm", type=int, default=60, help="requests per minute cap")
    p.add_argument("--max-retries", type=int, default=3)
    p.add_argument("--sample", type=int, help="extract a random sample of N sentences")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("baseline", help="lexicon longest-match extraction (no LLM)")
    _add_store_args(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--annotator", required=True)
    p.add_argument("--lexicon", required=True, help="newline-delimited normalized terms")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("filter", help="post-filter a stored annotation set")
    _add_store_args(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--annotator", required=True)
    p.add_argument("--as", dest="as", help="annotator id for the filtered set")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("agree", help="agreement report over stored annotators")
    _add_store_args(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--annotators", required=True, help="comma-separated annotator ids")
    p.add_argument("--decisions", action="store_true", help="apply adjudication decisions")
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_agree)

    p = sub.add_parser("diff", help="set difference between two annotators")
    _add_store_args(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--decisions", action="store_true")
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("adjudicate-queue", help="materialize the disagreement queue")
    _add_store_args(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(func=cmd_adjudicate_queue)

    p = sub.add_parser("serve", help="run the HTTP annotation service")
    _add_store_args(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.add_argument("--static", help="static frontend directory (default frontend/dist)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser(
        "replay-verify", help="check a stored annotation set against a cassette replay"
    )
    _add_store_args(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--annotator", required=True)
    p.add_argument("--template", choices=("v1", "v2", "v3"), default="v3")
    p.add_argument("--examples", help="override the in-context example bank file")
    p.add_argument("--cassette", required=True)
    p.set_defaults(func=cmd_replay_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING, format="%(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (StoreError, CorpusError, GatewayError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
