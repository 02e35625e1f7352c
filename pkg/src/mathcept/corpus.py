"""Sentence dataset ingestion and export.

Datasets are ordered, immutable collections of sentences read from jsonl
(one object per line, `context` holding the sentence text) or csv
(`id,text,source` header). Export inverts ingest field-for-field.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone

log = logging.getLogger(__name__)

_LATEX_COMMAND = re.compile(r"\\[A-Za-z]+")


class CorpusError(ValueError):
    """Malformed input, duplicate ids, or unknown dataset content."""


@dataclass(frozen=True)
class Sentence:
    """One unit of annotation."""

    id: str
    text: str
    source: str = ""
    context: str = ""

    def as_dict(self) -> dict:
        out = {"id": self.id, "text": self.text, "source": self.source}
        if self.context:
            out["context"] = self.context
        return out


@dataclass
class Dataset:
    """An ordered, named collection of sentences.

    `gold` carries any concept lists shipped alongside the sentences in the
    input file, keyed by sentence id; it round-trips through export.
    """

    name: str
    sentences: list[Sentence] = field(default_factory=list)
    created_at: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat(), compare=False
    )
    gold: dict[str, list[str]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.sentences)

    def index_of(self, sentence_id: str) -> int:
        for i, s in enumerate(self.sentences):
            if s.id == sentence_id:
                return i
        raise CorpusError(f"unknown sentence id {sentence_id!r}")


def _ordinal_width(n: int) -> int:
    return max(3, len(str(max(n - 1, 0))))


def ingest(raw: bytes | str, format: str, name: str) -> Dataset:
    """Parse a jsonl or csv byte stream into a Dataset.

    Missing ids become zero-padded ordinals ("000", "001", ...). Rows must
    be well-formed; errors name the offending line. Duplicate ids and empty
    input are rejected.
    """
    if isinstance(raw, bytes):
        text = raw.decode("utf-8")
    else:
        text = raw
    if format == "jsonl":
        rows = _parse_jsonl(text)
    elif format == "csv":
        rows = _parse_csv(text)
    else:
        raise CorpusError(f"unsupported format {format!r}")
    if not rows:
        raise CorpusError("empty input")

    width = _ordinal_width(len(rows))
    dataset = Dataset(name=name)
    seen: set[str] = set()
    for ordinal, (line_no, row) in enumerate(rows):
        sid = row.get("id") or format_ordinal(ordinal, width)
        if sid in seen:
            raise CorpusError(f"line {line_no}: duplicate id {sid!r}")
        seen.add(sid)
        text_value = (row.get("text") or "").strip()
        if not text_value:
            raise CorpusError(f"line {line_no}: empty sentence text")
        if _LATEX_COMMAND.search(text_value):
            log.warning("line %d: sentence %s contains LaTeX-like markup", line_no, sid)
        dataset.sentences.append(
            Sentence(
                id=sid,
                text=text_value,
                source=row.get("source", ""),
                context=row.get("context_extra", ""),
            )
        )
        if row.get("concepts") is not None:
            dataset.gold[sid] = list(row["concepts"])
    return dataset


def format_ordinal(ordinal: int, width: int) -> str:
    return str(ordinal).zfill(width)


def _parse_jsonl(text: str) -> list[tuple[int, dict]]:
    rows = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
        if not isinstance(obj, dict):
            raise CorpusError(f"line {line_no}: expected an object")
        if "context" not in obj:
            raise CorpusError(f"line {line_no}: missing 'context' key")
        row = {
            "id": obj.get("id"),
            "text": obj["context"],
            "source": obj.get("source", ""),
            # `context` is the sentence itself in this schema; surrounding
            # abstract text travels under a separate key.
            "context_extra": obj.get("surrounding", ""),
        }
        if "concepts" in obj:
            if not isinstance(obj["concepts"], list):
                raise CorpusError(f"line {line_no}: 'concepts' must be a list")
            row["concepts"] = obj["concepts"]
        rows.append((line_no, row))
    return rows


def _parse_csv(text: str) -> list[tuple[int, dict]]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        return []
    header = [h.strip() for h in header]
    required = {"text"}
    if not required.issubset(header):
        raise CorpusError("csv header must include a 'text' column")
    rows = []
    for line_no, values in enumerate(reader, start=2):
        if not any(v.strip() for v in values):
            continue
        if len(values) != len(header):
            raise CorpusError(
                f"line {line_no}: expected {len(header)} fields, got {len(values)}"
            )
        record = dict(zip(header, values))
        rows.append(
            (
                line_no,
                {
                    "id": record.get("id") or None,
                    "text": record.get("text", ""),
                    "source": record.get("source", ""),
                    "context_extra": "",
                },
            )
        )
    return rows


def export(dataset: Dataset, format: str) -> bytes:
    """Serialize a Dataset so that ingest(export(d)) == d.

    jsonl output is byte-stable; csv carries only id/text/source.
    """
    if format == "jsonl":
        lines = []
        for s in dataset.sentences:
            obj: dict = {"id": s.id, "context": s.text, "source": s.source}
            if s.context:
                obj["surrounding"] = s.context
            if s.id in dataset.gold:
                obj["concepts"] = dataset.gold[s.id]
            lines.append(json.dumps(obj, ensure_ascii=False))
        return ("\n".join(lines) + "\n" if lines else "").encode("utf-8")
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["id", "text", "source"])
        for s in dataset.sentences:
            writer.writerow([s.id, s.text, s.source])
        return buf.getvalue().encode("utf-8")
    raise CorpusError(f"unsupported format {format!r}")


def get_sentence(dataset: Dataset, index: int) -> Sentence:
    if not 0 <= index < len(dataset.sentences):
        raise IndexError(
            f"sentence index {index} out of range for dataset "
            f"{dataset.name!r} with {len(dataset.sentences)} sentences"
        )
    return dataset.sentences[index]
