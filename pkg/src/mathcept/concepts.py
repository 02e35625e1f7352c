"""Normalization and filtering rules for mathematical terms.

Implements the annotation guidelines as deterministic functions: singular
heads, quote/whitespace cleanup, meta-word blacklisting, person-name
handling, preposition splitting, and sub-span expansion. All functions are
pure; behaviour is driven by a read-only :class:`RuleConfig`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path

_QUOTE_CHARS = "\"'`‘’“”"

# Determiners and small quantifiers dropped from preposition-split fragments.
_DETERMINERS = frozenset(
    "the a an this that these those its their our such some any each every "
    "all both no one two three four five six seven eight nine ten".split()
)


class ConceptStatus(str, Enum):
    ACCEPTED = "accepted"
    CANDIDATE = "candidate"
    REJECTED = "rejected"


class RemovalReason(str, Enum):
    PLURAL_ARTIFACT = "plural_artifact"
    META_WORD = "meta_word"
    BARE_PERSON_NAME = "bare_person_name"
    EMPTY = "empty"
    DUPLICATE = "duplicate"
    ADJUDICATED_OUT = "adjudicated_out"
    # The filter replaces a prepositional long span with its fragments; the
    # span's removal needs a loggable reason of its own.
    PREPOSITION_SPLIT = "preposition_split"


class NameUsage(str, Enum):
    BARE_NAME = "bare_name"
    NAME_BEARING_CONCEPT = "name_bearing_concept"
    NO_NAME = "no_name"


@dataclass(frozen=True)
class Concept:
    """A term as produced by an annotator plus its canonical form."""

    surface: str
    normalized: str
    status: ConceptStatus = ConceptStatus.ACCEPTED
    removal_reason: RemovalReason | None = None

    def as_dict(self) -> dict:
        out = {
            "surface": self.surface,
            "normalized": self.normalized,
            "status": self.status.value,
        }
        if self.removal_reason is not None:
            out["reason"] = self.removal_reason.value
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "Concept":
        return cls(
            surface=raw.get("surface", raw["normalized"]),
            normalized=raw["normalized"],
            status=ConceptStatus(raw.get("status", "accepted")),
            removal_reason=RemovalReason(raw["reason"]) if raw.get("reason") else None,
        )


def _read_lines(path: Path) -> list[str]:
    lines = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            lines.append(line)
    return lines


def _read_pairs(path: Path) -> dict[str, str]:
    pairs = {}
    for line in _read_lines(path):
        if "=" in line:
            plural, singular = line.split("=", 1)
        else:
            plural, singular = line.split(None, 1)
        pairs[plural.strip()] = singular.strip()
    return pairs


def _data_path(name: str) -> Path:
    return Path(str(resources.files("mathcept").joinpath("data", name)))


@dataclass(frozen=True)
class RuleConfig:
    """Read-only knobs for the normalization rules.

    List-valued fields load from newline-delimited text files; see
    :meth:`from_file` for the config-file surface.
    """

    meta_blacklist: frozenset[str]
    irregular_plurals: dict[str, str]
    preposition_list: frozenset[str]
    preposition_exceptions: frozenset[str]
    person_names: frozenset[str]
    math_adjectives: frozenset[str] = frozenset()
    no_singular: frozenset[str] = frozenset()
    split_long_spans: bool = True

    @classmethod
    def default(cls) -> "RuleConfig":
        return cls(
            meta_blacklist=frozenset(_read_lines(_data_path("meta_blacklist.txt"))),
            irregular_plurals=_read_pairs(_data_path("irregular_plurals.txt")),
            preposition_list=frozenset(_read_lines(_data_path("prepositions.txt"))),
            preposition_exceptions=frozenset(
                _read_lines(_data_path("preposition_exceptions.txt"))
            ),
            person_names=frozenset(_read_lines(_data_path("person_names.txt"))),
            math_adjectives=frozenset(_read_lines(_data_path("math_adjectives.txt"))),
            no_singular=frozenset(_read_lines(_data_path("no_singular.txt"))),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "RuleConfig":
        """Load from a key = value config file.

        Recognized keys: meta_blacklist, irregular_plurals, prepositions,
        preposition_exceptions, person_names, math_adjectives, no_singular
        (each a path to a newline-delimited file, resolved relative to the
        config file) and split_long_spans (true/false). Missing keys fall
        back to the packaged defaults.
        """
        path = Path(path)
        raw: dict[str, str] = {}
        for line in _read_lines(path):
            if "=" not in line:
                raise ValueError(f"{path}: expected 'key = value', got {line!r}")
            key, value = line.split("=", 1)
            raw[key.strip()] = value.strip().strip("\"'")

        base = cls.default()

        def resolve(key: str) -> Path:
            return (path.parent / raw[key]).resolve()

        kwargs: dict = {}
        if "meta_blacklist" in raw:
            kwargs["meta_blacklist"] = frozenset(_read_lines(resolve("meta_blacklist")))
        if "irregular_plurals" in raw:
            kwargs["irregular_plurals"] = _read_pairs(resolve("irregular_plurals"))
        if "prepositions" in raw:
            kwargs["preposition_list"] = frozenset(_read_lines(resolve("prepositions")))
        if "preposition_exceptions" in raw:
            kwargs["preposition_exceptions"] = frozenset(
                _read_lines(resolve("preposition_exceptions"))
            )
        if "person_names" in raw:
            kwargs["person_names"] = frozenset(_read_lines(resolve("person_names")))
        if "math_adjectives" in raw:
            kwargs["math_adjectives"] = frozenset(_read_lines(resolve("math_adjectives")))
        if "no_singular" in raw:
            kwargs["no_singular"] = frozenset(_read_lines(resolve("no_singular")))
        if "split_long_spans" in raw:
            kwargs["split_long_spans"] = raw["split_long_spans"].lower() in ("true", "1", "yes")
        return replace(base, **kwargs)


def _strip_possessive(token: str) -> str:
    if token.endswith(("'s", "’s")):
        return token[:-2]
    if token.endswith(("'", "’")):
        return token[:-1]
    return token


def _singularize_token(token: str, config: RuleConfig) -> str:
    if token in config.irregular_plurals:
        return config.irregular_plurals[token]
    lower = token.lower()
    if lower in config.irregular_plurals:
        # Preserve a leading capital ("Sheaves" -> "Sheaf").
        singular = config.irregular_plurals[lower]
        if token[0].isupper():
            return singular[0].upper() + singular[1:]
        return singular
    if lower in config.no_singular or lower.endswith("ics"):
        return token
    if lower.endswith("ies") and len(token) > 3:
        return token[:-3] + "y"
    if lower.endswith(("sses", "xes", "ches", "shes")):
        return token[:-2]
    # Words ending in ss/us/is keep their s; stripping would mangle them and
    # break idempotence ("class" -> "clas" -> "cla").
    if lower.endswith("s") and not lower.endswith(("ss", "us", "is")) and len(token) > 1:
        return token[:-1]
    return token


def singularize(term: str, config: RuleConfig) -> str:
    """Reduce the head (final) token of a term to its singular form.

    Only the last token is touched: "equivalent bicategories" becomes
    "equivalent bicategory". Idempotent for every input.
    """
    tokens = term.split()
    if not tokens:
        return term
    tokens[-1] = _singularize_token(tokens[-1], config)
    return " ".join(tokens)


def _strip_wrapping_quotes(text: str) -> str:
    text = text.strip()
    while len(text) >= 2 and text[0] in _QUOTE_CHARS and text[-1] in _QUOTE_CHARS:
        text = text[1:-1].strip()
    return text


def _is_proper_token(token: str, config: RuleConfig) -> bool:
    if _strip_possessive(token) in config.person_names:
        return True
    # Internal capitalization ("2-Hilbert", "PreOrd") marks a proper form.
    return any(ch.isupper() for ch in token[1:])


def normalize_term(surface: str, config: RuleConfig) -> Concept:
    """Canonicalize one annotator-produced term.

    Trims, unquotes, collapses whitespace, lowercases a capitalized first
    token unless it is a known proper-name token or internally capitalized,
    then singularizes the head. An empty cleanup result is rejected.
    """
    text = _strip_wrapping_quotes(surface)
    text = " ".join(text.split())
    if not text:
        return Concept(surface, "", ConceptStatus.REJECTED, RemovalReason.EMPTY)
    tokens = text.split()
    if not _is_proper_token(tokens[0], config):
        tokens[0] = tokens[0].lower()
    text = singularize(" ".join(tokens), config)
    return Concept(surface, text, ConceptStatus.ACCEPTED)


def classify_name_usage(term: str, config: RuleConfig) -> NameUsage:
    """Decide whether a term is a bare person name, a name-bearing concept
    ("Grothendieck's construction", "Cauchy sequence"), or name-free."""
    tokens = term.split()
    if not tokens:
        return NameUsage.NO_NAME
    stripped = [_strip_possessive(t) for t in tokens]
    if all(t in config.person_names for t in stripped):
        return NameUsage.BARE_NAME
    if stripped[0] in config.person_names and len(tokens) >= 2:
        return NameUsage.NAME_BEARING_CONCEPT
    return NameUsage.NO_NAME


def is_meta_term(term: str, config: RuleConfig) -> bool:
    """True when a normalized term carries no mathematical content.

    Matches the blacklist on the whole term, or on its head noun for
    name-free terms; a name-bearing concept keeps a blacklisted head
    ("Grothendieck's construction" survives while bare "construction"
    does not).
    """
    if term.lower() in config.meta_blacklist:
        return True
    tokens = term.split()
    if len(tokens) > 1 and tokens[-1].lower() in config.meta_blacklist:
        return classify_name_usage(term, config) is not NameUsage.NAME_BEARING_CONCEPT
    return False


def split_prepositional(term: str, config: RuleConfig) -> list[str]:
    """Break a prepositional span into index-worthy fragments.

    "sheaf of germs of analytic functions" yields ["sheaf", "germ",
    "analytic function"]; fragments are singularized and cleared of
    determiners. Terms without prepositions, and configured exception
    phrases, come back unchanged as a single-element list.
    """
    tokens = term.split()
    if not any(t.lower() in config.preposition_list for t in tokens):
        return [term]
    if term in config.preposition_exceptions:
        return [term]

    fragments: list[list[str]] = [[]]
    for token in tokens:
        if token.lower() in config.preposition_list:
            fragments.append([])
        else:
            fragments[-1].append(token)

    out: list[str] = []
    for fragment in fragments:
        kept = [t for t in fragment if t.lower() not in _DETERMINERS]
        if not kept:
            continue
        piece = singularize(" ".join(kept), config)
        if piece not in out:
            out.append(piece)
    return out


def expand_subspans(term: str, config: RuleConfig) -> list[Concept]:
    """Emit the shorter terms contained in a long span as candidates.

    Drops the leftmost modifier repeatedly: "enriched accessible category"
    yields "accessible category" then "category". Whether such sub-spans
    are sensible needs expertise, so they are candidates, never
    auto-accepted.
    """
    tokens = term.split()
    out = []
    for i in range(1, len(tokens)):
        sub = " ".join(tokens[i:])
        out.append(Concept(surface=sub, normalized=sub, status=ConceptStatus.CANDIDATE))
    return out
