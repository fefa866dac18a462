"""Domain entity tagging: recognize configured entities and rewrite text so the
entity type, rather than the name, carries the signal.

Three rewrite strategies: appositive ("Chandler, a person,"), mask_out
("person"), and hyphen ("Chandler-person,").
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .corpus import Dataset, QASample

__all__ = [
    "EntitySpan",
    "TaggedText",
    "Gazetteer",
    "TaggingError",
    "STRATEGIES",
    "DEFAULT_TYPE_LABELS",
    "recognize_entities",
    "tag_text",
    "tag_sample",
    "tag_dataset",
    "load_gazetteer",
]

STRATEGY_APPOSITIVE = "appositive"
STRATEGY_MASK_OUT = "mask_out"
STRATEGY_HYPHEN = "hyphen"
STRATEGIES = (STRATEGY_APPOSITIVE, STRATEGY_MASK_OUT, STRATEGY_HYPHEN)

# 18 type labels, after the usual NER label sets; configurable per gazetteer.
DEFAULT_TYPE_LABELS = (
    "person",
    "organisation",
    "location",
    "country",
    "city",
    "nationality",
    "language",
    "event",
    "product",
    "work_of_art",
    "law",
    "date",
    "time",
    "percent",
    "money",
    "quantity",
    "ordinal",
    "cardinal",
)

_TERMINAL_PUNCT = ".,!?;:"
_POSSESSIVE_MARKS = ("'s", "’s")


class TaggingError(ValueError):
    pass


@dataclass(frozen=True)
class EntitySpan:
    start: int
    end: int  # exclusive
    surface: str
    entity_type: str


@dataclass(frozen=True)
class TaggedText:
    original: str
    spans: tuple[EntitySpan, ...]
    strategy: str
    rendered: str


class Gazetteer:
    """Surface form -> entity type lookup with longest-match scanning."""

    def __init__(self, mapping: dict[str, str], case_sensitive: bool = True):
        self.case_sensitive = case_sensitive
        self.mapping: dict[str, str] = {}
        for surface, etype in mapping.items():
            if not surface:
                raise TaggingError("empty surface form in gazetteer")
            key = surface if case_sensitive else surface.lower()
            if key in self.mapping and self.mapping[key] != etype:
                raise TaggingError(f"surface {surface!r} mapped to two types")
            self.mapping[key] = etype
        # first word of each surface -> surfaces, longest first
        self._by_first: dict[str, list[str]] = {}
        for key in self.mapping:
            first = _first_word(key)
            self._by_first.setdefault(first, []).append(key)
        for surfaces in self._by_first.values():
            surfaces.sort(key=len, reverse=True)

    def __len__(self) -> int:
        return len(self.mapping)

    def _fold(self, text: str) -> str:
        # lower() rather than casefold(): offsets must survive folding
        return text if self.case_sensitive else text.lower()


def _first_word(text: str) -> str:
    i = 0
    while i < len(text) and _is_word(text[i]):
        i += 1
    return text[:i]


def _is_word(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


def recognize_entities(text: str, gazetteer: Gazetteer) -> list[EntitySpan]:
    """Longest-match, left-to-right, non-overlapping spans at word boundaries."""
    folded = gazetteer._fold(text)
    spans: list[EntitySpan] = []
    i = 0
    n = len(text)
    while i < n:
        if not _is_word(text[i]) or (i > 0 and _is_word(text[i - 1])):
            i += 1
            continue
        word = _first_word(folded[i:])
        match = None
        for key in gazetteer._by_first.get(word, ()):
            end = i + len(key)
            if folded[i:end] == key and (end >= n or not _is_word(text[end])):
                match = (end, key)
                break  # candidates are longest-first
        if match is None:
            i += len(word) or 1
            continue
        end, key = match
        spans.append(
            EntitySpan(start=i, end=end, surface=text[i:end], entity_type=gazetteer.mapping[key])
        )
        i = end
    return spans


def _label_text(entity_type: str) -> str:
    return entity_type.lower().replace("_", " ")


def _article(label: str) -> str:
    return "an" if label[:1] in "aeiou" else "a"


def _validate_spans(text: str, spans) -> None:
    prev_end = 0
    for span in spans:
        if not 0 <= span.start < span.end <= len(text):
            raise TaggingError(f"span offsets out of range: {span}")
        if span.start < prev_end:
            raise TaggingError(f"overlapping spans at {span.start}")
        if text[span.start : span.end] != span.surface:
            raise TaggingError(f"span surface mismatch at {span.start}: {span.surface!r}")
        prev_end = span.end


def tag_text(text: str, spans, strategy: str) -> TaggedText:
    """Rewrite entity spans per the chosen strategy.

    Only the first occurrence of each distinct surface form is tagged, and
    spans immediately followed by a possessive marker are skipped. The
    trailing comma of appositive/hyphen is dropped before terminal
    punctuation.
    """
    if strategy not in STRATEGIES:
        raise TaggingError(f"unknown strategy {strategy!r}")
    spans = sorted(spans, key=lambda s: s.start)
    _validate_spans(text, spans)

    seen_surfaces: set[str] = set()
    applied: list[EntitySpan] = []
    for span in spans:
        key = span.surface.casefold()
        if key in seen_surfaces:
            continue
        seen_surfaces.add(key)
        if any(text.startswith(mark, span.end) for mark in _POSSESSIVE_MARKS):
            continue
        applied.append(span)

    pieces: list[str] = []
    cursor = 0
    for span in applied:
        pieces.append(text[cursor : span.start])
        label = _label_text(span.entity_type)
        nxt = text[span.end : span.end + 1]
        trailing = "" if nxt == "" or nxt in _TERMINAL_PUNCT else ","
        if strategy == STRATEGY_APPOSITIVE:
            pieces.append(f"{span.surface}, {_article(label)} {label}{trailing}")
        elif strategy == STRATEGY_HYPHEN:
            pieces.append(f"{span.surface}-{label}{trailing}")
        else:  # mask_out
            pieces.append(label)
        cursor = span.end
    pieces.append(text[cursor:])
    return TaggedText(
        original=text, spans=tuple(applied), strategy=strategy, rendered="".join(pieces)
    )


def tag_sample(sample: QASample, gazetteer: Gazetteer, strategy: str) -> QASample:
    """Tag question, every answer, and knowledge independently; subtitles untouched."""

    def render(text: str) -> str:
        return tag_text(text, recognize_entities(text, gazetteer), strategy).rendered

    return replace(
        sample,
        question=render(sample.question),
        answers=tuple(render(a) for a in sample.answers),
        knowledge=render(sample.knowledge),
    )


def tag_dataset(dataset: Dataset, gazetteer: Gazetteer, strategy: str) -> Dataset:
    return dataset.with_samples(tag_sample(s, gazetteer, strategy) for s in dataset)


def load_gazetteer(path, case_sensitive: bool = True) -> Gazetteer:
    """TSV file: surface<TAB>type_label, one entry per line."""
    mapping: dict[str, str] = {}
    with open(path, encoding="utf-8") as fd:
        for lineno, line in enumerate(fd, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise TaggingError(f"line {lineno}: expected 'surface<TAB>type_label'")
            mapping[parts[0]] = parts[1]
    return Gazetteer(mapping, case_sensitive=case_sensitive)
