"""Dataset schema, JSONL ingestion, splitting, and knowledge-base construction."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "QASample",
    "Dataset",
    "KnowledgeBase",
    "VisualFeatures",
    "DatasetError",
    "load_dataset",
    "save_dataset",
    "build_kb",
    "split_dataset",
    "load_visual_features",
]

ORIGIN_ORIGINAL = "original"
ORIGIN_AUGMENTED = "augmented"

_REQUIRED_KEYS = (
    "sample_id",
    "clip_id",
    "question",
    "answers",
    "correct_index",
    "knowledge",
)


class DatasetError(ValueError):
    """Raised on schema violations during ingestion or construction."""


@dataclass(frozen=True)
class QASample:
    """One QA row: question, candidate answers, correct index, knowledge."""

    sample_id: str
    clip_id: str
    question: str
    answers: tuple[str, ...]
    correct_index: int
    knowledge: str
    subtitles: str = ""
    origin: str = ORIGIN_ORIGINAL

    def __post_init__(self):
        if len(self.answers) < 2:
            raise DatasetError(
                f"sample {self.sample_id!r}: needs at least 2 answers, got {len(self.answers)}"
            )
        if not 0 <= self.correct_index < len(self.answers):
            raise DatasetError(
                f"sample {self.sample_id!r}: correct_index out of range "
                f"({self.correct_index} for {len(self.answers)} answers)"
            )
        if self.origin not in (ORIGIN_ORIGINAL, ORIGIN_AUGMENTED):
            raise DatasetError(f"sample {self.sample_id!r}: bad origin {self.origin!r}")

    @property
    def correct_answer(self) -> str:
        return self.answers[self.correct_index]

    def to_record(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "clip_id": self.clip_id,
            "question": self.question,
            "answers": list(self.answers),
            "correct_index": self.correct_index,
            "knowledge": self.knowledge,
            "subtitles": self.subtitles,
            "origin": self.origin,
        }


@dataclass(frozen=True)
class Dataset:
    """An immutable collection of QA samples under one split label."""

    name: str
    split: str
    samples: tuple[QASample, ...]
    domain_tag: str = ""

    def __post_init__(self):
        seen = {}
        for s in self.samples:
            if s.sample_id in seen:
                raise DatasetError(f"duplicate sample_id {s.sample_id!r}")
            seen[s.sample_id] = True

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def with_samples(self, samples, split: str | None = None) -> "Dataset":
        return replace(self, samples=tuple(samples), split=split or self.split)


@dataclass(frozen=True)
class KnowledgeBase:
    """Deduplicated, densely indexed knowledge texts."""

    entries: tuple[str, ...]
    source_dataset: str = ""
    # normalized text -> kb_id
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        index = {}
        for kb_id, text in enumerate(self.entries):
            key = normalize_knowledge(text)
            if key in index:
                raise DatasetError(f"KB entries {index[key]} and {kb_id} are duplicates")
            index[key] = kb_id
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.entries)

    def lookup(self, knowledge_text: str) -> int | None:
        """kb_id of a knowledge text, or None if absent."""
        return self._index.get(normalize_knowledge(knowledge_text))

    def text(self, kb_id: int) -> str:
        return self.entries[kb_id]


@dataclass(frozen=True)
class VisualFeatures:
    """Precomputed per-clip visual channels; never computed in this package."""

    clip_id: str
    image_vec: np.ndarray
    facial_vec: np.ndarray
    caption_text: str = ""

    def __post_init__(self):
        for name in ("image_vec", "facial_vec"):
            vec = np.asarray(getattr(self, name), dtype=float)
            if vec.ndim != 1 or not np.all(np.isfinite(vec)):
                raise DatasetError(f"{self.clip_id}: {name} must be a finite 1-d vector")
            object.__setattr__(self, name, vec)


def normalize_knowledge(text: str) -> str:
    """Lowercase + whitespace collapse; the KB dedup key."""
    return re.sub(r"\s+", " ", text.strip()).lower()


def load_dataset(path, expected_n_answers: int = 4, name: str = "", split: str = "train") -> Dataset:
    """Read a JSONL dataset file, rejecting invariant violations with line numbers."""
    samples = []
    id_lines: dict[str, int] = {}
    with open(path, encoding="utf-8") as fd:
        for lineno, line in enumerate(fd, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            missing = [k for k in _REQUIRED_KEYS if k not in rec]
            if missing:
                raise DatasetError(f"line {lineno}: missing fields {missing}")
            answers = rec["answers"]
            if not isinstance(answers, list) or len(answers) != expected_n_answers:
                raise DatasetError(
                    f"line {lineno}: expected {expected_n_answers} answers, "
                    f"got {len(answers) if isinstance(answers, list) else type(answers).__name__}"
                )
            ci = rec["correct_index"]
            if not isinstance(ci, int) or not 0 <= ci < len(answers):
                raise DatasetError(f"line {lineno}: correct_index out of range ({ci!r})")
            sid = rec["sample_id"]
            if sid in id_lines:
                raise DatasetError(
                    f"duplicate sample_id {sid!r} on lines {id_lines[sid]} and {lineno}"
                )
            id_lines[sid] = lineno
            try:
                samples.append(
                    QASample(
                        sample_id=sid,
                        clip_id=rec["clip_id"],
                        question=rec["question"],
                        answers=tuple(answers),
                        correct_index=ci,
                        knowledge=rec["knowledge"],
                        subtitles=rec.get("subtitles", ""),
                        origin=rec.get("origin", ORIGIN_ORIGINAL),
                    )
                )
            except DatasetError as exc:
                raise DatasetError(f"line {lineno}: {exc}") from exc
    return Dataset(name=name or str(path), split=split, samples=tuple(samples))


def save_dataset(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fd:
        for sample in dataset:
            fd.write(json.dumps(sample.to_record(), ensure_ascii=False) + "\n")


def build_kb(dataset: Dataset, source_name: str = "") -> tuple[KnowledgeBase, dict[str, int]]:
    """Distinct normalized knowledge texts, plus the sample_id -> kb_id mapping.

    First-seen casing is kept for display.
    """
    if not any(s.knowledge.strip() for s in dataset):
        raise DatasetError("cannot build a KB from a dataset with no knowledge")
    entries: list[str] = []
    index: dict[str, int] = {}
    mapping: dict[str, int] = {}
    for sample in dataset:
        if not sample.knowledge.strip():
            continue
        key = normalize_knowledge(sample.knowledge)
        if key not in index:
            index[key] = len(entries)
            entries.append(sample.knowledge)
        mapping[sample.sample_id] = index[key]
    kb = KnowledgeBase(entries=tuple(entries), source_dataset=source_name or dataset.name)
    return kb, mapping


def split_dataset(dataset: Dataset, fractions, seed: int) -> tuple[Dataset, Dataset, Dataset]:
    """Disjoint, exhaustive train/val/test partition, deterministic for a seed.

    Sizes follow largest-remainder apportionment with ties going to train.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise DatasetError(f"fractions must be 3 positive values, got {fractions}")
    if not math.isclose(sum(fractions), 1.0, abs_tol=1e-9):
        raise DatasetError(f"fractions must sum to 1, got {sum(fractions)}")

    n = len(dataset)
    quotas = [f * n for f in fractions]
    sizes = [int(q) for q in quotas]
    remainders = [q - s for q, s in zip(quotas, sizes)]
    # largest remainder first; ties resolved toward earlier splits (train first)
    order = sorted(range(3), key=lambda i: (-remainders[i], i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    bounds = [sizes[0], sizes[0] + sizes[1], n]
    parts = []
    start = 0
    for split_name, stop in zip(("train", "val", "test"), bounds):
        chosen = sorted(perm[start:stop])
        parts.append(
            Dataset(
                name=f"{dataset.name}:{split_name}",
                split=split_name,
                samples=tuple(dataset.samples[i] for i in chosen),
                domain_tag=dataset.domain_tag,
            )
        )
        start = stop
    return tuple(parts)


def save_kb(kb: KnowledgeBase, path, mapping: dict[str, int] | None = None) -> None:
    doc = {"source_dataset": kb.source_dataset, "entries": list(kb.entries)}
    if mapping is not None:
        doc["mapping"] = mapping
    with open(path, "w", encoding="utf-8") as fd:
        json.dump(doc, fd, ensure_ascii=False, indent=2)
        fd.write("\n")


def load_kb(path) -> KnowledgeBase:
    with open(path, encoding="utf-8") as fd:
        doc = json.load(fd)
    return KnowledgeBase(entries=tuple(doc["entries"]), source_dataset=doc.get("source_dataset", ""))


def load_visual_features(path) -> dict[str, VisualFeatures]:
    """Read the per-clip feature JSONL; the first record is a dimension header."""
    feats: dict[str, VisualFeatures] = {}
    d_img = d_face = None
    with open(path, encoding="utf-8") as fd:
        for lineno, line in enumerate(fd, start=1):
            if not line.strip():
                continue
            rec = json.loads(line)
            if d_img is None:
                if rec.get("type") != "header" or "d_img" not in rec or "d_face" not in rec:
                    raise DatasetError("feature file must start with a dimension header record")
                d_img, d_face = int(rec["d_img"]), int(rec["d_face"])
                continue
            vf = VisualFeatures(
                clip_id=rec["clip_id"],
                image_vec=np.asarray(rec["image_vec"], dtype=float),
                facial_vec=np.asarray(rec["facial_vec"], dtype=float),
                caption_text=rec.get("caption_text", ""),
            )
            if vf.image_vec.shape != (d_img,) or vf.facial_vec.shape != (d_face,):
                raise DatasetError(
                    f"line {lineno}: feature dimensions do not match header "
                    f"({vf.image_vec.shape[0]}/{vf.facial_vec.shape[0]} vs {d_img}/{d_face})"
                )
            feats[vf.clip_id] = vf
    if d_img is None:
        raise DatasetError("feature file is empty")
    return feats
