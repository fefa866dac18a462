"""Corpus statistics: question-type histogram, vocabulary distribution, and
average field lengths, with CSV and figure emission.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .corpus import Dataset
from .textfeats import tokenize

__all__ = [
    "CorpusStats",
    "DEFAULT_STOPWORDS",
    "corpus_stats",
    "write_stats_csv",
    "render_stats_figures",
]

# compact English stopword list; pass your own for anything serious
DEFAULT_STOPWORDS = frozenset(
    """a an the and or but if then than that this these those there here is are was
    were be been being am do does did doing have has had having will would can
    could should shall may might must not no nor only own same so too very s t
    just don now he she it they them his her its their we you i me my your our
    us him who whom which what when where why how all any both each few more
    most other some such of at by for with about into through during before
    after to from in out on off over under again further once n't ah oh""".split()
)


@dataclass(frozen=True)
class CorpusStats:
    question_types: Counter
    vocabulary: Counter
    avg_lengths: dict[str, float]
    n_samples: int

    def top_vocabulary(self, n: int = 30) -> list[tuple[str, int]]:
        return self.vocabulary.most_common(n)


def _avg(counts: list[int]) -> float:
    return sum(counts) / len(counts) if counts else 0.0


def corpus_stats(dataset: Dataset, stopwords=DEFAULT_STOPWORDS) -> CorpusStats:
    """Question types are the first question token; vocabulary is counted over
    questions, answers, and knowledge after stopword removal."""
    types = Counter()
    vocab = Counter()
    q_lens, sub_lens, correct_lens, wrong_lens, k_lens = [], [], [], [], []
    for sample in dataset:
        q_tokens = tokenize(sample.question)
        if q_tokens:
            types[q_tokens[0]] += 1
        q_lens.append(len(q_tokens))
        sub_lens.append(len(tokenize(sample.subtitles)))
        k_tokens = tokenize(sample.knowledge)
        k_lens.append(len(k_tokens))
        answer_tokens = [tokenize(a) for a in sample.answers]
        for i, toks in enumerate(answer_tokens):
            (correct_lens if i == sample.correct_index else wrong_lens).append(len(toks))
        for toks in [q_tokens, k_tokens, *answer_tokens]:
            vocab.update(t for t in toks if t not in stopwords)
    return CorpusStats(
        question_types=types,
        vocabulary=vocab,
        avg_lengths={
            "questions": _avg(q_lens),
            "subtitles": _avg(sub_lens),
            "correct_answers": _avg(correct_lens),
            "wrong_answers": _avg(wrong_lens),
            "knowledge": _avg(k_lens),
        },
        n_samples=len(dataset),
    )


def write_stats_csv(stats: CorpusStats, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []

    path = out_dir / "question_types.csv"
    with open(path, "w", newline="", encoding="utf-8") as fd:
        writer = csv.writer(fd)
        writer.writerow(["question_type", "count"])
        writer.writerows(stats.question_types.most_common())
    paths.append(path)

    path = out_dir / "vocabulary.csv"
    with open(path, "w", newline="", encoding="utf-8") as fd:
        writer = csv.writer(fd)
        writer.writerow(["token", "count"])
        writer.writerows(stats.vocabulary.most_common())
    paths.append(path)

    path = out_dir / "avg_lengths.csv"
    with open(path, "w", newline="", encoding="utf-8") as fd:
        writer = csv.writer(fd)
        writer.writerow(["field", "avg_tokens"])
        for name, value in stats.avg_lengths.items():
            writer.writerow([name, f"{value:.2f}"])
    paths.append(path)
    return paths


def render_stats_figures(stats: CorpusStats, out_dir, top_n: int = 30) -> list[Path]:
    """Bar charts of the question-type and vocabulary distributions."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []

    items = stats.question_types.most_common(top_n)
    if items:
        labels, counts = zip(*items)
        fig, ax = plt.subplots(figsize=(8, 4))
        ax.bar(labels, counts, color="tab:blue")
        ax.set_ylabel("questions")
        ax.set_title("Question types (first token)")
        ax.tick_params(axis="x", rotation=45)
        fig.tight_layout()
        path = out_dir / "question_types.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        paths.append(path)

    items = stats.top_vocabulary(top_n)
    if items:
        labels, counts = zip(*items)
        fig, ax = plt.subplots(figsize=(10, 4))
        ax.bar(labels, counts, color="tab:orange")
        ax.set_ylabel("frequency")
        ax.set_title(f"Top-{len(labels)} vocabulary (stopwords removed)")
        ax.tick_params(axis="x", rotation=60)
        fig.tight_layout()
        path = out_dir / "vocabulary.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        paths.append(path)
    return paths
