"""Evaluation metrics: recall at k, median rank, and answer accuracy."""

from __future__ import annotations

from dataclasses import dataclass

from .reasoning import Prediction
from .retrieval import RetrievalRanking

__all__ = [
    "MetricsError",
    "RetrievalMetrics",
    "recall_at_k",
    "median_rank",
    "accuracy",
    "compute_retrieval_metrics",
    "RECALL_KS",
]

RECALL_KS = (1, 5, 10)


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class RetrievalMetrics:
    r_at: dict[int, float]
    mr: int
    n_queries: int

    def to_dict(self) -> dict:
        return {
            "r_at": {str(k): v for k, v in sorted(self.r_at.items())},
            "mr": self.mr,
            "n_queries": self.n_queries,
        }


def _gt_ranks(rankings: list[RetrievalRanking]) -> list[int]:
    if not rankings:
        raise MetricsError("no rankings given")
    ranks = []
    for r in rankings:
        if r.gt_rank is None:
            raise MetricsError(f"ranking {r.query_id!r} has no ground-truth rank")
        ranks.append(r.gt_rank)
    return ranks


def recall_at_k(rankings: list[RetrievalRanking], k: int) -> float:
    """Fraction of queries whose ground truth ranks within the top k."""
    if k < 1:
        raise MetricsError(f"k must be >= 1, got {k}")
    ranks = _gt_ranks(rankings)
    return sum(1 for r in ranks if r <= k) / len(ranks)


def median_rank(rankings: list[RetrievalRanking]) -> int:
    """Lower median of the ground-truth ranks (always an attained rank)."""
    ranks = sorted(_gt_ranks(rankings))
    return ranks[(len(ranks) - 1) // 2]


def accuracy(predictions: list[Prediction]) -> float:
    if not predictions:
        raise MetricsError("no predictions given")
    return sum(1 for p in predictions if p.correct) / len(predictions)


def compute_retrieval_metrics(rankings: list[RetrievalRanking], ks=RECALL_KS) -> RetrievalMetrics:
    return RetrievalMetrics(
        r_at={k: recall_at_k(rankings, k) for k in ks},
        mr=median_rank(rankings),
        n_queries=len(rankings),
    )
