"""Trainable knowledge retrieval: a linear scorer over lexical features,
trained by sampled-softmax gradient ascent, with pretrain/finetune transfer.

The scorer is a pluggable contract; this linear model is the bundled
implementation and any richer scorer can replace it behind the same surface.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import Dataset, KnowledgeBase
from .tagging import DEFAULT_TYPE_LABELS
from .textfeats import profile, tokenize, trigram_jaccard

__all__ = [
    "QueryText",
    "FeatureExtractor",
    "ScorerParams",
    "RetrievalRanking",
    "RetrievalHyper",
    "RetrievalTrainResult",
    "RetrievalError",
    "FEATURE_NAMES",
    "FEATURE_DIM",
    "QUERY_SEPARATOR",
    "log_likelihood_and_grad",
    "score",
    "probability",
    "train_retrieval",
    "transfer_finetune",
    "rank",
    "save_params",
    "load_params",
]

PARAMS_VERSION = 1
QUERY_SEPARATOR = " || "

FEATURE_NAMES = (
    "idf_cosine",
    "token_overlap",
    "trigram_jaccard",
    "label_overlap",
    "length_ratio",
    "substring",
    "bias",
)
FEATURE_DIM = len(FEATURE_NAMES)


class RetrievalError(ValueError):
    pass


@dataclass(frozen=True)
class QueryText:
    """A (question, candidate answers) retrieval query."""

    question: str
    answers: tuple[str, ...] = ()

    @property
    def rendered(self) -> str:
        return QUERY_SEPARATOR.join((self.question,) + tuple(self.answers))


class FeatureExtractor:
    """Lexical features of a (query, knowledge) pair.

    IDF statistics come from the KB under evaluation, so pre-training and
    finetuning each see their own domain's statistics.
    """

    def __init__(self, kb: KnowledgeBase, type_labels=DEFAULT_TYPE_LABELS):
        n = len(kb)
        df: dict[str, int] = {}
        for text in kb.entries:
            for tok in profile(text).token_set:
                df[tok] = df.get(tok, 0) + 1
        self._idf = {t: math.log((1 + n) / (1 + d)) + 1.0 for t, d in df.items()}
        self._idf_unseen = math.log(1 + n) + 1.0
        self._labels = tuple(tuple(tokenize(lbl.replace("_", " "))) for lbl in type_labels)

    def idf(self, token: str) -> float:
        return self._idf.get(token, self._idf_unseen)

    def extract(self, query: QueryText, knowledge: str) -> np.ndarray:
        pq = profile(query.rendered)
        pk = profile(knowledge)

        shared = pq.token_set & pk.token_set
        dot = sum(pq.counts[t] * pk.counts[t] * self.idf(t) ** 2 for t in shared)
        nq = math.sqrt(sum((c * self.idf(t)) ** 2 for t, c in pq.counts.items()))
        nk = math.sqrt(sum((c * self.idf(t)) ** 2 for t, c in pk.counts.items()))
        idf_cos = dot / (nq * nk) if nq and nk else 0.0

        overlap = len(shared) / max(1, len(pq.token_set))
        jac = trigram_jaccard(pq, pk)
        labels = sum(
            1
            for toks in self._labels
            if toks and all(t in pq.token_set for t in toks) and all(t in pk.token_set for t in toks)
        )
        ratio = min(len(pq.tokens), len(pk.tokens)) / max(1, max(len(pq.tokens), len(pk.tokens)))
        sub = 1.0 if pq.canon and pk.canon and (pk.canon in pq.canon or pq.canon in pk.canon) else 0.0
        return np.array([idf_cos, overlap, jac, float(labels), ratio, sub, 1.0])


@dataclass(frozen=True)
class ScorerParams:
    """Trainable weight vector of the retrieval scoring function."""

    weights: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or not np.all(np.isfinite(w)):
            raise RetrievalError("weights must be a finite 1-d vector")
        object.__setattr__(self, "weights", w)

    @classmethod
    def zeros(cls, dim: int = FEATURE_DIM, metadata: dict | None = None) -> "ScorerParams":
        return cls(weights=np.zeros(dim), metadata=metadata or {})


@dataclass(frozen=True)
class RetrievalRanking:
    """Full ordering of a KB for one query, scores non-increasing."""

    query_id: str
    ranking: tuple[tuple[int, float], ...]
    gt_rank: int | None = None


@dataclass(frozen=True)
class RetrievalHyper:
    epochs: int = 10
    learning_rate: float = 0.5
    negatives: int = 15  # sampled per positive
    seed: int = 0


@dataclass(frozen=True)
class RetrievalTrainResult:
    params: ScorerParams
    # loss_trace[0] is the pre-training evaluation; one entry per epoch follows
    loss_trace: tuple[float, ...]


def log_likelihood_and_grad(weights: np.ndarray, features: np.ndarray, gt_index: int):
    """log p(gt | candidates) under the linear softmax scorer, and its gradient."""
    scores = features @ weights
    shifted = scores - scores.max()
    logz = math.log(np.exp(shifted).sum())
    log_p = shifted - logz
    p = np.exp(log_p)
    grad = features[gt_index] - p @ features
    return log_p[gt_index], grad


def score(theta: ScorerParams, query: QueryText, knowledge: str, extractor: FeatureExtractor) -> float:
    feats = extractor.extract(query, knowledge)
    if feats.shape != theta.weights.shape:
        raise RetrievalError(
            f"dimension mismatch: {feats.shape[0]} features vs {theta.weights.shape[0]} weights"
        )
    return float(theta.weights @ feats)


def probability(
    theta: ScorerParams, query: QueryText, candidates, extractor: FeatureExtractor
) -> np.ndarray:
    """Softmax distribution over candidate knowledge texts."""
    candidates = list(candidates)
    if not candidates:
        raise RetrievalError("empty candidate list")
    scores = np.array([score(theta, query, k, extractor) for k in candidates])
    shifted = scores - scores.max()
    exp = np.exp(shifted)
    return exp / exp.sum()


def _gt_ids(train: Dataset, kb: KnowledgeBase) -> list[int]:
    ids = []
    for sample in train:
        kb_id = kb.lookup(sample.knowledge)
        if kb_id is None:
            raise RetrievalError(f"knowledge of sample {sample.sample_id!r} is not in the KB")
        ids.append(kb_id)
    return ids


def _sample_negatives(rng, gt_id: int, kb_size: int, m: int) -> np.ndarray:
    drawn = rng.choice(kb_size - 1, size=m, replace=False)
    return np.where(drawn >= gt_id, drawn + 1, drawn)


def _candidate_features(extractor, query, kb, gt_id, neg_ids) -> np.ndarray:
    texts = [kb.text(gt_id)] + [kb.text(int(j)) for j in neg_ids]
    return np.stack([extractor.extract(query, t) for t in texts])


def _mean_loss(weights, extractor, queries, gt_ids, kb, m, rng) -> float:
    losses = []
    for query, gt_id in zip(queries, gt_ids):
        negs = _sample_negatives(rng, gt_id, len(kb), m)
        feats = _candidate_features(extractor, query, kb, gt_id, negs)
        ll, _ = log_likelihood_and_grad(weights, feats, 0)
        losses.append(-ll)
    return float(np.mean(losses))


def train_retrieval(
    theta0: ScorerParams, train: Dataset, kb: KnowledgeBase, hyper: RetrievalHyper
) -> RetrievalTrainResult:
    """Gradient ascent on mean log-likelihood of the annotated knowledge
    against sampled negatives. Negatives are resampled every epoch from the
    run seed, so a fixed seed is bit-reproducible.
    """
    if hyper.negatives >= len(kb):
        raise RetrievalError(
            f"negatives ({hyper.negatives}) must be smaller than the KB ({len(kb)})"
        )
    gt_ids = _gt_ids(train, kb)
    queries = [QueryText(s.question, s.answers) for s in train]
    extractor = FeatureExtractor(kb)
    w = theta0.weights.copy()
    lr = hyper.learning_rate

    trace = [
        _mean_loss(w, extractor, queries, gt_ids, kb, hyper.negatives,
                   np.random.default_rng([hyper.seed, 0]))
    ]
    n = len(queries)
    for epoch in range(hyper.epochs):
        rng = np.random.default_rng([hyper.seed, epoch + 1])
        losses = []
        for idx in rng.permutation(n):
            query, gt_id = queries[idx], gt_ids[idx]
            negs = _sample_negatives(rng, gt_id, len(kb), hyper.negatives)
            feats = _candidate_features(extractor, query, kb, gt_id, negs)
            ll, grad = log_likelihood_and_grad(w, feats, 0)
            losses.append(-ll)
            w = w + lr * grad
        trace.append(float(np.mean(losses)))

    metadata = dict(theta0.metadata)
    metadata.update(
        trained_on=train.name,
        epochs=hyper.epochs,
        learning_rate=hyper.learning_rate,
        negatives=hyper.negatives,
        seed=hyper.seed,
    )
    return RetrievalTrainResult(ScorerParams(w, metadata), tuple(trace))


def transfer_finetune(
    theta_pre: ScorerParams, target_train: Dataset, target_kb: KnowledgeBase, hyper: RetrievalHyper
) -> RetrievalTrainResult:
    """Same procedure as train_retrieval, initialized from the pre-trained
    weights; metadata records the lineage."""
    init = ScorerParams(
        theta_pre.weights,
        metadata={"initialized_from": theta_pre.metadata.get("trained_on", "pretrained")},
    )
    return train_retrieval(init, target_train, target_kb, hyper)


def rank(
    theta: ScorerParams,
    query: QueryText,
    kb: KnowledgeBase,
    gt_kb_id: int | None = None,
    extractor: FeatureExtractor | None = None,
    query_id: str = "",
) -> RetrievalRanking:
    """Full ordering of the KB by score, ties broken by ascending kb_id."""
    if len(kb) == 0:
        raise RetrievalError("cannot rank against an empty KB")
    if gt_kb_id is not None and not 0 <= gt_kb_id < len(kb):
        raise RetrievalError(f"gt_kb_id {gt_kb_id} not in KB of size {len(kb)}")
    extractor = extractor or FeatureExtractor(kb)
    scores = [score(theta, query, text, extractor) for text in kb.entries]
    order = sorted(range(len(kb)), key=lambda i: (-scores[i], i))
    gt_rank = order.index(gt_kb_id) + 1 if gt_kb_id is not None else None
    return RetrievalRanking(
        query_id=query_id,
        ranking=tuple((i, scores[i]) for i in order),
        gt_rank=gt_rank,
    )


def save_params(params: ScorerParams, path) -> None:
    doc = {
        "version": PARAMS_VERSION,
        "dim": int(params.weights.shape[0]),
        "weights": params.weights.tolist(),
        "metadata": params.metadata,
    }
    with open(path, "w", encoding="utf-8") as fd:
        json.dump(doc, fd, indent=2)
        fd.write("\n")


def load_params(path) -> ScorerParams:
    with open(path, encoding="utf-8") as fd:
        doc = json.load(fd)
    if doc.get("version") != PARAMS_VERSION:
        raise RetrievalError(f"unsupported params version {doc.get('version')!r}")
    weights = np.asarray(doc["weights"], dtype=float)
    if weights.shape[0] != doc.get("dim"):
        raise RetrievalError("declared dim does not match the weight vector")
    return ScorerParams(weights, metadata=doc.get("metadata", {}))
