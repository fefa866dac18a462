"""Answer prediction: fuse per-candidate lexical features with visual
channels through a single linear layer, trained with cross-entropy.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import Dataset, KnowledgeBase, QASample, VisualFeatures
from .retrieval import RetrievalRanking
from .textfeats import pair_features, profile

__all__ = [
    "EncodedCandidate",
    "FusionLayout",
    "ReasonerParams",
    "Prediction",
    "ReasonerHyper",
    "ReasoningTrainResult",
    "ReasoningError",
    "D_U",
    "KNOWLEDGE_MODES",
    "VISION_SOURCES",
    "encode_candidate",
    "fuse_and_score",
    "predict",
    "train_reasoning",
    "cross_entropy_and_grad",
    "save_reasoner",
    "load_reasoner",
]

PARAMS_VERSION = 1

# lexical blocks: answer vs (top-K knowledge, question, subtitles, caption)
_N_BLOCKS = 4
_BLOCK_DIM = 4
D_U = _N_BLOCKS * _BLOCK_DIM + 2  # + retrieval score, + candidate length

_LENGTH_NORM = 32  # answer-token cap for the normalized length feature

KNOWLEDGE_MODES = ("retrieved", "gt", "none")
VISION_SOURCES = ("none", "image", "facial", "caption")


class ReasoningError(ValueError):
    pass


@dataclass(frozen=True)
class EncodedCandidate:
    u_vec: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.u_vec, dtype=float)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise ReasoningError("u_vec must be a finite 1-d vector")
        object.__setattr__(self, "u_vec", v)


@dataclass(frozen=True)
class FusionLayout:
    d_u: int = D_U
    d_img: int = 0
    d_face: int = 0

    @property
    def dim(self) -> int:
        # each visual channel carries a presence flag
        return self.d_u + self.d_img + 1 + self.d_face + 1


@dataclass(frozen=True)
class ReasonerParams:
    weights: np.ndarray
    bias: float = 0.0
    layout: FusionLayout = field(default_factory=FusionLayout)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.layout.dim,) or not np.all(np.isfinite(w)):
            raise ReasoningError(
                f"weights must be a finite vector of length {self.layout.dim}"
            )
        object.__setattr__(self, "weights", w)

    @classmethod
    def zeros(cls, layout: FusionLayout | None = None) -> "ReasonerParams":
        layout = layout or FusionLayout()
        return cls(weights=np.zeros(layout.dim), bias=0.0, layout=layout)


@dataclass(frozen=True)
class Prediction:
    sample_id: str
    scores: tuple[float, ...]
    predicted_index: int
    correct: bool


@dataclass(frozen=True)
class ReasonerHyper:
    epochs: int = 10
    learning_rate: float = 0.5
    seed: int = 0


@dataclass(frozen=True)
class ReasoningTrainResult:
    params: ReasonerParams
    loss_trace: tuple[float, ...]


def encode_candidate(
    question: str,
    answer: str,
    knowledge_topk,
    subtitles: str,
    retrieval_score: float,
    caption: str = "",
    expected_k: int | None = None,
) -> EncodedCandidate:
    """Lexical features of one candidate answer against the textual context.

    Knowledge texts are concatenated in rank order before feature extraction.
    """
    knowledge_topk = list(knowledge_topk)
    if expected_k is not None and len(knowledge_topk) != expected_k:
        raise ReasoningError(
            f"expected {expected_k} knowledge texts, got {len(knowledge_topk)}"
        )
    knowledge = " ".join(knowledge_topk)
    blocks = [
        pair_features(answer, knowledge),
        pair_features(answer, question),
        pair_features(answer, subtitles),
        pair_features(answer, caption),
    ]
    length = min(len(profile(answer).tokens), _LENGTH_NORM) / _LENGTH_NORM
    return EncodedCandidate(np.concatenate(blocks + [[retrieval_score, length]]))


def _fusion_vector(
    u: EncodedCandidate, v: VisualFeatures | None, layout: FusionLayout, active=("image", "facial")
) -> np.ndarray:
    if u.u_vec.shape != (layout.d_u,):
        raise ReasoningError(f"u_vec has dim {u.u_vec.shape[0]}, layout wants {layout.d_u}")
    img = np.zeros(layout.d_img)
    face = np.zeros(layout.d_face)
    img_flag = face_flag = 0.0
    if v is not None and "image" in active:
        if v.image_vec.shape != (layout.d_img,):
            raise ReasoningError(
                f"image_vec has dim {v.image_vec.shape[0]}, layout wants {layout.d_img}"
            )
        img, img_flag = v.image_vec, 1.0
    if v is not None and "facial" in active:
        if v.facial_vec.shape != (layout.d_face,):
            raise ReasoningError(
                f"facial_vec has dim {v.facial_vec.shape[0]}, layout wants {layout.d_face}"
            )
        face, face_flag = v.facial_vec, 1.0
    return np.concatenate([u.u_vec, img, [img_flag], face, [face_flag]])


def fuse_and_score(
    u: EncodedCandidate,
    v: VisualFeatures | None,
    params: ReasonerParams,
    active=("image", "facial"),
) -> float:
    """weights . concat(u, visual channels) + bias."""
    x = _fusion_vector(u, v, params.layout, active=active)
    return float(params.weights @ x + params.bias)


def _candidate_matrix(
    sample: QASample,
    ranking: RetrievalRanking | None,
    kb: KnowledgeBase | None,
    feats: VisualFeatures | None,
    layout: FusionLayout,
    k: int,
    knowledge_mode: str,
    vision: str,
) -> np.ndarray:
    if knowledge_mode not in KNOWLEDGE_MODES:
        raise ReasoningError(f"unknown knowledge mode {knowledge_mode!r}")
    if vision not in VISION_SOURCES:
        raise ReasoningError(f"unknown vision source {vision!r}")

    if knowledge_mode == "retrieved":
        if ranking is None or kb is None:
            raise ReasoningError(f"sample {sample.sample_id!r}: no ranking available")
        if ranking.query_id != sample.sample_id:
            raise ReasoningError(
                f"ranking for {ranking.query_id!r} used with sample {sample.sample_id!r}"
            )
        top = ranking.ranking[:k]
        knowledge = [kb.text(kb_id) for kb_id, _ in top]
        retrieval_score = top[0][1]
    elif knowledge_mode == "gt":
        knowledge = [sample.knowledge]
        retrieval_score = 0.0
    else:
        knowledge = []
        retrieval_score = 0.0

    if feats is not None and feats.clip_id != sample.clip_id:
        raise ReasoningError(
            f"features for clip {feats.clip_id!r} used with clip {sample.clip_id!r}"
        )
    caption = feats.caption_text if (vision == "caption" and feats is not None) else ""
    active = (vision,) if vision in ("image", "facial") else ()

    rows = []
    for answer in sample.answers:
        u = encode_candidate(
            sample.question, answer, knowledge, sample.subtitles, retrieval_score, caption
        )
        rows.append(_fusion_vector(u, feats, layout, active=active))
    return np.stack(rows)


def predict(
    sample: QASample,
    ranking: RetrievalRanking | None,
    kb: KnowledgeBase | None,
    feats: VisualFeatures | None,
    params: ReasonerParams,
    k: int = 5,
    knowledge_mode: str = "retrieved",
    vision: str = "none",
) -> Prediction:
    """Score every candidate with the same top-K knowledge; argmax wins,
    ties to the lowest index."""
    x = _candidate_matrix(sample, ranking, kb, feats, params.layout, k, knowledge_mode, vision)
    scores = x @ params.weights + params.bias
    predicted = int(np.argmax(scores))
    return Prediction(
        sample_id=sample.sample_id,
        scores=tuple(float(s) for s in scores),
        predicted_index=predicted,
        correct=predicted == sample.correct_index,
    )


def cross_entropy_and_grad(weights: np.ndarray, bias: float, x: np.ndarray, target: int):
    """Softmax cross-entropy over candidate scores and its gradients."""
    scores = x @ weights + bias
    shifted = scores - scores.max()
    logz = math.log(np.exp(shifted).sum())
    p = np.exp(shifted - logz)
    loss = -(shifted[target] - logz)
    delta = p.copy()
    delta[target] -= 1.0
    return loss, delta @ x, float(delta.sum())


def train_reasoning(
    params0: ReasonerParams,
    train: Dataset,
    rankings: dict[str, RetrievalRanking] | None,
    kb: KnowledgeBase | None,
    feats: dict[str, VisualFeatures] | None,
    hyper: ReasonerHyper,
    k: int = 5,
    knowledge_mode: str = "retrieved",
    vision: str = "none",
) -> ReasoningTrainResult:
    """Gradient descent on mean cross-entropy of the candidate softmax."""
    rankings = rankings or {}
    feats = feats or {}
    matrices = []
    targets = []
    for sample in train:
        vf = feats.get(sample.clip_id)
        if vision in ("image", "facial", "caption") and vf is None:
            raise ReasoningError(f"no visual features for clip {sample.clip_id!r}")
        matrices.append(
            _candidate_matrix(
                sample, rankings.get(sample.sample_id), kb, vf,
                params0.layout, k, knowledge_mode, vision,
            )
        )
        targets.append(sample.correct_index)

    w = params0.weights.copy()
    b = params0.bias
    lr = hyper.learning_rate
    n = len(matrices)

    def mean_loss() -> float:
        return float(
            np.mean([cross_entropy_and_grad(w, b, x, t)[0] for x, t in zip(matrices, targets)])
        )

    trace = [mean_loss()]
    for epoch in range(hyper.epochs):
        rng = np.random.default_rng([hyper.seed, epoch + 1])
        losses = []
        for idx in rng.permutation(n):
            loss, grad_w, grad_b = cross_entropy_and_grad(w, b, matrices[idx], targets[idx])
            losses.append(loss)
            w = w - lr * grad_w
            b = b - lr * grad_b
        trace.append(float(np.mean(losses)))
    return ReasoningTrainResult(
        ReasonerParams(w, bias=b, layout=params0.layout), tuple(trace)
    )


def save_reasoner(params: ReasonerParams, path) -> None:
    doc = {
        "version": PARAMS_VERSION,
        "layout": {
            "d_u": params.layout.d_u,
            "d_img": params.layout.d_img,
            "d_face": params.layout.d_face,
        },
        "weights": params.weights.tolist(),
        "bias": params.bias,
    }
    with open(path, "w", encoding="utf-8") as fd:
        json.dump(doc, fd, indent=2)
        fd.write("\n")


def load_reasoner(path) -> ReasonerParams:
    with open(path, encoding="utf-8") as fd:
        doc = json.load(fd)
    if doc.get("version") != PARAMS_VERSION:
        raise ReasoningError(f"unsupported params version {doc.get('version')!r}")
    layout = FusionLayout(**doc["layout"])
    return ReasonerParams(
        weights=np.asarray(doc["weights"], dtype=float), bias=float(doc["bias"]), layout=layout
    )
