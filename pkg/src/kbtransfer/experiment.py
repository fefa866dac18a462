"""Experiment orchestration: ingest -> tag -> augment -> retrieval
(pretrain/finetune) -> rank -> reasoning -> metrics, with reproducible
configuration and report emission.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field, replace

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .augment import DEFAULT_ALPHA, AugmentConfig, augment_training_set
from .corpus import Dataset, build_kb, load_dataset, load_visual_features, split_dataset
from .metrics import RetrievalMetrics, compute_retrieval_metrics
from .reasoning import (
    FusionLayout,
    ReasonerHyper,
    ReasonerParams,
    predict,
    train_reasoning,
)
from .retrieval import (
    FeatureExtractor,
    QueryText,
    RetrievalHyper,
    ScorerParams,
    rank,
    train_retrieval,
    transfer_finetune,
)
from .tagging import Gazetteer, load_gazetteer, tag_dataset
from .translate import translator_from_spec

__all__ = [
    "ExperimentConfig",
    "Report",
    "StageError",
    "run_experiment",
    "load_config",
    "config_fingerprint",
]

MODES = ("direct", "direct-both", "transfer")
DET_CHOICES = ("off", "appositive", "mask_out", "hyphen")
LEARNING_LABELS = {"direct": "Direct", "direct-both": "Direct (both)", "transfer": "Transfer"}


class StageError(RuntimeError):
    """A pipeline stage failed; partial artifacts are kept for inspection."""

    def __init__(self, stage: str, cause: Exception, artifacts: dict):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.artifacts = artifacts


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    seed: int = 0
    # data
    source_path: str | None = None
    target_path: str | None = None
    gazetteer_path: str | None = None
    features_path: str | None = None
    n_answers: int = 4
    fractions: tuple[float, float, float] = (0.7, 0.1, 0.2)
    kb_all_splits: bool = False
    # pipeline
    mode: str = "direct"
    det: str = "off"
    da: bool = False
    vision: str = "none"
    knowledge_mode: str = "retrieved"
    translator: str = "identity"
    pivot: str = "de"
    alpha: float = DEFAULT_ALPHA
    augment_fields: tuple[str, ...] = ("question", "answers")
    k: int = 5
    # hyperparameters (seeds are derived from the run seed)
    retrieval: RetrievalHyper = field(default_factory=RetrievalHyper)
    reasoning: ReasonerHyper = field(default_factory=ReasonerHyper)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.det not in DET_CHOICES:
            raise ValueError(f"unknown det setting {self.det!r}")
        if self.knowledge_mode not in ("retrieved", "gt", "none"):
            raise ValueError(f"unknown knowledge mode {self.knowledge_mode!r}")
        if self.vision not in ("none", "image", "facial", "caption"):
            raise ValueError(f"unknown vision source {self.vision!r}")


def config_fingerprint(config: ExperimentConfig) -> str:
    """Stable content hash of the canonicalized config."""
    canonical = json.dumps(asdict(config), sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


@dataclass
class Report:
    fingerprint: str
    config: dict
    retrieval: RetrievalMetrics | None
    reasoning_accuracy: float | None
    loss_traces: dict
    wall_clock: float

    def to_dict(self) -> dict:
        return {
            "fingerprint": self.fingerprint,
            "config": self.config,
            "retrieval": self.retrieval.to_dict() if self.retrieval else None,
            "reasoning_accuracy": self.reasoning_accuracy,
            "loss_traces": {k: list(v) for k, v in self.loss_traces.items()},
            "wall_clock": self.wall_clock,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Report":
        retrieval = None
        if doc.get("retrieval"):
            r = doc["retrieval"]
            retrieval = RetrievalMetrics(
                r_at={int(k): v for k, v in r["r_at"].items()},
                mr=r["mr"],
                n_queries=r["n_queries"],
            )
        return cls(
            fingerprint=doc["fingerprint"],
            config=doc.get("config", {}),
            retrieval=retrieval,
            reasoning_accuracy=doc.get("reasoning_accuracy"),
            loss_traces=doc.get("loss_traces", {}),
            wall_clock=doc.get("wall_clock", 0.0),
        )


def _concat(name: str, *datasets: Dataset) -> Dataset:
    samples = tuple(s for ds in datasets for s in ds)
    return Dataset(name=name, split="train", samples=samples)


def run_experiment(
    config: ExperimentConfig,
    source: Dataset | None = None,
    target: Dataset | None = None,
    gazetteer: Gazetteer | None = None,
    features: dict | None = None,
) -> Report:
    """Execute the configured pipeline. Datasets, gazetteer, and features may
    be passed in memory; otherwise they are loaded from the configured paths.
    """
    t0 = time.perf_counter()
    artifacts: dict = {}

    def fail(stage: str, exc: Exception):
        raise StageError(stage, exc, artifacts) from exc

    # ingest
    try:
        if target is None:
            if not config.target_path:
                raise ValueError("no target dataset given")
            target = load_dataset(config.target_path, config.n_answers)
        if source is None and config.source_path:
            source = load_dataset(config.source_path, config.n_answers)
        if config.mode in ("transfer", "direct-both") and source is None:
            raise ValueError(f"mode {config.mode!r} requires a source dataset")
        if gazetteer is None and config.gazetteer_path:
            gazetteer = load_gazetteer(config.gazetteer_path)
        if config.det != "off" and gazetteer is None:
            raise ValueError("det is enabled but no gazetteer given")
        if features is None:
            features = (
                load_visual_features(config.features_path) if config.features_path else {}
            )
        if config.vision in ("image", "facial", "caption") and not features:
            raise ValueError(f"vision source {config.vision!r} needs a feature file")
    except Exception as exc:
        fail("ingest", exc)

    try:
        train, val, test = split_dataset(target, config.fractions, config.seed)
        artifacts["splits"] = (train, val, test)
    except Exception as exc:
        fail("split", exc)

    # entity tagging: applied to the source and to every target split
    try:
        if config.det != "off":
            if source is not None:
                source = tag_dataset(source, gazetteer, config.det)
            train = tag_dataset(train, gazetteer, config.det)
            val = tag_dataset(val, gazetteer, config.det)
            test = tag_dataset(test, gazetteer, config.det)
            artifacts["tagged"] = (train, val, test)
    except Exception as exc:
        fail("det", exc)

    # augmentation: target training split only, after tagging
    try:
        if config.da:
            translator = translator_from_spec(config.translator, config.pivot)
            train = augment_training_set(
                train,
                translator,
                AugmentConfig(alpha=config.alpha, fields=tuple(config.augment_fields)),
            )
            artifacts["augmented_train"] = train
    except Exception as exc:
        fail("augment", exc)

    try:
        kb_basis = _concat(f"{target.name}:kb", train, val, test) if config.kb_all_splits else train
        eval_kb, _ = build_kb(kb_basis, source_name=target.name)
        artifacts["kb"] = eval_kb
    except Exception as exc:
        fail("kb", exc)

    loss_traces: dict = {}
    retrieval_metrics = None
    rankings: dict = {}
    try:
        if config.knowledge_mode == "retrieved":
            r_hyper = replace(config.retrieval, seed=config.seed)
            if config.mode == "transfer":
                source_kb, _ = build_kb(source)
                pre = train_retrieval(
                    ScorerParams.zeros(), source, source_kb, r_hyper
                )
                loss_traces["pretrain"] = pre.loss_trace
                result = transfer_finetune(pre.params, train, eval_kb, r_hyper)
            elif config.mode == "direct-both":
                combined = _concat(f"{source.name}+{train.name}", source, train)
                combined_kb, _ = build_kb(combined)
                result = train_retrieval(ScorerParams.zeros(), combined, combined_kb, r_hyper)
            else:
                result = train_retrieval(ScorerParams.zeros(), train, eval_kb, r_hyper)
            loss_traces["retrieval"] = result.loss_trace
            theta = result.params
            artifacts["scorer"] = theta

            extractor = FeatureExtractor(eval_kb)
            for split in (train, test):
                for sample in split:
                    rankings[sample.sample_id] = rank(
                        theta,
                        QueryText(sample.question, sample.answers),
                        eval_kb,
                        gt_kb_id=eval_kb.lookup(sample.knowledge),
                        extractor=extractor,
                        query_id=sample.sample_id,
                    )
            artifacts["rankings"] = rankings
            scored = [rankings[s.sample_id] for s in test if rankings[s.sample_id].gt_rank]
            if scored:
                retrieval_metrics = compute_retrieval_metrics(scored)
    except Exception as exc:
        fail("retrieval", exc)

    reasoning_accuracy = None
    try:
        if features:
            any_vf = next(iter(features.values()))
            layout = FusionLayout(
                d_img=any_vf.image_vec.shape[0], d_face=any_vf.facial_vec.shape[0]
            )
        else:
            layout = FusionLayout()
        result = train_reasoning(
            ReasonerParams.zeros(layout),
            train,
            rankings,
            eval_kb,
            features,
            replace(config.reasoning, seed=config.seed),
            k=config.k,
            knowledge_mode=config.knowledge_mode,
            vision=config.vision,
        )
        loss_traces["reasoning"] = result.loss_trace
        artifacts["reasoner"] = result.params
        predictions = [
            predict(
                s,
                rankings.get(s.sample_id),
                eval_kb,
                features.get(s.clip_id),
                result.params,
                k=config.k,
                knowledge_mode=config.knowledge_mode,
                vision=config.vision,
            )
            for s in test
        ]
        artifacts["predictions"] = predictions
        reasoning_accuracy = sum(p.correct for p in predictions) / len(predictions)
    except Exception as exc:
        fail("reasoning", exc)

    summary = {
        "name": config.name,
        "source": source.name if source is not None else "-",
        "target": target.name,
        "learning": LEARNING_LABELS[config.mode],
        "det": config.det,
        "da": config.da,
        "vision": config.vision,
        "knowledge": config.knowledge_mode,
        "seed": config.seed,
    }
    return Report(
        fingerprint=config_fingerprint(config),
        config=summary,
        retrieval=retrieval_metrics,
        reasoning_accuracy=reasoning_accuracy,
        loss_traces=loss_traces,
        wall_clock=time.perf_counter() - t0,
    )


def load_config(path) -> ExperimentConfig:
    """Read an experiment config from a TOML file with [data], [pipeline],
    [retrieval], and [reasoning] sections."""
    with open(path, "rb") as fd:
        doc = tomllib.load(fd)
    data = doc.get("data", {})
    pipe = doc.get("pipeline", {})
    retr = doc.get("retrieval", {})
    reas = doc.get("reasoning", {})
    return ExperimentConfig(
        name=doc.get("name", "experiment"),
        seed=int(doc.get("seed", 0)),
        source_path=data.get("source"),
        target_path=data.get("target"),
        gazetteer_path=data.get("gazetteer"),
        features_path=data.get("features"),
        n_answers=int(data.get("n_answers", 4)),
        fractions=tuple(data.get("fractions", (0.7, 0.1, 0.2))),
        kb_all_splits=bool(data.get("kb_all_splits", False)),
        mode=pipe.get("mode", "direct"),
        det=pipe.get("det", "off"),
        da=bool(pipe.get("da", False)),
        vision=pipe.get("vision", "none"),
        knowledge_mode=pipe.get("knowledge", "retrieved"),
        translator=pipe.get("translator", "identity"),
        pivot=pipe.get("pivot", "de"),
        alpha=float(pipe.get("alpha", DEFAULT_ALPHA)),
        augment_fields=tuple(pipe.get("fields", ("question", "answers"))),
        k=int(pipe.get("k", 5)),
        retrieval=RetrievalHyper(
            epochs=int(retr.get("epochs", 10)),
            learning_rate=float(retr.get("learning_rate", 0.5)),
            negatives=int(retr.get("negatives", 15)),
        ),
        reasoning=ReasonerHyper(
            epochs=int(reas.get("epochs", 10)),
            learning_rate=float(reas.get("learning_rate", 0.5)),
        ),
    )
