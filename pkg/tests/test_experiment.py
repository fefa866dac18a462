import pytest

from kbtransfer.experiment import (
    ExperimentConfig,
    Report,
    StageError,
    config_fingerprint,
    load_config,
    run_experiment,
)
from kbtransfer.retrieval import RetrievalHyper
from kbtransfer.reasoning import ReasonerHyper
from kbtransfer.synthesis import (
    GeneratorConfig,
    default_templates,
    generate_synthetic,
    make_entity_pool,
)
from kbtransfer.tagging import Gazetteer


def small_corpus(name, seed, n=60):
    config = GeneratorConfig(
        name=name,
        templates=default_templates(),
        entities=make_entity_pool(name, ("person", "city"), 50),
        n_samples=n,
    )
    return generate_synthetic(config, seed=seed), Gazetteer(config.gazetteer_mapping())


def fast_config(**kw):
    defaults = dict(
        name="unit",
        seed=0,
        mode="direct",
        kb_all_splits=True,
        retrieval=RetrievalHyper(epochs=2, negatives=5),
        reasoning=ReasonerHyper(epochs=2),
    )
    defaults.update(kw)
    return ExperimentConfig(**defaults)


class TestRun:
    def test_direct_report_shape(self):
        target, _ = small_corpus("tgt", seed=1)
        report = run_experiment(fast_config(), target=target)
        assert report.fingerprint == config_fingerprint(fast_config())
        assert report.config["target"] == "tgt"
        assert report.config["learning"] == "Direct"
        assert report.retrieval is not None
        assert set(report.retrieval.r_at) == {1, 5, 10}
        assert report.retrieval.mr >= 1
        assert 0.0 <= report.reasoning_accuracy <= 1.0
        assert set(report.loss_traces) == {"retrieval", "reasoning"}
        assert report.wall_clock > 0

    def test_deterministic_given_seed(self):
        target, _ = small_corpus("tgt", seed=1)
        a = run_experiment(fast_config(), target=target)
        b = run_experiment(fast_config(), target=target)
        assert a.retrieval.to_dict() == b.retrieval.to_dict()
        assert a.reasoning_accuracy == b.reasoning_accuracy
        assert a.loss_traces == b.loss_traces
        assert a.fingerprint == b.fingerprint

    def test_transfer_has_pretrain_trace(self):
        target, _ = small_corpus("tgt", seed=1)
        source, _ = small_corpus("src", seed=2)
        report = run_experiment(fast_config(mode="transfer"), source=source, target=target)
        assert "pretrain" in report.loss_traces
        assert report.config["learning"] == "Transfer"
        assert report.config["source"] == "src"

    def test_det_changes_fingerprint_and_runs(self):
        target, gaz = small_corpus("tgt", seed=1)
        base = fast_config()
        det = fast_config(det="appositive")
        assert config_fingerprint(base) != config_fingerprint(det)
        report = run_experiment(det, target=target, gazetteer=gaz)
        assert report.retrieval is not None

    def test_knowledge_none_skips_retrieval(self):
        target, _ = small_corpus("tgt", seed=1)
        report = run_experiment(fast_config(knowledge_mode="none"), target=target)
        assert report.retrieval is None
        assert "retrieval" not in report.loss_traces
        assert report.reasoning_accuracy is not None

    def test_da_with_identity_translator_matches_baseline(self):
        # identity back-translation never survives the similarity filter, so
        # augmentation must not change any metric
        target, _ = small_corpus("tgt", seed=1)
        plain = run_experiment(fast_config(), target=target)
        augmented = run_experiment(fast_config(da=True, translator="identity"), target=target)
        assert plain.retrieval.to_dict() == augmented.retrieval.to_dict()
        assert plain.reasoning_accuracy == augmented.reasoning_accuracy
        assert plain.fingerprint != augmented.fingerprint

    def test_da_with_paraphrases_changes_training(self, tmp_path):
        table = tmp_path / "table.tsv"
        table.write_text("was\twar\tis\nto\tzu\ttowards\n")
        target, _ = small_corpus("tgt", seed=1)
        plain = run_experiment(fast_config(), target=target)
        augmented = run_experiment(
            fast_config(da=True, translator=f"mock:{table}", alpha=0.999), target=target
        )
        assert augmented.loss_traces["retrieval"] != plain.loss_traces["retrieval"]


class TestStageErrors:
    def test_missing_target(self):
        with pytest.raises(StageError) as err:
            run_experiment(fast_config())
        assert err.value.stage == "ingest"

    def test_det_without_gazetteer(self):
        target, _ = small_corpus("tgt", seed=1)
        with pytest.raises(StageError) as err:
            run_experiment(fast_config(det="appositive"), target=target)
        assert err.value.stage == "ingest"

    def test_transfer_without_source(self):
        target, _ = small_corpus("tgt", seed=1)
        with pytest.raises(StageError) as err:
            run_experiment(fast_config(mode="transfer"), target=target)
        assert err.value.stage == "ingest"

    def test_retrieval_failure_keeps_split_artifacts(self):
        target, _ = small_corpus("tgt", seed=1)
        bad = fast_config(retrieval=RetrievalHyper(epochs=1, negatives=10_000))
        with pytest.raises(StageError) as err:
            run_experiment(bad, target=target)
        assert err.value.stage == "retrieval"
        assert "splits" in err.value.artifacts
        assert "kb" in err.value.artifacts


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(mode="magic")
        with pytest.raises(ValueError):
            ExperimentConfig(det="shout")
        with pytest.raises(ValueError):
            ExperimentConfig(knowledge_mode="psychic")
        with pytest.raises(ValueError):
            ExperimentConfig(vision="radar")

    def test_fingerprint_stable_and_sensitive(self):
        a = fast_config()
        b = fast_config()
        assert config_fingerprint(a) == config_fingerprint(b)
        assert len(config_fingerprint(a)) == 12
        assert config_fingerprint(fast_config(seed=1)) != config_fingerprint(a)

    def test_load_config_toml(self, tmp_path):
        path = tmp_path / "exp.toml"
        path.write_text(
            """
name = "demo-transfer"
seed = 3

[data]
target = "target.jsonl"
source = "source.jsonl"
gazetteer = "gaz.tsv"
fractions = [0.8, 0.1, 0.1]
kb_all_splits = true

[pipeline]
mode = "transfer"
det = "appositive"
da = true
knowledge = "retrieved"
alpha = 0.9
fields = ["question"]
k = 3

[retrieval]
epochs = 4
negatives = 7

[reasoning]
epochs = 6
"""
        )
        config = load_config(path)
        assert config.name == "demo-transfer"
        assert config.seed == 3
        assert config.mode == "transfer"
        assert config.det == "appositive"
        assert config.da is True
        assert config.fractions == (0.8, 0.1, 0.1)
        assert config.kb_all_splits is True
        assert config.alpha == 0.9
        assert config.augment_fields == ("question",)
        assert config.k == 3
        assert config.retrieval.epochs == 4
        assert config.retrieval.negatives == 7
        assert config.reasoning.epochs == 6

    def test_report_round_trip(self):
        target, _ = small_corpus("tgt", seed=1)
        report = run_experiment(fast_config(), target=target)
        doc = report.to_dict()
        loaded = Report.from_dict(doc)
        assert loaded.fingerprint == report.fingerprint
        assert loaded.retrieval == report.retrieval
        assert loaded.reasoning_accuracy == report.reasoning_accuracy
