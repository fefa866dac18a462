import pytest

from kbtransfer.corpus import Dataset, QASample
from kbtransfer.synthesis import (
    GeneratorConfig,
    default_templates,
    generate_synthetic,
    make_entity_pool,
)


def make_sample(i, question="What happened?", knowledge="Something happened.", **kw):
    defaults = dict(
        sample_id=f"s{i:03d}",
        clip_id=f"c{i:03d}",
        question=question,
        answers=("Answer one here.", "Answer two here.", "Answer three here.", "Answer four here."),
        correct_index=0,
        knowledge=knowledge,
    )
    defaults.update(kw)
    return QASample(**defaults)


@pytest.fixture
def tiny_dataset():
    return Dataset(
        name="tiny",
        split="train",
        samples=tuple(
            make_sample(i, question=f"Why did thing {i} happen?", knowledge=f"Thing {i} happened because of reason {i}.")
            for i in range(10)
        ),
    )


@pytest.fixture(scope="session")
def separable_corpus():
    """Each sample's entity token links its question, correct answer, and knowledge."""
    config = GeneratorConfig(
        name="sep",
        templates=default_templates(),
        entities=make_entity_pool("sep", ("person", "city"), 150),
        n_samples=200,
    )
    return generate_synthetic(config, seed=11)
