"""Template-based synthetic corpus generation for desk-scale experiments.

Two domains generated from a shared template pool with disjoint entity
vocabularies emulate a source/target pair with a domain gap.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .corpus import Dataset, DatasetError, QASample

__all__ = [
    "SyntheticTemplate",
    "GeneratorConfig",
    "generate_synthetic",
    "make_entity_pool",
    "default_templates",
    "LINKAGE_SHARED",
    "LINKAGE_TYPED_ALIAS",
]

LINKAGE_SHARED = "shared"
LINKAGE_TYPED_ALIAS = "typed_alias"


@dataclass(frozen=True)
class SyntheticTemplate:
    """One QA skeleton. Placeholders: {e} main entity, {p} its knowledge-side partner."""

    question: str
    correct_answer: str
    wrong_answers: tuple[str, ...]
    knowledge: str


@dataclass(frozen=True)
class GeneratorConfig:
    name: str
    templates: tuple[SyntheticTemplate, ...]
    entities: dict[str, tuple[str, ...]]  # type label -> surface forms
    n_samples: int
    n_answers: int = 4
    # shared: question and knowledge carry the same surface form;
    # typed_alias: knowledge uses a different surface of the same type,
    # so only the type label links the two once tagging is applied.
    linkage: str = LINKAGE_SHARED
    domain_tag: str = ""

    def gazetteer_mapping(self) -> dict[str, str]:
        """surface form -> type label for every entity in this domain."""
        return {s: t for t, surfaces in self.entities.items() for s in surfaces}


def generate_synthetic(config: GeneratorConfig, seed: int) -> Dataset:
    """Instantiate templates with domain entities; deterministic per seed."""
    if not config.templates:
        raise DatasetError("empty template pool")
    if not config.entities or not any(config.entities.values()):
        raise DatasetError("empty entity gazetteer")
    if config.linkage not in (LINKAGE_SHARED, LINKAGE_TYPED_ALIAS):
        raise DatasetError(f"unknown linkage mode {config.linkage!r}")

    rng = random.Random(seed)
    types = sorted(config.entities)
    # per-type draw order; recycled when a pool runs dry
    pools = {t: list(config.entities[t]) for t in types}
    for pool in pools.values():
        rng.shuffle(pool)

    def draw(t: str) -> str:
        if not pools[t]:
            pools[t] = list(config.entities[t])
            rng.shuffle(pools[t])
        return pools[t].pop()

    samples = []
    for i in range(config.n_samples):
        template = config.templates[i % len(config.templates)]
        etype = types[rng.randrange(len(types))]
        entity = draw(etype)
        if config.linkage == LINKAGE_TYPED_ALIAS:
            partner = draw(etype)
            if partner == entity and len(config.entities[etype]) > 1:
                partner = draw(etype)
        else:
            partner = entity

        question = template.question.format(e=entity, p=partner)
        correct = template.correct_answer.format(e=entity, p=partner)
        wrongs = [w.format(e=entity, p=partner) for w in template.wrong_answers]
        if len(wrongs) != config.n_answers - 1:
            raise DatasetError(
                f"template provides {len(wrongs)} wrong answers, "
                f"need {config.n_answers - 1}"
            )
        answers = wrongs + [correct]
        rng.shuffle(answers)
        samples.append(
            QASample(
                sample_id=f"{config.name}_q{i:04d}",
                clip_id=f"{config.name}_c{i:04d}",
                question=question,
                answers=tuple(answers),
                correct_index=answers.index(correct),
                knowledge=template.knowledge.format(e=entity, p=partner),
            )
        )
    return Dataset(
        name=config.name, split="train", samples=tuple(samples), domain_tag=config.domain_tag
    )


def make_entity_pool(
    prefix: str, type_labels, per_type: int, seed: int = 0
) -> dict[str, tuple[str, ...]]:
    """Pronounceable synthetic surface forms, unique across types and disjoint
    across prefixes. Surfaces carry no type-revealing structure."""
    rng = random.Random(f"{prefix}:{seed}")
    consonants = "bcdfgklmnprstvz"
    vowels = "aeiou"
    used: set[str] = set()
    pools: dict[str, tuple[str, ...]] = {}
    for t in type_labels:
        surfaces: list[str] = []
        while len(surfaces) < per_type:
            name = prefix.capitalize() + "".join(
                rng.choice(consonants) + rng.choice(vowels) for _ in range(3)
            )
            if name not in used:
                used.add(name)
                surfaces.append(name)
        pools[t] = tuple(surfaces)
    return pools


def default_templates() -> tuple[SyntheticTemplate, ...]:
    """A small pool with distinct content words per template."""
    wrongs = (
        "Nothing unusual happened there.",
        "That was never mentioned before.",
        "There is no clear explanation given.",
    )
    specs = [
        ("Why was {e} dancing at the party?", "{e} was dancing happily.", "{p} was dancing at the party because of the music."),
        ("Where did {e} travel last summer?", "{e} travelled abroad.", "{p} travelled to the coast last summer."),
        ("Who did {e} invite to dinner?", "{e} invited a colleague.", "{p} invited a colleague to dinner on Friday."),
        ("What song was {e} singing loudly?", "{e} sang an old ballad.", "{p} was singing an old ballad loudly."),
        ("How did {e} repair the broken shelf?", "{e} used a hammer.", "{p} repaired the broken shelf with a hammer."),
        ("When did {e} finish painting the fence?", "{e} finished at noon.", "{p} finished painting the fence at noon."),
        ("Why did {e} borrow the umbrella?", "{e} expected rain.", "{p} borrowed the umbrella because rain was coming."),
        ("Where was {e} hiding the letters?", "{e} hid them upstairs.", "{p} was hiding the letters upstairs in a drawer."),
        ("Who taught {e} to juggle oranges?", "{e} learned from a clown.", "{p} was taught to juggle oranges by a clown."),
        ("What recipe did {e} cook on Sunday?", "{e} cooked a stew.", "{p} cooked a stew from an old recipe on Sunday."),
    ]
    return tuple(
        SyntheticTemplate(question=q, correct_answer=a, wrong_answers=wrongs, knowledge=k)
        for q, a, k in specs
    )
