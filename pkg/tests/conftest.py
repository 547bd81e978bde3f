import pytest

from beliefbank.beliefs import Belief, SentenceKey, TemplateRegistry
from beliefbank.constraints import backward, implication, mutex
from beliefbank.datagen import GeneratorConfig, generate


def key(entity, template_id):
    return SentenceKey(entity, template_id)


def belief(entity, template_id, label, weight=0.9, **kw):
    return Belief(SentenceKey(entity, template_id), label, weight, **kw)


@pytest.fixture(scope="session")
def animals():
    """Small hand-built world: dogs, birds, fish."""
    registry = TemplateRegistry.from_ids([
        "isa.dog", "isa.mammal", "isa.animal", "isa.bird", "isa.fish",
        "has.tail", "has.gills", "has.wings",
    ])
    constraints = [
        implication("isa.dog", "isa.mammal", 1.0),
        implication("isa.dog", "has.tail", 0.8),
        implication("isa.mammal", "isa.animal", 1.0),
        implication("isa.bird", "isa.animal", 1.0),
        implication("isa.fish", "isa.animal", 1.0),
        implication("isa.fish", "has.gills", 0.9),
        implication("isa.bird", "has.wings", 0.9),
        *mutex("isa.bird", "isa.fish", 1.0),
        backward("has.gills", ["isa.fish"], 0.1),
    ]
    return registry, constraints


@pytest.fixture(scope="session")
def small_dataset():
    return generate(GeneratorConfig(n_concepts=6, n_entities=5, n_dev_entities=3,
                                    properties_per_concept=3, seed=1))


@pytest.fixture(scope="session")
def default_dataset():
    return generate(GeneratorConfig())


# ---------------------------------------------------------------- acceptance reporting

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def pytest_collection_modifyitems(session, config, items):
    # acceptance checks run last so the runtime budget covers the whole suite
    items.sort(key=lambda item: item.fspath.basename == "test_acceptance.py")


def pytest_sessionstart(session):
    import time

    session.config._beliefbank_start = time.perf_counter()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
