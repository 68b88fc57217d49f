import pytest

from quandary.demo import DEMO_MATCH, build_demo_model, demo_corpus, golden_tables


@pytest.fixture(scope="session")
def tables():
    return golden_tables()


@pytest.fixture(scope="session")
def demo_examples():
    return demo_corpus()


@pytest.fixture(scope="session")
def demo_model(demo_examples):
    return build_demo_model(demo_examples)


@pytest.fixture(scope="session")
def match_cfg():
    return DEMO_MATCH
