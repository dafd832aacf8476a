"""Shared fixtures: the bundled corpus and classifiers trained on it.

Training is the slow part, so the corpus and both model kinds are built once
per session and reused everywhere.
"""

import numpy as np
import pytest

from advglyph.corpus import make_toy_corpus
from advglyph.models import FeatureConfig, ModelParams, TrainConfig, train
from advglyph.textcore import HomoglyphTable


@pytest.fixture(scope="session")
def corpus():
    return make_toy_corpus()


@pytest.fixture(scope="session")
def train_set(corpus):
    return corpus[0]


@pytest.fixture(scope="session")
def test_set(corpus):
    return corpus[1]


@pytest.fixture(scope="session")
def linear_model(train_set):
    return train(train_set, "linear", TrainConfig())


@pytest.fixture(scope="session")
def mlp_model(train_set):
    return train(train_set, "mlp", TrainConfig())


@pytest.fixture(scope="session")
def table():
    return HomoglyphTable.default()


def zero_linear(features: FeatureConfig | None = None, label_count: int = 2) -> ModelParams:
    """A linear model with all-zero parameters: constant [1/M, ...] output."""
    fc = features or FeatureConfig()
    return ModelParams(
        "linear",
        fc,
        label_count,
        {"w": np.zeros((label_count, fc.dim)), "b": np.zeros(label_count)},
    )
