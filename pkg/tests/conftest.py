"""Shared fixtures: one acceptance-grade trained model per session.

The session model is a ccrgan-mode generator trained 20 epochs on the
seed-fixed synthetic corpus (8192 values, log-uniform over 10^2..10^13).
Acceptance criteria and the heavier integration tests all share it so the
suite trains it exactly once.
"""

import numpy as np
import pytest

from fieldsteg import dataset, metrics, rgan
from fieldsteg.nncore import Rng

CORPUS_SEED = 11
MODEL_SEED = 11


def make_corpus(hi_exp: float, count: int = 8192, seed: int = CORPUS_SEED):
    rng = Rng(seed, 99)
    return dataset.synthetic_log_uniform(count, 2, hi_exp, rng)


def train_ccrgan(corpus, epochs: int = 20, seed: int = MODEL_SEED):
    norm = dataset.NormalizationParams.from_values(corpus.values)
    batches = dataset.group_batches(dataset.normalize(corpus, norm))
    config = rgan.TrainConfig(mode="ccrgan", seed=seed, max_epochs=epochs,
                              patience=epochs + 1)
    return rgan.train(config, batches, norm)


@pytest.fixture(scope="session")
def synth_corpus():
    return make_corpus(13)


@pytest.fixture(scope="session")
def trained(synth_corpus):
    """(model, report) for the 20-epoch ccrgan run on the 10^13 corpus."""
    return train_ccrgan(synth_corpus)


@pytest.fixture(scope="session")
def model(trained):
    return trained[0]


@pytest.fixture(scope="session")
def estimated_m(model):
    return metrics.estimate_m(model, Rng(77), trials=1000)


@pytest.fixture()
def rng():
    return Rng(4242)


@pytest.fixture()
def small_batch():
    r = Rng(3)
    return np.asarray(r.uniform(0.0, 1.0, size=(4, 64)))
