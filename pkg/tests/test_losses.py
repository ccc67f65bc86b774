import math

import numpy as np
import pytest

from fieldsteg.nncore import (
    BCE_EPS,
    bce_grad,
    bce_loss,
    discriminator_loss,
    generator_loss,
)


def test_bce_coin_flip_is_ln2():
    assert bce_loss([0.5], [1.0]) == pytest.approx(math.log(2), rel=1e-12)


def test_bce_near_perfect_prediction():
    p = 1.0 - BCE_EPS
    assert bce_loss([p], [1.0]) == pytest.approx(BCE_EPS, rel=1e-3)


def test_discriminator_loss_hand_value():
    # real scored 0.9, fake scored 0.1: -(log 0.9 + log 0.9) / 2
    loss = discriminator_loss(np.array([0.9]), np.array([0.1]))
    assert loss == pytest.approx(-math.log(0.9), rel=1e-12)
    assert loss == pytest.approx(0.1054, abs=5e-5)


def test_generator_loss_is_all_ones_bce():
    scores = np.array([0.3, 0.6])
    assert generator_loss(scores) == pytest.approx(
        bce_loss(scores, np.ones(2)), rel=1e-15)


def test_bce_clamps_extremes():
    assert math.isfinite(bce_loss([0.0, 1.0], [1.0, 0.0]))


def test_bce_empty_input_rejected():
    with pytest.raises(ValueError):
        bce_loss([], [])


def test_bce_length_mismatch_rejected():
    with pytest.raises(ValueError):
        bce_loss([0.5], [1.0, 0.0])


def test_bce_grad_matches_finite_difference():
    p = np.array([0.3, 0.7, 0.5])
    l = np.array([1.0, 0.0, 1.0])
    grad = bce_grad(p, l)
    h = 1e-7
    for i in range(3):
        up, down = p.copy(), p.copy()
        up[i] += h
        down[i] -= h
        fd = (bce_loss(up, l) - bce_loss(down, l)) / (2 * h)
        assert grad[i] == pytest.approx(fd, rel=1e-6)
