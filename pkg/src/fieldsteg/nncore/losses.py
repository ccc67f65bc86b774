"""Binary cross-entropy with a documented clamp.

Predictions are clamped to [BCE_EPS, 1 - BCE_EPS] before the logs so a
fully saturated discriminator never produces log(0). The clamp value is a
deliberate constant, not a tunable.
"""

from __future__ import annotations

import numpy as np

BCE_EPS = 1e-12


def _check(predictions, labels):
    p = np.asarray(predictions, dtype=np.float64).ravel()
    l = np.asarray(labels, dtype=np.float64).ravel()
    if p.size == 0:
        raise ValueError("bce_loss requires at least one prediction")
    if p.shape != l.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {l.shape}")
    return np.clip(p, BCE_EPS, 1.0 - BCE_EPS), l


def bce_loss(predictions, labels) -> float:
    """-mean(l*log(p) + (1-l)*log(1-p)) over the batch."""
    p, l = _check(predictions, labels)
    return float(-np.mean(l * np.log(p) + (1.0 - l) * np.log1p(-p)))


def bce_grad(predictions, labels) -> np.ndarray:
    """dJ/dp for the mean-form loss above."""
    p, l = _check(predictions, labels)
    return (p - l) / (p * (1.0 - p) * p.size)


def discriminator_loss(scores_real, scores_fake) -> float:
    """Mean prediction error on real (label 1) and fake (label 0) halves."""
    return 0.5 * (
        bce_loss(scores_real, np.ones_like(scores_real))
        + bce_loss(scores_fake, np.zeros_like(scores_fake))
    )


def generator_loss(scores_fake) -> float:
    """Penalty for fakes the discriminator recognizes: -mean log D(G(z))."""
    return bce_loss(scores_fake, np.ones_like(scores_fake))
