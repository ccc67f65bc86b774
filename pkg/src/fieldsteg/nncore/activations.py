"""Activation functions with forward, derivative, and inverse maps.

The generator only ever uses activations that are strictly monotone on
their working range (LeakyReLU, Sigmoid, ClipSigmoid above its floor), so
running it backwards is just a matter of applying the inverses in reverse
order. ReLU is provided for the discriminator and is not invertible.

ClipSigmoid clamps Sigmoid from below at a floor ``theta``:

    clip_sigmoid(x) = theta        if sigmoid(x) <= theta
                      sigmoid(x)   otherwise

On the clamped segment the derivative is exactly zero, which is the whole
point: weight updates stop chasing outputs that already collapsed to the
floor. The flat segment has no preimage, so the inverse refuses it.
"""

from __future__ import annotations

import numpy as np

from ..errors import ActivationDomainError, NotInvertibleAtPointError


def _stable_sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _logit(y):
    # log(y) - log(1-y), evaluated so each end keeps full relative precision
    return np.log(y) - np.log1p(-y)


class Identity:
    """Pass-through activation, used in tests and plain regressions."""

    name = "identity"

    def forward(self, x):
        return np.asarray(x, dtype=np.float64)

    def grad(self, x, y):
        return np.ones_like(np.asarray(x, dtype=np.float64))

    def inverse(self, y):
        return np.asarray(y, dtype=np.float64)


class ReLU:
    name = "relu"

    def forward(self, x):
        return np.maximum(np.asarray(x, dtype=np.float64), 0.0)

    def grad(self, x, y):
        return (np.asarray(x) > 0).astype(np.float64)

    def inverse(self, y):
        raise ActivationDomainError("relu is not injective and has no inverse")


class LeakyReLU:
    """x for x >= 0, alpha * x otherwise. Piecewise linear and bijective."""

    name = "leaky_relu"

    def __init__(self, alpha: float = 0.3):
        if not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {alpha}")
        self.alpha = float(alpha)

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        return np.where(x >= 0, x, self.alpha * x)

    def grad(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        return np.where(x >= 0, 1.0, self.alpha)

    def inverse(self, y):
        y = np.asarray(y, dtype=np.float64)
        return np.where(y >= 0, y, y / self.alpha)


class Sigmoid:
    name = "sigmoid"

    def forward(self, x):
        return _stable_sigmoid(x)

    def grad(self, x, y):
        y = np.asarray(y, dtype=np.float64)
        return y * (1.0 - y)

    def inverse(self, y):
        y = np.asarray(y, dtype=np.float64)
        if np.any(y <= 0.0) or np.any(y >= 1.0):
            raise ActivationDomainError("sigmoid inverse requires 0 < y < 1")
        return _logit(y)


class ClipSigmoid:
    """Sigmoid clamped below at ``theta`` with zero gradient on the floor."""

    name = "clip_sigmoid"

    def __init__(self, theta: float = 1e-20):
        if not 0.0 < theta < 1.0:
            raise ValueError(f"theta must be in (0, 1), got {theta}")
        self.theta = float(theta)

    def forward(self, x):
        s = _stable_sigmoid(x)
        return np.maximum(s, self.theta)

    def grad(self, x, y):
        # exactly zero wherever the forward pass clamped
        s = np.asarray(y, dtype=np.float64)
        raw = _stable_sigmoid(np.asarray(x, dtype=np.float64))
        return np.where(raw > self.theta, s * (1.0 - s), 0.0)

    def inverse(self, y):
        y = np.asarray(y, dtype=np.float64)
        if np.any(y >= 1.0):
            raise ActivationDomainError("clip_sigmoid inverse requires y < 1")
        if np.any(y <= self.theta):
            raise NotInvertibleAtPointError(
                f"value at or below the clip floor {self.theta!r} has no preimage"
            )
        return _logit(y)


_BY_NAME = {
    "identity": Identity,
    "relu": ReLU,
    "leaky_relu": LeakyReLU,
    "sigmoid": Sigmoid,
    "clip_sigmoid": ClipSigmoid,
}


def activation_from_spec(spec: dict):
    """Rebuild an activation from its serialized {'kind': ..., ...} form."""
    kind = spec.get("kind")
    if kind == "leaky_relu":
        return LeakyReLU(alpha=float(spec["alpha"]))
    if kind == "clip_sigmoid":
        return ClipSigmoid(theta=float(spec["theta"]))
    if kind in _BY_NAME:
        return _BY_NAME[kind]()
    raise ValueError(f"unknown activation kind: {kind!r}")


def activation_to_spec(act) -> dict:
    spec = {"kind": act.name}
    if isinstance(act, LeakyReLU):
        spec["alpha"] = act.alpha
    if isinstance(act, ClipSigmoid):
        spec["theta"] = act.theta
    return spec
