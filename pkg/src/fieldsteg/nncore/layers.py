"""Dense and 1-D convolution layers with explicit reverse-mode gradients.

Forward passes are pure; anything backward needs is returned as an opaque
cache. Parameters live in plain float64 arrays and updates are plain SGD,
which keeps every training run bit-reproducible from its seed on a given
platform (single fixed reduction path, no optimizer state).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError
from .rng import Rng

DISCRIMINATOR_CHANNELS = (1, 8, 8, 16, 16, 32, 32)
KERNEL_SIZE = 3


def _uniform_fan_in(rng: Rng, fan_in: int, shape) -> np.ndarray:
    limit = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-limit, limit, size=shape)


@dataclass
class DenseLayer:
    """Affine map y = W x + b with W of shape (out_dim, in_dim)."""

    weights: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.weights.ndim != 2 or self.biases.ndim != 1:
            raise ShapeError("weights must be 2-D and biases 1-D")
        if self.weights.shape[0] != self.biases.shape[0]:
            raise ShapeError(
                f"bias length {self.biases.shape[0]} does not match "
                f"output dimension {self.weights.shape[0]}"
            )

    @classmethod
    def init(cls, in_dim: int, out_dim: int, rng: Rng) -> "DenseLayer":
        w = _uniform_fan_in(rng, in_dim, (out_dim, in_dim))
        b = _uniform_fan_in(rng, in_dim, (out_dim,))
        return cls(w, b)

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    def forward(self, x: np.ndarray) -> np.ndarray:
        """W x + b for a single vector (in_dim,) or a batch (B, in_dim)."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.in_dim:
            raise ShapeError(
                f"input dimension {x.shape[-1]} does not match layer "
                f"in_dim {self.in_dim}"
            )
        return x @ self.weights.T + self.biases

    def backward(self, x: np.ndarray, dy: np.ndarray):
        """Gradients for a batch forward pass: returns (dx, dW, db)."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        dy = np.atleast_2d(np.asarray(dy, dtype=np.float64))
        dx = dy @ self.weights
        dw = dy.T @ x
        db = dy.sum(axis=0)
        return dx, dw, db

    def finite(self) -> bool:
        return bool(np.isfinite(self.weights).all() and np.isfinite(self.biases).all())


@dataclass
class Conv1dLayer:
    """1-D convolution, stride 1, zero same-padding, kernel size 3.

    Kernels are stored flattened as (out_channels, in_channels * kernel)
    so both passes reduce to one matmul against the im2col patches.
    """

    kernels: np.ndarray
    biases: np.ndarray
    in_channels: int
    kernel_size: int = KERNEL_SIZE

    @classmethod
    def init(cls, in_channels: int, out_channels: int, rng: Rng) -> "Conv1dLayer":
        fan_in = in_channels * KERNEL_SIZE
        k = _uniform_fan_in(rng, fan_in, (out_channels, fan_in))
        b = _uniform_fan_in(rng, fan_in, (out_channels,))
        return cls(k, b, in_channels)

    @property
    def out_channels(self) -> int:
        return self.kernels.shape[0]

    def _im2col(self, x: np.ndarray) -> np.ndarray:
        # x: (B, C, L) -> (B, L, C*k) with zero padding of (k-1)/2 per side
        batch, channels, length = x.shape
        pad = (self.kernel_size - 1) // 2
        xp = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
        cols = np.empty((batch, length, channels * self.kernel_size))
        for i in range(self.kernel_size):
            cols[:, :, i * channels:(i + 1) * channels] = (
                xp[:, :, i:i + length].transpose(0, 2, 1)
            )
        return cols

    def forward(self, x: np.ndarray):
        """x (B, C_in, L) -> (y (B, C_out, L), cache)."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[1] != self.in_channels:
            raise ShapeError(
                f"expected (B, {self.in_channels}, L) input, got {x.shape}"
            )
        cols = self._im2col(x)
        y = cols @ self.kernels.T + self.biases
        return y.transpose(0, 2, 1), (cols, x.shape)

    def backward(self, dy: np.ndarray, cache):
        cols, x_shape = cache
        batch, channels, length = x_shape
        dyt = dy.transpose(0, 2, 1)                      # (B, L, C_out)
        dk = np.einsum("blo,blk->ok", dyt, cols)
        db = dyt.sum(axis=(0, 1))
        dcols = dyt @ self.kernels                       # (B, L, C_in*k)
        pad = (self.kernel_size - 1) // 2
        dxp = np.zeros((batch, channels, length + 2 * pad))
        for i in range(self.kernel_size):
            dxp[:, :, i:i + length] += (
                dcols[:, :, i * channels:(i + 1) * channels].transpose(0, 2, 1)
            )
        dx = dxp[:, :, pad:length + pad]
        return dx, dk, db

    def finite(self) -> bool:
        return bool(np.isfinite(self.kernels).all() and np.isfinite(self.biases).all())


class ConvStack:
    """Discriminator body: six ReLU convolutions then a Sigmoid dense head.

    Channel progression 1-8-8-16-16-32-32, kernel 3, stride 1, length
    preserved throughout; the head maps the flattened 32*L features to one
    score per sample in (0, 1).
    """

    def __init__(self, convs: list[Conv1dLayer], head: DenseLayer, dims: int):
        self.convs = convs
        self.head = head
        self.dims = dims

    @classmethod
    def init(cls, dims: int, rng: Rng,
             channels: tuple[int, ...] = DISCRIMINATOR_CHANNELS) -> "ConvStack":
        convs = [
            Conv1dLayer.init(channels[i], channels[i + 1], rng)
            for i in range(len(channels) - 1)
        ]
        head = DenseLayer.init(channels[-1] * dims, 1, rng)
        return cls(convs, head, dims)

    def forward(self, batch: np.ndarray):
        """Scores in (0, 1) for (B, dims) samples, plus the backward cache."""
        batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
        if batch.shape[1] != self.dims:
            raise ShapeError(
                f"expected samples of length {self.dims}, got {batch.shape[1]}"
            )
        h = batch[:, None, :]
        conv_caches = []
        for conv in self.convs:
            z, cache = conv.forward(h)
            conv_caches.append((cache, z))
            h = np.maximum(z, 0.0)
        flat = h.reshape(batch.shape[0], -1)
        logits = self.head.forward(flat)[:, 0]
        # numerically stable sigmoid
        scores = np.where(
            logits >= 0,
            1.0 / (1.0 + np.exp(-np.abs(logits))),
            np.exp(-np.abs(logits)) / (1.0 + np.exp(-np.abs(logits))),
        )
        return scores, (conv_caches, flat, logits, scores)

    def score(self, batch: np.ndarray) -> np.ndarray:
        """Pure forward pass; safe to call concurrently on a frozen stack."""
        return self.forward(batch)[0]

    def backward(self, dscores: np.ndarray, cache):
        """Propagate dJ/dscore back; returns (dx, grads) with grads ordered
        [(dk, db) per conv ..., (dW, db) for the head]."""
        conv_caches, flat, logits, scores = cache
        dlogits = (np.asarray(dscores) * scores * (1.0 - scores))[:, None]
        dflat, dw_head, db_head = self.head.backward(flat, dlogits)
        h = dflat.reshape(flat.shape[0], self.convs[-1].out_channels, self.dims)
        grads = []
        for conv, (conv_cache, z) in zip(reversed(self.convs), reversed(conv_caches)):
            h = h * (z > 0)
            h, dk, db = conv.backward(h, conv_cache)
            grads.append((dk, db))
        grads.reverse()
        grads.append((dw_head, db_head))
        return h[:, 0, :], grads

    def apply_grads(self, grads, lr: float) -> None:
        """One plain SGD step: p <- p - lr * dp for every parameter."""
        for conv, (dk, db) in zip(self.convs, grads[:-1]):
            conv.kernels -= lr * dk
            conv.biases -= lr * db
        dw_head, db_head = grads[-1]
        self.head.weights -= lr * dw_head
        self.head.biases -= lr * db_head

    def parameters(self) -> list[np.ndarray]:
        params = []
        for conv in self.convs:
            params.extend([conv.kernels, conv.biases])
        params.extend([self.head.weights, self.head.biases])
        return params

    def finite(self) -> bool:
        return all(c.finite() for c in self.convs) and self.head.finite()
