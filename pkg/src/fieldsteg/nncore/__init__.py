"""Minimal deterministic neural-network engine over IEEE 754 binary64.

Dense layers, 1-D convolutions, invertible activations, binary
cross-entropy, hand-written reverse-mode gradients, and exact Gauss-Jordan
matrix inversion. No autograd, no GPU, no mixed precision: every operation
is a fixed sequence of float64 numpy kernels so that a seed fully
determines a training run on a given platform.

Trained parameter arrays are treated as immutable; forward and inverse
evaluation of a frozen network is pure and safe to run concurrently.
"""

from .activations import (
    ClipSigmoid,
    Identity,
    LeakyReLU,
    ReLU,
    Sigmoid,
    activation_from_spec,
    activation_to_spec,
)
from .hexfloat import array_to_hex, f64_to_hex, hex_to_array, hex_to_f64
from .layers import DISCRIMINATOR_CHANNELS, Conv1dLayer, ConvStack, DenseLayer
from .linalg import PIVOT_TOL, invert_matrix, max_residual
from .losses import BCE_EPS, bce_grad, bce_loss, discriminator_loss, generator_loss
from .rng import Rng

__all__ = [
    "BCE_EPS",
    "DISCRIMINATOR_CHANNELS",
    "PIVOT_TOL",
    "ClipSigmoid",
    "Conv1dLayer",
    "ConvStack",
    "DenseLayer",
    "Identity",
    "LeakyReLU",
    "ReLU",
    "Rng",
    "Sigmoid",
    "activation_from_spec",
    "activation_to_spec",
    "array_to_hex",
    "bce_grad",
    "bce_loss",
    "discriminator_loss",
    "f64_to_hex",
    "generator_loss",
    "hex_to_array",
    "hex_to_f64",
    "invert_matrix",
    "max_residual",
]
