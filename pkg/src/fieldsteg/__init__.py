"""Covert channels in generated blockchain transaction fields.

A small invertible generator (two square dense layers, LeakyReLU then a
sigmoid-family output) is trained adversarially to emit realistic
transaction amounts or fees. Covert bits ride inside the generator's input
noise; the receiver recovers them by running the generator backwards on the
on-chain integers. The package covers the whole pipeline: corpus ingestion
and normalization, deterministic training, the bit codec with its
embed/verify loop, magnitude trading for the capacity/concealment balance,
a mock chain for round trips, and the measurement harness (digit-agreement
metrics, capacity and timing experiments, a steganalysis stand-in).
"""

from . import chainsim, codec, dataset, errors, metrics, nncore, rgan

__version__ = "0.1.0"

__all__ = [
    "chainsim",
    "codec",
    "dataset",
    "errors",
    "metrics",
    "nncore",
    "rgan",
    "__version__",
]
