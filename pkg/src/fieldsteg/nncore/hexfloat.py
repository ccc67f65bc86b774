"""Bit-exact float64 serialization as 16-hex-digit big-endian patterns.

JSON cannot round-trip every binary64 value through its decimal syntax, so
model files store each float as the hex of its raw 8 bytes. Arrays are
flattened row-major.
"""

from __future__ import annotations

import struct

import numpy as np


def f64_to_hex(x: float) -> str:
    return struct.pack(">d", float(x)).hex()


def hex_to_f64(s: str) -> float:
    if not isinstance(s, str) or len(s) != 16:
        raise ValueError(f"expected 16 hex digits, got {s!r}")
    return struct.unpack(">d", bytes.fromhex(s))[0]


def array_to_hex(a: np.ndarray) -> list[str]:
    return [f64_to_hex(v) for v in np.asarray(a, dtype=np.float64).ravel()]


def hex_to_array(values: list[str], shape: tuple[int, ...]) -> np.ndarray:
    flat = np.array([hex_to_f64(s) for s in values], dtype=np.float64)
    expected = int(np.prod(shape))
    if flat.size != expected:
        raise ValueError(f"expected {expected} values for shape {shape}, got {flat.size}")
    return flat.reshape(shape)
