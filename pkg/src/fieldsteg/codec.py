"""Covert bits in, transaction amounts out, and back again.

Each noise element is an n-bit string laid out MSB-first:

    [ 1-bit MSB | m covert bits | (n-m-1) padding bits ]

interpreted as an unsigned integer v and mapped affinely onto [-1, 1] by
x = 2 v / (2^n - 1) - 1, so the MSB really is the highest-weight bit and a
prefix of matching bits means numeric closeness. n is capped at 52 because
beyond the binary64 mantissa there are no more distinct noise values.

Encoding follows an embed/verify loop: sample MSB and padding fresh, push
the noise through the generator, round the amounts, run the inverse, and
accept only when every element's covert slice survives the round trip
exactly. Whatever decode recovers is therefore correct by construction,
never probabilistically.

Encode attempts for different chunks are independent (the model is
immutable) and may run concurrently; attempts within one chunk are
inherently sequential since each resample reacts to the previous failure.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .dataset import round_half_away
from .errors import (
    ActivationDomainError,
    ChunkHeaderError,
    CodecRangeError,
    EncodingTimeoutError,
    FlatSegmentOutputError,
    LayoutError,
    NormalizationRangeError,
    NotInvertibleAtPointError,
)
from .nncore import Rng

MAX_NOISE_BITS = 52
DEFAULT_MAX_ATTEMPTS = 10_000
HEADER_BITS = 64

_INVERSION_FAILURES = (
    FlatSegmentOutputError,
    NotInvertibleAtPointError,
    ActivationDomainError,
    NormalizationRangeError,
    CodecRangeError,
)


@dataclass(frozen=True)
class NoiseLayout:
    """Bit budget per noise element: n total, m covert, rest MSB + padding."""

    m: int
    n: int = MAX_NOISE_BITS

    def __post_init__(self):
        if not 2 <= self.n <= MAX_NOISE_BITS:
            raise LayoutError(f"n must be in [2, {MAX_NOISE_BITS}], got {self.n}")
        # m = 0 is the degenerate no-payload layout used by probes
        if not 0 <= self.m <= self.n - 2:
            raise LayoutError(f"m must be in [0, n-2] = [0, {self.n - 2}], got {self.m}")

    @property
    def padding_bits(self) -> int:
        return self.n - self.m - 1


@dataclass
class EncodeResult:
    """One accepted vector: the amounts plus how hard it was to find.

    noise_values holds the accepted noise as n-bit grid indices, which lets
    diagnostics compare sender noise against what a receiver recovers.
    """

    amounts: list[int]
    attempts: int
    elapsed: float
    noise_values: list[int] = None

    def to_dict(self) -> dict:
        return {
            "amounts": [int(a) for a in self.amounts],
            "attempts": self.attempts,
            "elapsed": self.elapsed,
            "noise_values": [int(v) for v in (self.noise_values or [])],
        }


def _as_bit_array(bits) -> np.ndarray:
    if isinstance(bits, str):
        if not set(bits) <= {"0", "1"}:
            raise LayoutError(f"bit string may contain only 0/1, got {bits!r}")
        bits = [int(c) for c in bits]
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.ndim != 1 or np.any(arr > 1):
        raise LayoutError("bits must be a flat sequence of 0/1")
    return arr


def bits_to_noise(bits, n: int | None = None) -> float:
    """n-bit string (MSB first) -> real in [-1, 1].

    All-zero bits map to exactly -1.0 and all-one bits to exactly +1.0.
    """
    arr = _as_bit_array(bits)
    if n is not None and arr.size != n:
        raise LayoutError(f"expected {n} bits, got {arr.size}")
    n = arr.size
    if not 2 <= n <= MAX_NOISE_BITS:
        raise LayoutError(f"n must be in [2, {MAX_NOISE_BITS}], got {n}")
    v = 0
    for b in arr:
        v = (v << 1) | int(b)
    return float(values_to_noise(np.array([v], dtype=np.uint64), n)[0])


def noise_to_bits(x: float, n: int) -> np.ndarray:
    """Real in [-1, 1] -> n-bit array, exact inverse on bits_to_noise output.

    Values straying past the interval by at most 2^-(n+1) are clamped to
    the nearest endpoint; anything further out raises CodecRangeError.
    """
    v = noise_to_values(np.array([x], dtype=np.float64), n)[0]
    bits = np.empty(n, dtype=np.uint8)
    vv = int(v)
    for i in range(n - 1, -1, -1):
        bits[i] = vv & 1
        vv >>= 1
    return bits


def values_to_noise(v: np.ndarray, n: int) -> np.ndarray:
    """Vectorized core of bits_to_noise on unsigned integer values."""
    grid = float(2**n - 1)
    return 2.0 * v.astype(np.float64) / grid - 1.0


def noise_to_values(x: np.ndarray, n: int) -> np.ndarray:
    """Vectorized core of noise_to_bits; returns uint64 grid indices."""
    x = np.asarray(x, dtype=np.float64)
    tol = 2.0 ** -(n + 1)
    if np.any(np.abs(x) > 1.0 + tol):
        worst = float(np.abs(x).max())
        raise CodecRangeError(f"noise value {worst!r} outside [-1, 1] beyond {tol}")
    grid = float(2**n - 1)
    u = (np.clip(x, -1.0, 1.0) + 1.0) * (grid / 2.0)
    return np.rint(u).astype(np.uint64)


def matching_leading_bits(v: np.ndarray, v_hat: np.ndarray, n: int) -> np.ndarray:
    """Per-element count of identical leading bits of two n-bit grids."""
    x = np.bitwise_xor(np.asarray(v, dtype=np.uint64), np.asarray(v_hat, dtype=np.uint64))
    # frexp exponent equals the bit length; exact since xor < 2^52
    _, exponents = np.frexp(x.astype(np.float64))
    return (n - exponents).astype(np.int64)


def _chunk_to_values(chunk: np.ndarray, layout: NoiseLayout, dims: int) -> np.ndarray:
    chunk = np.asarray(chunk, dtype=np.uint8)
    if chunk.shape != (dims, layout.m):
        raise LayoutError(f"expected chunk shape ({dims}, {layout.m}), got {chunk.shape}")
    vals = np.zeros(dims, dtype=np.uint64)
    for j in range(layout.m):
        vals = (vals << np.uint64(1)) | chunk[:, j].astype(np.uint64)
    return vals


def _values_to_chunk(vals: np.ndarray, layout: NoiseLayout, dims: int) -> np.ndarray:
    out = np.zeros((dims, layout.m), dtype=np.uint8)
    for j in range(layout.m):
        shift = np.uint64(layout.m - 1 - j)
        out[:, j] = ((vals >> shift) & np.uint64(1)).astype(np.uint8)
    return out


def encode(model, chunk, layout: NoiseLayout, rng: Rng,
           max_attempts: int = DEFAULT_MAX_ATTEMPTS,
           resample: str = "vector") -> EncodeResult:
    """Embed one chunk of covert bits into a vector of rounded amounts.

    Every attempt draws fresh MSB and padding bits, generates amounts,
    rounds them, inverts, and accepts only if all covert slices match.
    ``resample="vector"`` redraws the whole vector on failure (the default
    behavior of the embed/verify procedure); ``resample="element"`` is a
    faster extension that redraws only the failing elements.

    Raises EncodingTimeoutError after max_attempts; the usual remedy is a
    smaller m.
    """
    if resample not in ("vector", "element"):
        raise ValueError(f"resample must be 'vector' or 'element', got {resample!r}")
    dims = model.dims
    cd_vals = _chunk_to_values(chunk, layout, dims)
    n, m = layout.n, layout.m
    pad_bits = layout.padding_bits
    cd_shifted = cd_vals << np.uint64(pad_bits)
    msb_shift = np.uint64(n - 1)
    pad_span = 2**pad_bits

    start = time.perf_counter()
    redraw = np.ones(dims, dtype=bool)
    v = np.zeros(dims, dtype=np.uint64)
    attempts = 0
    while attempts < max_attempts:
        attempts += 1
        k = int(redraw.sum())
        msb = rng.integers(0, 2, size=k)
        pad = rng.integers(0, pad_span, size=k)
        v[redraw] = (msb << msb_shift) | cd_shifted[redraw] | pad
        noise = values_to_noise(v, n)
        try:
            amounts = round_half_away(model.generate(noise))
            recovered = model.invert(amounts)
            v_hat = noise_to_values(recovered, n)
        except _INVERSION_FAILURES:
            # amounts are coupled through the dense layers, so an inversion
            # failure cannot be pinned on one element; redraw everything
            redraw[:] = True
            continue
        got = (v_hat >> np.uint64(pad_bits)) & np.uint64(2**m - 1 if m else 0)
        ok = got == cd_vals
        if ok.all():
            return EncodeResult(
                amounts=[int(a) for a in amounts],
                attempts=attempts,
                elapsed=time.perf_counter() - start,
                noise_values=[int(val) for val in v],
            )
        redraw = ~ok if resample == "element" else np.ones(dims, dtype=bool)
    raise EncodingTimeoutError(
        f"no satisfying noise vector within {max_attempts} attempts "
        f"(m={m}); decrease m", attempts=max_attempts,
    )


def decode(model, amounts, layout: NoiseLayout) -> np.ndarray:
    """Extract the covert slices: invert the generator, take bits 2..m+1."""
    a = np.asarray(amounts, dtype=np.float64)
    recovered = model.invert(a)
    v_hat = noise_to_values(recovered, layout.n)
    vals = (v_hat >> np.uint64(layout.padding_bits)) & np.uint64(
        2**layout.m - 1 if layout.m else 0
    )
    return _values_to_chunk(vals, layout, model.dims)


# ---------------------------------------------------------------------------
# payload chunking
# ---------------------------------------------------------------------------

def bytes_to_bits(payload: bytes) -> np.ndarray:
    """Raw bytes -> bit array, most significant bit of byte 0 first."""
    if len(payload) == 0:
        return np.zeros(0, dtype=np.uint8)
    return np.unpackbits(np.frombuffer(payload, dtype=np.uint8))


def bits_to_bytes(bits: np.ndarray) -> bytes:
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size % 8:
        raise LayoutError(f"bit count {bits.size} is not a whole number of bytes")
    if bits.size == 0:
        return b""
    return np.packbits(bits).tobytes()


def chunk_payload(payload_bits, layout: NoiseLayout, dims: int = 64) -> list[np.ndarray]:
    """Split a payload into (dims, m) chunks behind a 64-bit length header.

    The first chunk carries the payload bit length as a big-endian 64-bit
    integer (zero-padded to fill the chunk); data chunks follow with the
    tail zero-padded. An empty payload yields just the header chunk.
    """
    bits = _as_bit_array(payload_bits) if not isinstance(payload_bits, np.ndarray) \
        else np.asarray(payload_bits, dtype=np.uint8)
    if layout.m < 1:
        raise LayoutError("chunking a payload requires m >= 1")
    capacity = dims * layout.m
    if capacity < HEADER_BITS:
        raise LayoutError(
            f"chunk capacity {capacity} cannot hold the {HEADER_BITS}-bit header"
        )
    total = int(bits.size)
    header = np.zeros(capacity, dtype=np.uint8)
    for i in range(HEADER_BITS):
        header[i] = (total >> (HEADER_BITS - 1 - i)) & 1
    chunks = [header.reshape(dims, layout.m)]
    for off in range(0, total, capacity):
        block = np.zeros(capacity, dtype=np.uint8)
        piece = bits[off:off + capacity]
        block[: piece.size] = piece
        chunks.append(block.reshape(dims, layout.m))
    return chunks


def assemble_payload(chunks, original_len: int | None = None) -> np.ndarray:
    """Inverse of chunk_payload. Verifies the header against original_len
    when the caller knows it; raises ChunkHeaderError on any mismatch."""
    if not chunks:
        raise ChunkHeaderError("empty chunk stream")
    flat = [np.asarray(c, dtype=np.uint8).ravel() for c in chunks]
    header = flat[0]
    if header.size < HEADER_BITS:
        raise ChunkHeaderError("header chunk too small")
    total = 0
    for i in range(HEADER_BITS):
        total = (total << 1) | int(header[i])
    if original_len is not None and total != int(original_len):
        raise ChunkHeaderError(
            f"header says {total} bits but caller expected {original_len}"
        )
    data = np.concatenate(flat[1:]) if len(flat) > 1 else np.zeros(0, dtype=np.uint8)
    if data.size < total:
        raise ChunkHeaderError(
            f"header says {total} bits but stream carries only {data.size}"
        )
    return data[:total]
