"""Transaction-field corpora: ingestion, normalization, grouping, and the
magnitude-trading algorithms.

A corpus is an ordered list of positive integer field values (satoshi, wei,
or fee units). Training consumes them min-max normalized into [0, 1] and
grouped into fixed-width vectors; the magnitude-trading routines rescale a
corpus by powers of ten and restore realistic low-order digits afterwards
by sampling the empirical suffix distribution of the original data.

All operations are pure given an Rng handle, so datasets and suffix tables
can be shared freely across threads once built.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BatchingError,
    FilterError,
    IngestionError,
    NormalizationRangeError,
    RecoveryError,
)
from .nncore import Rng

GROUP_WIDTH = 64


def round_half_away(x):
    """Round to the nearest integer, ties away from zero.

    This is the rounding rule applied whenever a generated decimal amount
    becomes an on-chain integer. numpy's rint (ties to even) is not used
    anywhere on that path.
    """
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


@dataclass
class FieldDataset:
    """Ordered corpus of positive integer field values plus provenance."""

    values: list[int]
    source_tag: str = ""
    field_kind: str = "amount"

    def __post_init__(self):
        if self.field_kind not in ("amount", "fee"):
            raise ValueError(f"field_kind must be 'amount' or 'fee', got {self.field_kind!r}")
        if not self.values:
            raise IngestionError("dataset must contain at least one value")
        if any(v < 1 for v in self.values):
            raise IngestionError("all field values must be >= 1")
        # a corpus may collapse to one value mid-pipeline (e.g. after a
        # narrow digit filter); the span requirement bites when
        # NormalizationParams is built, which is where it matters

    def __len__(self) -> int:
        return len(self.values)

    @property
    def min(self) -> int:
        return min(self.values)

    @property
    def max(self) -> int:
        return max(self.values)

    def summary(self) -> dict:
        """Count, range, and digit-length histogram of the corpus."""
        lengths = [len(str(v)) for v in self.values]
        hist = {}
        for n in sorted(set(lengths)):
            hist[n] = lengths.count(n)
        return {
            "count": len(self.values),
            "min": self.min,
            "max": self.max,
            "field_kind": self.field_kind,
            "source_tag": self.source_tag,
            "digit_length_histogram": hist,
        }


@dataclass(frozen=True)
class NormalizationParams:
    """Everything needed to map field values to [0, 1] and back.

    min_x and max_x are kept as float64 so a magnitude-reduced corpus
    (whose values are no longer integers) uses the same machinery; for an
    untouched corpus they hold the integer extremes exactly.
    """

    min_x: float
    max_x: float
    group_width: int = GROUP_WIDTH

    def __post_init__(self):
        if not self.min_x < self.max_x:
            raise ValueError(f"min_x must be < max_x, got {self.min_x} >= {self.max_x}")
        if self.group_width < 1:
            raise ValueError("group_width must be positive")

    @classmethod
    def from_values(cls, values, group_width: int = GROUP_WIDTH) -> "NormalizationParams":
        arr = np.asarray(values, dtype=np.float64)
        return cls(float(arr.min()), float(arr.max()), group_width)

    @property
    def span(self) -> float:
        return self.max_x - self.min_x


def load_fields(path, field_kind: str = "amount"):
    """Read a JSONL corpus: one {"value": <positive int>} record per line.

    Returns (dataset, rejected) where rejected lists (line_number, reason)
    for every malformed or out-of-domain line. Blank lines are ignored.
    Raises IngestionError when no valid record survives.
    """
    values = []
    rejected = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                rejected.append((lineno, f"invalid JSON: {exc.msg}"))
                continue
            if not isinstance(record, dict) or "value" not in record:
                rejected.append((lineno, "missing 'value' field"))
                continue
            value = record["value"]
            if isinstance(value, bool) or not isinstance(value, int):
                rejected.append((lineno, f"value is not an integer: {value!r}"))
                continue
            if value < 1:
                rejected.append((lineno, f"value must be >= 1, got {value}"))
                continue
            values.append(value)
    if not values:
        raise IngestionError(f"no valid records in {path}")
    ds = FieldDataset(values, source_tag=str(path), field_kind=field_kind)
    return ds, rejected


def save_fields(ds: FieldDataset, path) -> None:
    """Write a corpus back out in the JSONL ingestion format."""
    with open(path, "w", encoding="utf-8") as fh:
        for v in ds.values:
            fh.write(json.dumps({"value": int(v)}) + "\n")


def filter_by_digit_length(ds: FieldDataset, lo: int, hi: int) -> FieldDataset:
    """Keep values whose decimal digit count lies in [lo, hi], in order.

    This is the concentration filter used for standard preprocessing; the
    counter-intuitive variant skips it entirely so the extreme values stay
    in and widen max - min.
    """
    if not 1 <= lo <= hi:
        raise ValueError(f"need 1 <= lo <= hi, got lo={lo}, hi={hi}")
    kept = [v for v in ds.values if lo <= len(str(v)) <= hi]
    if not kept:
        raise FilterError(f"digit-length filter [{lo}, {hi}] removed every value")
    return FieldDataset(kept, source_tag=ds.source_tag, field_kind=ds.field_kind)


def normalize(values, params: NormalizationParams) -> np.ndarray:
    """x -> (x - min) / (max - min), elementwise, as float64 in [0, 1]."""
    arr = np.asarray(
        values.values if isinstance(values, FieldDataset) else values,
        dtype=np.float64,
    )
    if np.any(arr < params.min_x) or np.any(arr > params.max_x):
        raise NormalizationRangeError(
            f"value outside [{params.min_x}, {params.max_x}]"
        )
    return (arr - params.min_x) / params.span


def denormalize(y, params: NormalizationParams) -> np.ndarray:
    """Exact inverse affine map: y * (max - min) + min (no rounding)."""
    return np.asarray(y, dtype=np.float64) * params.span + params.min_x


def group_batches(normalized, group_width: int = GROUP_WIDTH) -> np.ndarray:
    """Pack adjacent values into (n_groups, group_width) rows.

    Trailing values that cannot fill one complete group are discarded.
    """
    arr = np.asarray(normalized, dtype=np.float64).ravel()
    n_groups = arr.size // group_width
    if n_groups == 0:
        raise BatchingError(
            f"need at least {group_width} values to form a group, got {arr.size}"
        )
    return arr[: n_groups * group_width].reshape(n_groups, group_width).copy()


def decrease_magnitude(values, lam: int) -> np.ndarray:
    """Scale every value by 10**-lam, kept as float64 (not re-rounded).

    lam > 0 shrinks the corpus (trading capacity for concealment); lam < 0
    grows it, which is the capacity-increasing direction; lam = 0 is the
    identity.
    """
    arr = np.asarray(
        values.values if isinstance(values, FieldDataset) else values,
        dtype=np.float64,
    )
    return arr / (10.0 ** int(lam))


@dataclass
class SuffixTable:
    """Empirical distribution of the last ``lam`` decimal digits of a corpus."""

    lam: int
    counts: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.lam < 1:
            raise ValueError("suffix table requires lam >= 1")
        for key in self.counts:
            if len(key) != self.lam or not key.isdigit():
                raise ValueError(f"suffix key {key!r} is not {self.lam} digits")

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def sample(self, rng: Rng) -> str:
        """Draw one suffix string proportionally to its observed count."""
        if not self.counts:
            raise RecoveryError("cannot sample from an empty suffix table")
        keys = sorted(self.counts)
        weights = np.array([self.counts[k] for k in keys], dtype=np.float64)
        cum = np.cumsum(weights)
        u = rng.uniform(0.0, cum[-1])
        return keys[int(np.searchsorted(cum, u, side="right"))]

    def to_dict(self) -> dict:
        return {"lam": self.lam, "counts": dict(sorted(self.counts.items()))}

    @classmethod
    def from_dict(cls, d: dict) -> "SuffixTable":
        return cls(int(d["lam"]), {str(k): int(v) for k, v in d["counts"].items()})


def build_suffix_table(ds: FieldDataset, lam: int) -> SuffixTable:
    """Count the last ``lam`` digits of every value, zero-padded."""
    if lam < 1:
        raise ValueError("build_suffix_table requires lam >= 1")
    counts: dict[str, int] = {}
    mod = 10 ** lam
    for v in ds.values:
        key = str(v % mod).zfill(lam)
        counts[key] = counts.get(key, 0) + 1
    return SuffixTable(lam, counts)


def recover_magnitude(generated, table: SuffixTable | None, lam: int, rng: Rng) -> list[int]:
    """Turn reduced-magnitude generator outputs back into on-chain integers.

    For lam >= 1 each output a becomes round(a) * 10**lam + t with the
    suffix t sampled from the table, so the receiver recovers round(a)
    exactly by truncating the last lam digits. For lam < 0 (the
    capacity-increasing direction) the extra fractional digits of a are
    published instead: a becomes round(a * 10**|lam|), and the receiver
    divides by 10**|lam|. lam = 0 is plain rounding.
    """
    arr = np.asarray(generated, dtype=np.float64)
    if lam >= 1:
        if table is None or not table.counts:
            raise RecoveryError("lam >= 1 requires a non-empty suffix table")
        if table.lam != lam:
            raise RecoveryError(f"table built for lam={table.lam}, asked for lam={lam}")
        base = round_half_away(arr).astype(np.int64)
        scale = 10 ** lam
        return [int(b) * scale + int(table.sample(rng)) for b in base]
    if lam == 0:
        return [int(v) for v in round_half_away(arr)]
    scale = 10.0 ** (-lam)
    return [int(v) for v in round_half_away(arr * scale)]


def truncate_magnitude(on_chain, lam: int) -> list:
    """Receiver side of recover_magnitude.

    lam >= 1: drop the last lam digits (integer division), recovering the
    rounded generator output exactly. lam < 0: divide by 10**|lam|, giving
    back the generator output quantized to 10**lam. lam = 0: identity.
    """
    if lam >= 1:
        scale = 10 ** lam
        return [int(v) // scale for v in on_chain]
    if lam == 0:
        return [int(v) for v in on_chain]
    scale = 10.0 ** (-lam)
    return [float(v) / scale for v in on_chain]


def synthetic_log_uniform(count: int, lo_exp: float, hi_exp: float,
                          rng: Rng, field_kind: str = "amount") -> FieldDataset:
    """Synthetic corpus with values log-uniform over [10**lo_exp, 10**hi_exp].

    Deterministic given the Rng; used by the test harness and the demos,
    where no chain snapshot is available.
    """
    if count < 2:
        raise ValueError("need at least two values")
    exps = rng.uniform(float(lo_exp), float(hi_exp), size=count)
    values = [max(1, int(v)) for v in round_half_away(10.0 ** exps)]
    # guarantee the intended span regardless of the draw
    values[0] = max(1, int(round(10.0 ** lo_exp)))
    values[-1] = int(round(10.0 ** hi_exp))
    return FieldDataset(values, source_tag=f"synthetic-log-uniform[{lo_exp},{hi_exp}]",
                        field_kind=field_kind)


def digit_length(value: int) -> int:
    return len(str(int(value)))


def magnitude(ds: FieldDataset) -> float:
    """log10 of the largest element, the corpus magnitude."""
    return math.log10(ds.max)
