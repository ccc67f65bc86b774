"""Channel quality metrics and the experiments built on them.

The central measure is the number of perfectly identical digits (NPID) of
two non-negative reals: how many digit positions agree, counted from the
integer digit downwards, in base 10 or base 2. Digit extraction is exact
(integer arithmetic on the values' rational representations), never a
string of the nearest decimal, and the count is capped at the binary64
precision limit: 17 digits in base 10, 52 in base 2. Identical inputs
return the cap.

All experiments draw from derived Rng streams keyed by trial index, so
they parallelize across trials in principle and reproduce exactly given
the master seed.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .codec import (
    NoiseLayout,
    encode,
    matching_leading_bits,
    noise_to_values,
    values_to_noise,
)
from .dataset import round_half_away
from .errors import EncodingTimeoutError, FieldStegError
from .nncore import ConvStack, Rng, bce_grad, bce_loss

NPID_CAPS = {10: 17, 2: 52}

# Bits each baseline channel embeds per transaction. Frozen after checking
# that every published expansion-rate figure is reproduced by
# 100 * m / constant for the corresponding m.
BASELINE_AC = {
    "HC-CDE": 12,
    "DSA": 256,
    "Un-UTXO": 160,
    "DLchain": 128,
}


def _ratio(x):
    if isinstance(x, Fraction):
        return x.numerator, x.denominator
    if isinstance(x, (int, np.integer)):
        return int(x), 1
    v = float(x)
    if not math.isfinite(v):
        raise ValueError(f"npid requires finite inputs, got {v!r}")
    return v.as_integer_ratio()


def npid(a, b, base: int = 10) -> int:
    """Count of consecutive identical digits from the integer digit down.

    Exact on floats, ints, and Fractions. Returns 0 when the integer parts
    differ, the cap (17 decimal / 52 binary) when every compared digit
    agrees. Symmetric in its arguments.
    """
    if base not in NPID_CAPS:
        raise ValueError(f"base must be one of {sorted(NPID_CAPS)}, got {base}")
    cap = NPID_CAPS[base]
    na, da = _ratio(a)
    nb, db = _ratio(b)
    if na < 0 or nb < 0:
        raise ValueError("npid requires non-negative inputs")
    ia, ib = na // da, nb // db
    if ia != ib:
        return 0
    scale = base ** (cap - 1)
    fa = (na - ia * da) * scale // da
    fb = (nb - ib * db) * scale // db
    if fa == fb:
        return cap
    if base == 2:
        return cap - (fa ^ fb).bit_length()
    sa = str(fa).zfill(cap - 1)
    sb = str(fb).zfill(cap - 1)
    count = 1
    for ca, cb in zip(sa, sb):
        if ca != cb:
            break
        count += 1
    return count


def rounding_oracle(y, q: int) -> Fraction:
    """Quantize y in (0, 1) to the grid 1/q, exactly: floor(y * q) / q.

    The result is an exact rational, so digit comparisons against it probe
    the quantization alone and not the decimal-to-binary conversion of the
    grid point. Truncation is used because it preserves the leading digits
    of y verbatim: a nearest-integer rule carries the quantization into the
    last kept digit half the time, which is exactly the effect this oracle
    exists to isolate.
    """
    if not 0.0 < float(y) < 1.0:
        raise ValueError(f"y must lie strictly in (0, 1), got {y!r}")
    q = int(q)
    if q < 1:
        raise ValueError(f"q must be a positive integer, got {q}")
    num, den = _ratio(y)
    return Fraction(num * q // den, q)


# ---------------------------------------------------------------------------
# recovery-bit histogram and m estimation
# ---------------------------------------------------------------------------

@dataclass
class RecoveryHistogram:
    """Distribution of min-over-vector matching leading bits per trial."""

    counts: dict[int, int] = field(default_factory=dict)
    failures: int = 0
    trials: int = 0

    @property
    def max_bits(self) -> int:
        return max(self.counts) if self.counts else 0

    def to_dict(self) -> dict:
        return {
            "counts": {str(k): v for k, v in sorted(self.counts.items())},
            "failures": self.failures,
            "trials": self.trials,
        }


def recovery_bit_experiment(model, trials: int, rng: Rng, n: int = 52) -> RecoveryHistogram:
    """Round-trip random noise through generate/round/invert ``trials``
    times and histogram the worst per-vector count of recovered leading
    bits (MSB included). Inversion failures are counted separately."""
    hist = RecoveryHistogram(trials=trials)
    if trials == 0:
        return hist
    dims = model.dims
    grid = 2**n
    for trial in range(trials):
        stream = rng.derive(trial + 1)
        v = stream.integers(0, grid, size=dims)
        noise = values_to_noise(v, n)
        try:
            amounts = round_half_away(model.generate(noise))
            recovered = model.invert(amounts)
            v_hat = noise_to_values(recovered, n)
        except FieldStegError:
            hist.failures += 1
            continue
        worst = int(matching_leading_bits(v, v_hat, n).min())
        hist.counts[worst] = hist.counts.get(worst, 0) + 1
    return hist


@dataclass
class EstimateReport:
    m: int
    histogram: RecoveryHistogram
    feasibility: dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "histogram": self.histogram.to_dict(),
            "feasibility": {str(k): v for k, v in sorted(self.feasibility.items())},
        }


def estimate_m_report(model, rng: Rng, trials: int = 1000,
                      acceptance_quantile: float = 0.75,
                      probe_vectors: int = 16, attempt_budget: int = 256,
                      n: int = 52) -> EstimateReport:
    """Two-step covert-bit-count estimate.

    Step one bounds m from above by the best min-recovery-bit count seen
    over random vectors (minus the MSB). Step two walks m downwards until
    encoding ``probe_vectors`` random chunks succeeds within
    ``attempt_budget`` attempts for at least the acceptance quantile of
    them, i.e. until the quantile of the attempt distribution fits the
    budget. Reports m = 0 when no m >= 1 is feasible.
    """
    if trials < 100:
        raise ValueError("m estimation needs at least 100 trials")
    if not 0.0 < acceptance_quantile <= 1.0:
        raise ValueError("acceptance_quantile must be in (0, 1]")
    hist = recovery_bit_experiment(model, trials, rng.derive(1), n=n)
    bound = min(max(hist.max_bits - 1, 0), n - 2)
    report = EstimateReport(m=0, histogram=hist)
    probe_rng = rng.derive(2)
    for m in range(bound, 0, -1):
        layout = NoiseLayout(m=m, n=n)
        successes = 0
        for probe in range(probe_vectors):
            stream = probe_rng.derive(m * 10_000 + probe)
            chunk = stream.integers(0, 2, size=(model.dims, m)).astype(np.uint8)
            try:
                encode(model, chunk, layout, stream, max_attempts=attempt_budget)
                successes += 1
            except EncodingTimeoutError:
                pass
        rate = successes / probe_vectors
        report.feasibility[m] = rate
        if rate >= acceptance_quantile:
            report.m = m
            return report
    return report


def estimate_m(model, rng: Rng, trials: int = 1000,
               acceptance_quantile: float = 0.75, probe_vectors: int = 16,
               attempt_budget: int = 256, n: int = 52) -> int:
    return estimate_m_report(
        model, rng, trials=trials, acceptance_quantile=acceptance_quantile,
        probe_vectors=probe_vectors, attempt_budget=attempt_budget, n=n,
    ).m


# ---------------------------------------------------------------------------
# capacity metrics
# ---------------------------------------------------------------------------

def absolute_capacity(n_bits: float, n_fields: int) -> float:
    """Covert bits carried per expansion field: n / N_f."""
    if n_fields < 1:
        raise ValueError("n_fields must be >= 1")
    if n_bits < 0:
        raise ValueError("n_bits must be >= 0")
    return n_bits / n_fields


def cer(ac_ecc: float, ac_occ: float) -> float:
    """Capacity expansion rate versus a baseline, in percent."""
    if ac_occ <= 0:
        raise ValueError("baseline capacity must be positive")
    return 100.0 * ac_ecc / ac_occ


def cer_table(scheme_m: dict[str, float]) -> list[dict]:
    """Expansion rate of each scheme against every frozen baseline."""
    rows = []
    for scheme, m in scheme_m.items():
        for baseline, ac_occ in BASELINE_AC.items():
            rows.append({
                "scheme": scheme,
                "m": m,
                "baseline": baseline,
                "baseline_ac": ac_occ,
                "cer_percent": round(cer(m, ac_occ), 2),
            })
    return rows


# ---------------------------------------------------------------------------
# timing experiment
# ---------------------------------------------------------------------------

@dataclass
class TimingReport:
    """Wall-clock cost of the embed/verify loop at one m.

    Quartiles and mean per vector and per amount; timed-out vectors are
    excluded from the statistics and counted. Model load and dataset I/O
    are outside the clock by construction: only encode() runs inside it.
    """

    m: int
    n_vectors: int
    timeouts: int
    vector_quartiles: tuple[float, float, float]
    vector_mean: float
    amount_quartiles: tuple[float, float, float]
    amount_mean: float
    attempt_quartiles: tuple[float, float, float]
    times: list[float] = field(default_factory=list)
    attempts: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "n_vectors": self.n_vectors,
            "timeouts": self.timeouts,
            "vector_quartiles": list(self.vector_quartiles),
            "vector_mean": self.vector_mean,
            "amount_quartiles": list(self.amount_quartiles),
            "amount_mean": self.amount_mean,
            "attempt_quartiles": list(self.attempt_quartiles),
        }


def timing_experiment(model, m: int, n_vectors: int, rng: Rng, n: int = 52,
                      max_attempts: int = 10_000) -> TimingReport:
    """Encode ``n_vectors`` random chunks at the given m and summarize."""
    if n_vectors < 4:
        raise ValueError("quartiles need at least 4 vectors")
    layout = NoiseLayout(m=m, n=n)
    times = []
    attempts = []
    timeouts = 0
    for i in range(n_vectors):
        stream = rng.derive(i + 1)
        chunk = stream.integers(0, 2, size=(model.dims, m)).astype(np.uint8)
        start = time.perf_counter()
        try:
            result = encode(model, chunk, layout, stream, max_attempts=max_attempts)
        except EncodingTimeoutError:
            timeouts += 1
            continue
        times.append(time.perf_counter() - start)
        attempts.append(result.attempts)
    if not times:
        raise EncodingTimeoutError(
            f"every vector timed out at m={m}", attempts=max_attempts)
    t = np.asarray(times)
    att = np.asarray(attempts, dtype=np.float64)
    vq = tuple(float(v) for v in np.percentile(t, [25, 50, 75]))
    aq = tuple(float(v) for v in np.percentile(t / model.dims, [25, 50, 75]))
    atq = tuple(float(v) for v in np.percentile(att, [25, 50, 75]))
    return TimingReport(
        m=m, n_vectors=n_vectors, timeouts=timeouts,
        vector_quartiles=vq, vector_mean=float(t.mean()),
        amount_quartiles=aq, amount_mean=float(t.mean() / model.dims),
        attempt_quartiles=atq, times=times, attempts=attempts,
    )


# ---------------------------------------------------------------------------
# concealment harness
# ---------------------------------------------------------------------------

@dataclass
class ConcealmentReport:
    """Held-out detection quality of the stand-in steganalysis classifier.

    Scores near 0.5 mean the generated fields are indistinguishable from
    real ones; 1.0 means trivially detectable.
    """

    accuracy: float
    precision: float
    recall: float
    f1: float
    n_train: int
    n_test: int
    split: float
    runs: int
    per_run_accuracy: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "split": self.split,
            "runs": self.runs,
            "per_run_accuracy": self.per_run_accuracy,
        }


def _feature_vectors(values, dims: int) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    n_vec = arr.size // dims
    if n_vec < 4:
        raise ValueError(f"need at least {4 * dims} values per class")
    return arr[: n_vec * dims].reshape(n_vec, dims)


def _train_classifier(train_x, train_y, dims, rng, epochs, lr, batch_size):
    clf = ConvStack.init(dims, rng)
    n = train_x.shape[0]
    order = np.arange(n)
    for _ in range(epochs):
        rng.shuffle(order)
        for off in range(0, n - batch_size + 1, batch_size):
            idx = order[off:off + batch_size]
            scores, cache = clf.forward(train_x[idx])
            _, grads = clf.backward(bce_grad(scores, train_y[idx]), cache)
            clf.apply_grads(grads, lr)
    return clf


def concealment_eval(real_fields, generated_fields, split: float = 0.7,
                     runs: int = 10, rng: Rng | None = None, dims: int = 64,
                     epochs: int = 30, lr: float = 0.05,
                     batch_size: int = 16) -> ConcealmentReport:
    """Train the convolutional classifier to tell real from generated
    fields and report held-out accuracy/precision/recall/F1.

    Classes must be balanced. Fields are compared on standardized log10
    values, grouped into vectors of ``dims``. Each run reshuffles the
    70/30 split and reinitializes the classifier from a derived stream;
    metrics are averaged across runs. The positive class is "generated".
    """
    real = np.asarray(real_fields, dtype=np.float64)
    gen = np.asarray(generated_fields, dtype=np.float64)
    if real.size != gen.size:
        raise ValueError(
            f"class imbalance: {real.size} real vs {gen.size} generated fields")
    if np.any(real <= 0) or np.any(gen <= 0):
        raise ValueError("field values must be positive")
    rng = rng if rng is not None else Rng(0)

    both = np.log10(np.concatenate([real, gen]))
    mu, sigma = both.mean(), both.std()
    if sigma == 0.0:
        raise ValueError("degenerate corpus: every field value is identical")
    rx = _feature_vectors((np.log10(real) - mu) / sigma, dims)
    gx = _feature_vectors((np.log10(gen) - mu) / sigma, dims)
    n_vec = min(rx.shape[0], gx.shape[0])
    rx, gx = rx[:n_vec], gx[:n_vec]
    n_train = int(n_vec * split)
    if n_train < 1 or n_train >= n_vec:
        raise ValueError(f"split {split} leaves no train or test data")

    accs, precs, recs, f1s = [], [], [], []
    for run in range(runs):
        stream = rng.derive(7_000 + run)
        perm_r = np.arange(n_vec)
        perm_g = np.arange(n_vec)
        stream.shuffle(perm_r)
        stream.shuffle(perm_g)
        train_x = np.vstack([rx[perm_r[:n_train]], gx[perm_g[:n_train]]])
        train_y = np.concatenate([np.zeros(n_train), np.ones(n_train)])
        test_x = np.vstack([rx[perm_r[n_train:]], gx[perm_g[n_train:]]])
        test_y = np.concatenate([
            np.zeros(n_vec - n_train), np.ones(n_vec - n_train)])

        clf = _train_classifier(train_x, train_y, dims, stream, epochs, lr,
                                batch_size)
        pred = (clf.score(test_x) > 0.5).astype(np.float64)
        tp = float(np.sum((pred == 1) & (test_y == 1)))
        fp = float(np.sum((pred == 1) & (test_y == 0)))
        fn = float(np.sum((pred == 0) & (test_y == 1)))
        accs.append(float(np.mean(pred == test_y)))
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        precs.append(precision)
        recs.append(recall)
        f1s.append(2 * precision * recall / (precision + recall)
                   if precision + recall > 0 else 0.0)

    return ConcealmentReport(
        accuracy=float(np.mean(accs)), precision=float(np.mean(precs)),
        recall=float(np.mean(recs)), f1=float(np.mean(f1s)),
        n_train=2 * n_train, n_test=2 * (n_vec - n_train), split=split,
        runs=runs, per_run_accuracy=accs,
    )


# ---------------------------------------------------------------------------
# report output
# ---------------------------------------------------------------------------

def write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=False)
        fh.write("\n")


def write_csv(rows: list[dict], path) -> None:
    if not rows:
        raise ValueError("no rows to write")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
