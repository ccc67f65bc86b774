from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fieldsteg import dataset, metrics
from fieldsteg.errors import EncodingTimeoutError
from fieldsteg.nncore import Rng


# ---------------------------------------------------------------------------
# npid
# ---------------------------------------------------------------------------

def test_npid_worked_examples():
    assert metrics.npid(1.81, 1.85) == 2
    assert metrics.npid(0.1235, 0.1245) == 3


def test_npid_identical_inputs_hit_cap():
    x = 0.123456789
    assert metrics.npid(x, x, base=10) == 17
    assert metrics.npid(x, x, base=2) == 52


def test_npid_integer_digit_mismatch():
    assert metrics.npid(1.5, 2.5) == 0


def test_npid_symmetry_and_exactness():
    assert metrics.npid(0.1, 0.1 + 1e-9) == metrics.npid(0.1 + 1e-9, 0.1)
    # exact digit extraction, not decimal repr: 0.1 in binary starts
    # 0.0001100110011..., so base-2 agreement with 0.0625 (0.0001) is 4 digits
    # beyond the integer digit
    assert metrics.npid(0.1, 0.0625, base=2) == 5


def test_npid_accepts_fractions():
    assert metrics.npid(Fraction(123, 1000), 0.123456) >= 4


def test_npid_rejects_bad_inputs():
    with pytest.raises(ValueError):
        metrics.npid(-0.5, 0.5)
    with pytest.raises(ValueError):
        metrics.npid(float("nan"), 0.5)
    with pytest.raises(ValueError):
        metrics.npid(0.1, 0.2, base=3)


@settings(max_examples=300, deadline=None)
@given(st.floats(min_value=0.0, max_value=10.0, allow_nan=False),
       st.floats(min_value=0.0, max_value=10.0, allow_nan=False),
       st.sampled_from([10, 2]))
def test_npid_symmetric_property(a, b, base):
    assert metrics.npid(a, b, base) == metrics.npid(b, a, base)


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=9999),
       st.integers(min_value=0, max_value=9999))
def test_npid_matches_prefix_definition_base10(ia, ib):
    # four-digit decimals compared digit-for-digit
    a, b = Fraction(ia, 10000), Fraction(ib, 10000)
    sa, sb = f"{ia:04d}", f"{ib:04d}"
    expected = 1
    for ca, cb in zip(sa, sb):
        if ca != cb:
            break
        expected += 1
    # trailing zeros extend agreement past the explicit digits
    if ia == ib:
        expected = 17
    assert metrics.npid(a, b) >= min(expected, 17)
    if ia != ib:
        assert metrics.npid(a, b) == expected


# ---------------------------------------------------------------------------
# rounding oracle
# ---------------------------------------------------------------------------

def test_oracle_worked_example():
    out = metrics.rounding_oracle(0.123456, 10**3)
    assert out == Fraction(123, 1000)
    assert metrics.npid(0.123456, out) == 4


def test_oracle_median_shifts_by_one_per_decade():
    rng = Rng(55)
    ys = rng.uniform(0, 1, size=10_000)
    medians = {}
    for k in (4, 5):
        vals = [metrics.npid(y, metrics.rounding_oracle(y, 10**k)) for y in ys]
        medians[k] = float(np.median(vals))
    assert medians[5] - medians[4] == pytest.approx(1.0, abs=0.1)


def test_oracle_zero_following_digit_exceeds_k_plus_one():
    # y = 0.12305..., quantized at 10^3: digit 4 is 0, so agreement runs on
    y = 0.1230567
    out = metrics.rounding_oracle(y, 10**3)
    assert metrics.npid(y, out) == 5


def test_oracle_input_validation():
    with pytest.raises(ValueError):
        metrics.rounding_oracle(0.0, 10)
    with pytest.raises(ValueError):
        metrics.rounding_oracle(1.0, 10)
    with pytest.raises(ValueError):
        metrics.rounding_oracle(0.5, 0)


# ---------------------------------------------------------------------------
# capacity metrics
# ---------------------------------------------------------------------------

def test_absolute_capacity():
    assert metrics.absolute_capacity(64 * 11, 64) == 11
    assert metrics.absolute_capacity(0, 64) == 0
    assert metrics.absolute_capacity(24 * 64, 64) == 24
    with pytest.raises(ValueError):
        metrics.absolute_capacity(10, 0)


def test_cer_worked_values():
    assert metrics.cer(11, 12) == pytest.approx(91.67, abs=0.01)
    assert metrics.cer(24, 12) == pytest.approx(200.00, abs=1e-12)
    assert metrics.cer(5, 5) == 100.0
    with pytest.raises(ValueError):
        metrics.cer(5, 0)


def test_baseline_constants_reproduce_published_rates():
    # every published (m, baseline) pair for the four baselines, checked
    # against 100 * m / constant to the printed two decimals
    published = {
        # bitcoin amount
        (11, "HC-CDE"): 91.67, (11, "DSA"): 4.30,
        (11, "Un-UTXO"): 6.88, (11, "DLchain"): 8.59,
        (24, "HC-CDE"): 200.00, (24, "DSA"): 9.38,
        (24, "Un-UTXO"): 15.00, (24, "DLchain"): 18.75,
        # bitcoin fee
        (2, "HC-CDE"): 16.67, (2, "DSA"): 0.78,
        (2, "Un-UTXO"): 1.25, (2, "DLchain"): 1.56,
        (4, "HC-CDE"): 33.33, (4, "DSA"): 1.56,
        (4, "Un-UTXO"): 2.50, (4, "DLchain"): 3.13,
        # account-model amount (magnitude-reduced) and fee
        (35, "HC-CDE"): 291.67, (35, "DSA"): 13.67,
        (35, "Un-UTXO"): 21.88, (35, "DLchain"): 27.34,
        (21, "HC-CDE"): 175.00, (21, "DSA"): 8.20,
        (21, "Un-UTXO"): 13.13, (21, "DLchain"): 16.41,
    }
    for (m, baseline), expected in published.items():
        got = metrics.cer(m, metrics.BASELINE_AC[baseline])
        assert got == pytest.approx(expected, abs=0.01), (m, baseline)


def test_cer_table_rows():
    rows = metrics.cer_table({"rgan": 11})
    assert len(rows) == len(metrics.BASELINE_AC)
    byname = {r["baseline"]: r["cer_percent"] for r in rows}
    assert byname["HC-CDE"] == 91.67


# ---------------------------------------------------------------------------
# experiments on the session model
# ---------------------------------------------------------------------------

def test_recovery_bit_experiment_empty():
    hist = metrics.recovery_bit_experiment(None, 0, Rng(1))
    assert hist.counts == {} and hist.trials == 0 and hist.max_bits == 0


def test_recovery_bit_experiment_deterministic(model):
    a = metrics.recovery_bit_experiment(model, 50, Rng(60))
    b = metrics.recovery_bit_experiment(model, 50, Rng(60))
    assert a.counts == b.counts and a.failures == b.failures


def test_recovery_histogram_counts_sum(model):
    hist = metrics.recovery_bit_experiment(model, 80, Rng(61))
    assert sum(hist.counts.values()) + hist.failures == 80


def test_estimate_m_consistency(model, estimated_m):
    hist = metrics.recovery_bit_experiment(model, 400, Rng(62))
    assert 1 <= estimated_m <= hist.max_bits + 2
    # histogram mass at >= m+1 bits implies the estimate reaches m
    assert estimated_m <= max(hist.max_bits - 1, 0) + 2


def test_estimate_m_degenerate_model():
    # near-constant generator: recovered noise is garbage, no m is feasible
    import fieldsteg.rgan as rgan
    from fieldsteg.nncore import DenseLayer, LeakyReLU, Sigmoid

    dims = 64
    model = rgan.GeneratorModel(
        DenseLayer(np.eye(dims) * 1e-9, np.zeros(dims)), LeakyReLU(0.3),
        DenseLayer(np.eye(dims) * 1e-9, np.zeros(dims)), Sigmoid(),
        dataset.NormalizationParams(100.0, 10.0**9, dims),
    )
    assert metrics.estimate_m(model, Rng(63), trials=120, probe_vectors=4,
                              attempt_budget=16) == 0


def test_estimate_m_validates_trials(model):
    with pytest.raises(ValueError):
        metrics.estimate_m(model, Rng(1), trials=50)


def test_timing_experiment_shape(model):
    report = metrics.timing_experiment(model, m=8, n_vectors=6, rng=Rng(64))
    q1, q2, q3 = report.vector_quartiles
    assert q1 <= q2 <= q3
    assert report.amount_mean == pytest.approx(report.vector_mean / 64)
    assert report.timeouts == 0
    assert len(report.times) == 6


def test_timing_experiment_needs_four_vectors(model):
    with pytest.raises(ValueError):
        metrics.timing_experiment(model, m=4, n_vectors=3, rng=Rng(65))


# ---------------------------------------------------------------------------
# concealment harness (small configuration; the full gate runs in acceptance)
# ---------------------------------------------------------------------------

def test_concealment_copy_vs_constant():
    rng = Rng(66)
    real = [int(v) for v in rng.integers(10**4, 10**9, size=64 * 60)]
    copy_report = metrics.concealment_eval(real, list(real), runs=2,
                                           rng=Rng(67))
    assert abs(copy_report.accuracy - 0.5) < 0.12
    const = [10**6] * len(real)
    const_report = metrics.concealment_eval(real, const, runs=2, rng=Rng(68))
    assert const_report.accuracy > copy_report.accuracy
    assert const_report.accuracy >= 0.9
    for r in (copy_report, const_report):
        assert 0.0 <= r.precision <= 1.0
        assert 0.0 <= r.recall <= 1.0
        assert 0.0 <= r.f1 <= 1.0


def test_concealment_rejects_imbalance():
    with pytest.raises(ValueError):
        metrics.concealment_eval([1, 2, 3], [1, 2])
