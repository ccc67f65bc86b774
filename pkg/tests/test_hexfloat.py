import math
import struct

import numpy as np
import pytest

from fieldsteg.nncore import array_to_hex, f64_to_hex, hex_to_array, hex_to_f64


def test_scalar_round_trip_exact():
    values = [0.0, -0.0, 1.0, -1.0, math.pi, 1e-300, 1e300, 2**-1074,
              0.1, 1 / 3, float(2**53 - 1)]
    for v in values:
        back = hex_to_f64(f64_to_hex(v))
        assert struct.pack(">d", back) == struct.pack(">d", v)


def test_known_pattern():
    assert f64_to_hex(1.0) == "3ff0000000000000"
    assert hex_to_f64("3ff0000000000000") == 1.0


def test_array_round_trip_bit_exact():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((8, 8)) * 10.0 ** rng.integers(-300, 300, (8, 8))
    back = hex_to_array(array_to_hex(a), (8, 8))
    assert a.tobytes() == back.tobytes()


def test_bad_hex_rejected():
    with pytest.raises(ValueError):
        hex_to_f64("zz")
    with pytest.raises(ValueError):
        hex_to_f64("00" * 9)


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        hex_to_array([f64_to_hex(1.0)] * 3, (2, 2))
