import numpy as np
import pytest

from fieldsteg.errors import ShapeError, SingularMatrixError
from fieldsteg.nncore import Rng, invert_matrix, max_residual


def test_identity_is_its_own_inverse():
    eye = np.eye(64)
    inv = invert_matrix(eye)
    assert np.array_equal(inv, eye)
    assert max_residual(eye, inv) == 0.0


def test_diagonal():
    w = np.diag([2.0, 4.0])
    inv = invert_matrix(w)
    assert np.array_equal(inv, np.diag([0.5, 0.25]))


def test_random_well_conditioned_multiply_back():
    rng = Rng(17)
    w = np.asarray(rng.uniform(-1, 1, size=(64, 64)))
    inv = invert_matrix(w)
    assert max_residual(w, inv) <= 1e-10


def test_residual_bound_up_to_condition_1e6():
    # constructed spectra with condition numbers up to 1e6
    gen = np.random.default_rng(0)
    for kappa in (1e2, 1e4, 1e6):
        for _ in range(5):
            q1, _ = np.linalg.qr(gen.standard_normal((64, 64)))
            q2, _ = np.linalg.qr(gen.standard_normal((64, 64)))
            w = q1 @ np.diag(np.logspace(0, -np.log10(kappa), 64)) @ q2
            assert max_residual(w, invert_matrix(w)) <= 1e-10


def test_singular_matrix_raises():
    w = np.ones((4, 4))
    with pytest.raises(SingularMatrixError):
        invert_matrix(w)


def test_duplicated_row_raises():
    rng = Rng(3)
    w = np.asarray(rng.uniform(-1, 1, size=(8, 8)))
    w[5] = w[2]
    with pytest.raises(SingularMatrixError):
        invert_matrix(w)


def test_tiny_pivot_raises():
    w = np.eye(3)
    w[1, 1] = 1e-13
    with pytest.raises(SingularMatrixError):
        invert_matrix(w)


def test_non_square_rejected():
    with pytest.raises(ShapeError):
        invert_matrix(np.ones((3, 4)))


def test_pivoting_beats_naive_elimination():
    # leading zero forces a row swap
    w = np.array([[0.0, 1.0], [1.0, 0.0]])
    inv = invert_matrix(w)
    assert np.array_equal(inv, w)
