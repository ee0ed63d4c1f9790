"""Operator norm, minimum modulus, and inversion for small complex matrices."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from loewner_lab import linalg
from loewner_lab.errors import InputError, SingularMatrixError

# largest singular value of [[1,1],[0,1]]: the golden ratio, from the
# characteristic polynomial of A^H A (lambda^2 - 3 lambda + 1 = 0)
GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0


def random_matrix(rng, n):
    return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))


def well_conditioned(rng, n, floor=0.05):
    while True:
        a = random_matrix(rng, n)
        sv = np.linalg.svd(a, compute_uv=False)
        if sv[-1] >= floor * sv[0]:
            return a


class TestOperatorNorm:
    def test_identity(self):
        assert linalg.operator_norm(np.eye(2)) == pytest.approx(1.0, abs=1e-14)

    def test_diagonal(self):
        assert linalg.operator_norm(np.diag([2.0, 0.5])) == pytest.approx(2.0, abs=1e-14)

    def test_golden_ratio_shear(self):
        a = np.array([[1.0, 1.0], [0.0, 1.0]])
        assert linalg.operator_norm(a) == pytest.approx(GOLDEN, abs=1e-12)
        assert linalg.operator_norm(a) == pytest.approx(1.6180339887, abs=1e-9)

    def test_nonfinite_rejected(self):
        with pytest.raises(InputError):
            linalg.operator_norm(np.array([[np.nan, 0.0], [0.0, 1.0]]))

    def test_matches_external_svd(self):
        rng = np.random.default_rng(7)
        for n in (1, 2, 3, 4, 6, 8):
            for _ in range(20):
                a = random_matrix(rng, n)
                sv = np.linalg.svd(a, compute_uv=False)
                assert linalg.operator_norm(a) == pytest.approx(sv[0], rel=1e-12)
                assert linalg.min_modulus(a) == pytest.approx(sv[-1], rel=1e-10, abs=1e-12)


class TestMinModulus:
    def test_diagonal(self):
        assert linalg.min_modulus(np.diag([2.0, 0.5])) == pytest.approx(0.5, abs=1e-14)

    def test_identity(self):
        assert linalg.min_modulus(np.eye(3)) == pytest.approx(1.0, abs=1e-14)

    def test_singular_matrix_gives_zero(self):
        a = np.array([[1.0, 2.0], [2.0, 4.0]])
        assert linalg.min_modulus(a) == pytest.approx(0.0, abs=1e-12)

    def test_inverse_norm_reciprocal(self):
        # mu(A) * |A^{-1}| = 1 for invertible A
        rng = np.random.default_rng(11)
        for n in (1, 2, 3, 4):
            for _ in range(50):
                a = well_conditioned(rng, n)
                prod = linalg.min_modulus(a) * linalg.operator_norm(linalg.inverse(a))
                assert abs(prod - 1.0) <= 1e-12


class TestInverse:
    def test_identity(self):
        assert np.allclose(linalg.inverse(np.eye(3)), np.eye(3), atol=1e-14)

    def test_diagonal(self):
        assert np.allclose(linalg.inverse(np.diag([2.0, 0.5])), np.diag([0.5, 2.0]), atol=1e-14)

    def test_unipotent(self):
        a = np.array([[1.0, 1.0], [0.0, 1.0]])
        assert np.allclose(linalg.inverse(a), [[1.0, -1.0], [0.0, 1.0]], atol=1e-14)

    def test_roundtrip(self):
        rng = np.random.default_rng(3)
        for n in (2, 3, 4):
            a = well_conditioned(rng, n)
            assert np.max(np.abs(a @ linalg.inverse(a) - np.eye(n))) <= 1e-12

    def test_singular_raises_with_sigma(self):
        a = np.array([[1.0, 2.0], [0.5, 1.0]])
        with pytest.raises(SingularMatrixError) as exc:
            linalg.inverse(a)
        assert exc.value.sigma_min <= 1e-10 * linalg.operator_norm(a)


@st.composite
def matrices(draw, max_n=4):
    n = draw(st.integers(min_value=1, max_value=max_n))
    scal = st.floats(min_value=-3.0, max_value=3.0, allow_nan=False, allow_infinity=False)
    re = draw(st.lists(scal, min_size=n * n, max_size=n * n))
    im = draw(st.lists(scal, min_size=n * n, max_size=n * n))
    return (np.array(re) + 1j * np.array(im)).reshape(n, n)


class TestProperties:
    @given(matrices())
    @settings(max_examples=200, deadline=None)
    def test_min_modulus_below_norm(self, a):
        assert linalg.min_modulus(a) <= linalg.operator_norm(a) + 1e-12

    @given(matrices(), st.integers(min_value=0, max_value=2**31 - 1))
    @settings(max_examples=150, deadline=None)
    def test_submultiplicative(self, a, seed):
        rng = np.random.default_rng(seed)
        b = random_matrix(rng, a.shape[0])
        assert linalg.operator_norm(a @ b) <= (
            linalg.operator_norm(a) * linalg.operator_norm(b) + 1e-12
        )

    def test_reciprocal_relative_bound(self):
        # |mu(A) - 1/|A^-1|| <= 1e-10 * |A| over random sizes 1..4
        rng = np.random.default_rng(17)
        for _ in range(200):
            n = int(rng.integers(1, 5))
            a = well_conditioned(rng, n)
            lhs = abs(linalg.min_modulus(a) - 1.0 / linalg.operator_norm(linalg.inverse(a)))
            assert lhs <= 1e-10 * linalg.operator_norm(a)


class TestBatched:
    def test_solve_batch_matches_scalar(self):
        rng = np.random.default_rng(5)
        for n in (1, 2, 3):
            mats = np.stack([well_conditioned(rng, n) for _ in range(8)])
            rhs = rng.standard_normal((8, n)) + 1j * rng.standard_normal((8, n))
            got = linalg.solve_batch(mats, rhs)
            for i in range(8):
                assert np.allclose(mats[i] @ got[i], rhs[i], atol=1e-10)

    def test_min_modulus_batch(self):
        rng = np.random.default_rng(6)
        mats = np.stack([random_matrix(rng, 2) for _ in range(16)])
        got = linalg.min_modulus_batch(mats)
        want = [np.linalg.svd(m, compute_uv=False)[-1] for m in mats]
        assert np.allclose(got, want, atol=1e-12)

    def test_operator_norm_batch(self):
        rng = np.random.default_rng(8)
        mats = np.stack([random_matrix(rng, 2) for _ in range(16)])
        got = linalg.operator_norm_batch(mats)
        want = [np.linalg.svd(m, compute_uv=False)[0] for m in mats]
        assert np.allclose(got, want, atol=1e-12)
