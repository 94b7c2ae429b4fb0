"""Projection geometry: SVD contracts and the O(n)/SO(n)/SO-(n) projections.

Ground truths: reconstruction identities, closed-form distances, and
brute-force sampling over the orthogonal group.
"""
import numpy as np
import pytest

from orthoflow.errors import DegenerateDeterminantError
from orthoflow.matgeom import (frobenius_inner, nearest_opposite,
                               nearest_orthogonal, orthogonal_projections,
                               project_orthogonal_stack, svd, t_minus, t_plus)


def random_orthogonal(rng, n, count, det_sign=None):
    """Sample orthogonal matrices via QR of Gaussian matrices."""
    q, r = np.linalg.qr(rng.standard_normal((count, n, n)))
    # make the factorization unique (positive diagonal of r)
    q = q * np.sign(np.diagonal(r, axis1=-2, axis2=-1))[:, None, :]
    if det_sign is not None:
        d = np.linalg.det(q)
        flip = np.sign(d) != det_sign
        q[flip, :, -1] = -q[flip, :, -1]
    return q


class TestSvd:
    def test_identity(self):
        res = svd(np.eye(2))
        np.testing.assert_allclose(res.sigma, [1.0, 1.0])
        np.testing.assert_allclose(res.u @ res.v.T, np.eye(2), atol=1e-14)

    def test_diagonal(self):
        res = svd(np.diag([2.0, 0.5]))
        np.testing.assert_allclose(res.sigma, [2.0, 0.5])

    def test_reconstruction_random(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            a = rng.standard_normal((3, 3))
            res = svd(a)
            rel = np.linalg.norm(res.reconstruct() - a) / np.linalg.norm(a)
            assert rel <= 1e-10
            # factor orthogonality and ordering
            assert np.linalg.norm(res.u.T @ res.u - np.eye(3)) <= 1e-12
            assert np.linalg.norm(res.v.T @ res.v - np.eye(3)) <= 1e-12
            assert np.all(np.diff(res.sigma) <= 0) and np.all(res.sigma >= 0)

    def test_deterministic(self):
        a = np.random.default_rng(2).standard_normal((3, 3))
        r1, r2 = svd(a), svd(a)
        np.testing.assert_array_equal(r1.u, r2.u)
        np.testing.assert_array_equal(r1.sigma, r2.sigma)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            svd(np.array([[np.nan, 0.0], [0.0, 1.0]]))


class TestNearestOrthogonal:
    def test_identity(self):
        q, d = nearest_orthogonal(np.eye(3))
        np.testing.assert_allclose(q, np.eye(3), atol=1e-14)
        assert d == pytest.approx(0.0, abs=1e-14)

    def test_diagonal(self):
        q, d = nearest_orthogonal(np.diag([2.0, 0.5]))
        np.testing.assert_allclose(q, np.eye(2), atol=1e-12)
        assert d == pytest.approx(1.25, abs=1e-12)

    def test_det_sign_preserved(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            a = rng.standard_normal((3, 3))
            if abs(np.linalg.det(a)) < 1e-6:
                continue
            q, _ = nearest_orthogonal(a)
            assert np.sign(np.linalg.det(q)) == np.sign(np.linalg.det(a))

    def test_beats_sampling(self):
        rng = np.random.default_rng(4)
        for n in (2, 3):
            samples = random_orthogonal(rng, n, 20_000)
            half = len(samples) // 2
            samples[:half, :, -1] = -samples[:half, :, -1]  # mix in SO-
            for _ in range(50):
                a = rng.standard_normal((n, n))
                q, dist_sq = nearest_orthogonal(a)
                assert dist_sq == pytest.approx(
                    np.sum((np.linalg.svd(a)[1] - 1.0) ** 2), abs=1e-10)
                best = np.min(np.sum((samples - a) ** 2, axis=(1, 2)))
                assert np.sum((q - a) ** 2) <= best + 1e-9


class TestNearestOpposite:
    def test_diagonal(self):
        c, d = nearest_opposite(np.diag([2.0, 0.5]))
        np.testing.assert_allclose(c, np.diag([1.0, -1.0]), atol=1e-12)
        assert d == pytest.approx(3.25, abs=1e-12)

    def test_identity_component_gap(self):
        # dist(SO, SO-) = 2, attained against the identity
        _, d = nearest_opposite(np.eye(2))
        assert d == pytest.approx(4.0, abs=1e-12)

    def test_degenerate_rejected(self):
        with pytest.raises(DegenerateDeterminantError):
            nearest_opposite(np.diag([1.0, 0.0]))

    def test_beats_sampling_opposite_component(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            a = rng.standard_normal((3, 3))
            det = np.linalg.det(a)
            if abs(det) < 1e-6:
                continue
            c, dist_sq = nearest_opposite(a)
            assert np.sign(np.linalg.det(c)) == -np.sign(det)
            samples = random_orthogonal(rng, 3, 20_000, det_sign=-np.sign(det))
            best = np.min(np.sum((samples - a) ** 2, axis=(1, 2)))
            assert np.sum((c - a) ** 2) <= best + 1e-9
            s = np.linalg.svd(a)[1]
            assert dist_sq == pytest.approx(np.sum((s - 1) ** 2) + 4 * s[-1],
                                            abs=1e-10)


class TestTplusTminus:
    def test_definition_positive_det(self):
        rng = np.random.default_rng(6)
        a = rng.standard_normal((3, 3))
        if np.linalg.det(a) < 0:
            a[:, 0] = -a[:, 0]
        np.testing.assert_array_equal(t_plus(a), nearest_orthogonal(a)[0])
        np.testing.assert_array_equal(t_minus(a), nearest_opposite(a)[0])

    def test_det_signs(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            a = rng.standard_normal((3, 3))
            if abs(np.linalg.det(a)) < 1e-6:
                continue
            assert np.linalg.det(t_plus(a)) == pytest.approx(1.0, abs=1e-10)
            assert np.linalg.det(t_minus(a)) == pytest.approx(-1.0, abs=1e-10)

    def test_degenerate_rejected(self):
        for fn in (t_plus, t_minus):
            with pytest.raises(DegenerateDeterminantError):
                fn(np.zeros((2, 2)))


class TestFrobeniusInner:
    def test_identity(self):
        assert frobenius_inner(np.eye(2), np.eye(2)) == 2.0

    def test_orthogonal_norm(self):
        rng = np.random.default_rng(8)
        q = random_orthogonal(rng, 3, 1)[0]
        assert frobenius_inner(q, q) == pytest.approx(3.0, abs=1e-12)

    def test_matches_elementwise_sum(self):
        rng = np.random.default_rng(9)
        a, b = rng.standard_normal((2, 3, 3))
        expected = sum(a[i, j] * b[i, j] for i in range(3) for j in range(3))
        assert frobenius_inner(a, b) == pytest.approx(expected, abs=1e-14)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            frobenius_inner(np.eye(2), np.eye(3))


class TestComponentGap:
    def test_exact_pair_attains_two(self):
        p = np.eye(3)
        q = np.diag([1.0, 1.0, -1.0])
        assert np.linalg.norm(p - q) == 2.0

    def test_sampled_gap(self):
        rng = np.random.default_rng(10)
        p = random_orthogonal(rng, 3, 10_000, det_sign=1.0)
        q = random_orthogonal(rng, 3, 10_000, det_sign=-1.0)
        dists = np.linalg.norm(p - q, axis=(1, 2))
        assert dists.min() >= 2.0 - 1e-3


class TestStacked:
    def test_matches_single_matrix_ops(self):
        rng = np.random.default_rng(11)
        mats = rng.standard_normal((40, 3, 3))
        plus, minus, gain, singular = orthogonal_projections(mats)
        assert not singular.any()
        for i in range(len(mats)):
            np.testing.assert_allclose(plus[i], t_plus(mats[i]), atol=1e-12)
            np.testing.assert_allclose(minus[i], t_minus(mats[i]), atol=1e-12)
            expected = frobenius_inner(plus[i] - minus[i], mats[i])
            assert gain[i] == pytest.approx(expected, abs=1e-10)

    def test_projection_stack_singular_goes_plus(self):
        mats = np.stack([np.diag([1.0, 0.0]), np.diag([2.0, 0.5]),
                         np.array([[0.0, 1.0], [0.0, 0.0]])])
        projected, n_sing = project_orthogonal_stack(mats)
        assert n_sing == 2
        dets = np.linalg.det(projected)
        assert dets[0] == pytest.approx(1.0, abs=1e-12)   # singular -> SO
        assert dets[2] == pytest.approx(1.0, abs=1e-12)
        ortho = projected @ np.swapaxes(projected, -1, -2)
        np.testing.assert_allclose(ortho, np.broadcast_to(np.eye(2), ortho.shape),
                                   atol=1e-12)
