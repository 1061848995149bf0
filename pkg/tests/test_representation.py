import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ssl_vit_lens import (
    cosine_similarity_depth,
    cosine_similarity_heads,
    cosine_similarity_tokens,
    image_spectrum,
    jacobi_svd,
    svd_values,
    token_spectrum,
)
from ssl_vit_lens.errors import (
    DegenerateSpectrum,
    NotEnoughHeads,
    NotEnoughImages,
    NotEnoughTokens,
    NumericalError,
    ShapeError,
)
from ssl_vit_lens.representation import aggregate_log_sigma

from oracles import sigma_via_ata


class TestCosineHeads:
    def test_identical_heads(self):
        z = np.tile(np.random.default_rng(0).standard_normal((1, 4, 3)), (3, 1, 1))
        assert cosine_similarity_heads(z) == pytest.approx(1.0)

    def test_orthogonal_heads(self):
        z = np.zeros((2, 4, 2))
        z[0, :, 0] = 1.0
        z[1, :, 1] = 1.0
        assert cosine_similarity_heads(z) == pytest.approx(0.0)

    def test_matches_pairwise_loop(self):
        rng = np.random.default_rng(1)
        z = rng.standard_normal((3, 2, 2))
        expected = []
        for i in range(3):
            for j in range(i + 1, 3):
                for t in range(2):
                    a, b = z[i, t], z[j, t]
                    expected.append(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))
        # mean over tokens within each pair, then over pairs
        per_pair = [np.mean(expected[k * 2:(k + 1) * 2]) for k in range(3)]
        assert cosine_similarity_heads(z) == pytest.approx(np.mean(per_pair))

    def test_single_head_rejected(self):
        with pytest.raises(NotEnoughHeads):
            cosine_similarity_heads(np.zeros((1, 4, 2)))


class TestCosineDepthTokens:
    def test_depth_identical(self):
        z = np.random.default_rng(0).standard_normal((4, 3))
        assert cosine_similarity_depth(z, z) == pytest.approx(1.0)
        assert cosine_similarity_depth(z, -z) == pytest.approx(-1.0)

    def test_depth_matches_loop(self):
        rng = np.random.default_rng(2)
        a, b = rng.standard_normal((4, 3)), rng.standard_normal((4, 3))
        ref = np.mean([
            a[t] @ b[t] / (np.linalg.norm(a[t]) * np.linalg.norm(b[t]))
            for t in range(4)
        ])
        assert cosine_similarity_depth(a, b) == pytest.approx(ref)

    def test_depth_shape_mismatch(self):
        with pytest.raises(ShapeError):
            cosine_similarity_depth(np.zeros((3, 2)), np.zeros((4, 2)))

    def test_tokens_identical_and_antipodal(self):
        v = np.array([1.0, 2.0])
        assert cosine_similarity_tokens(np.tile(v, (5, 1))) == pytest.approx(1.0)
        assert cosine_similarity_tokens(np.stack([v, -v])) == pytest.approx(-1.0)

    def test_tokens_match_pair_loop(self):
        rng = np.random.default_rng(3)
        z = rng.standard_normal((5, 4))
        ref = np.mean([
            z[i] @ z[j] / (np.linalg.norm(z[i]) * np.linalg.norm(z[j]))
            for i in range(5) for j in range(i + 1, 5)
        ])
        assert cosine_similarity_tokens(z) == pytest.approx(ref)

    def test_tokens_too_few(self):
        with pytest.raises(NotEnoughTokens):
            cosine_similarity_tokens(np.zeros((1, 3)))

    def test_zero_vector_contributes_zero(self):
        z = np.array([[0.0, 0.0], [1.0, 0.0]])
        assert cosine_similarity_tokens(z) == 0.0

    @given(st.integers(0, 5000))
    @settings(max_examples=30, deadline=None)
    def test_range_and_scaling_invariance(self, seed):
        rng = np.random.default_rng(seed)
        z = rng.standard_normal((4, 3))
        s = cosine_similarity_tokens(z)
        assert -1 - 1e-12 <= s <= 1 + 1e-12
        scales = rng.uniform(0.1, 10.0, size=(4, 1))
        assert cosine_similarity_tokens(z * scales) == pytest.approx(s)


class TestSvd:
    def test_identity(self):
        assert np.allclose(svd_values(np.eye(3)), [1, 1, 1])

    def test_rank_one(self):
        u = np.array([1.0, 2.0, 3.0])
        v = np.array([2.0, -1.0])
        s = svd_values(np.outer(u, v))
        assert s[0] == pytest.approx(np.linalg.norm(u) * np.linalg.norm(v))
        assert np.all(s[1:] < 1e-6)

    def test_matches_ata_eigen_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            a = rng.standard_normal((4, 3))
            s = svd_values(a)
            ref = sigma_via_ata(a)
            assert np.max(np.abs(s - ref) / np.maximum(ref, 1e-9)) < 1e-6

    def test_reconstruction(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal((6, 4))
        u, s, vt = jacobi_svd(a, compute_uv=True)
        assert np.linalg.norm(u @ np.diag(s) @ vt - a) <= 1e-4 * np.linalg.norm(a)

    def test_rotation_invariance(self):
        rng = np.random.default_rng(6)
        a = rng.standard_normal((5, 4))
        q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
        assert np.allclose(svd_values(q @ a), svd_values(a), atol=1e-6)

    def test_scaling(self):
        rng = np.random.default_rng(7)
        a = rng.standard_normal((4, 4))
        assert np.allclose(svd_values(-2.5 * a), 2.5 * svd_values(a), atol=1e-9)

    def test_frobenius_identity(self):
        rng = np.random.default_rng(8)
        a = rng.standard_normal((6, 5))
        s = svd_values(a)
        assert np.sum(s ** 2) == pytest.approx(np.sum(a * a), rel=1e-6)

    def test_nonfinite_rejected(self):
        with pytest.raises(NumericalError):
            svd_values(np.array([[np.nan, 1.0], [0.0, 1.0]]))

    def test_descending_nonnegative(self):
        rng = np.random.default_rng(9)
        s = svd_values(rng.standard_normal((8, 6)))
        assert np.all(s >= 0)
        assert np.all(np.diff(s) <= 1e-12)


class TestSpectra:
    def test_identical_tokens_degenerate(self):
        z = np.tile(np.array([1.0, 2.0, 3.0]), (6, 1))
        with pytest.raises(DegenerateSpectrum):
            token_spectrum(z)

    def test_isotropic_orthonormal_tokens(self):
        c = 3.0
        z = c * np.eye(4)  # after centering, all nonzero sigmas equal
        spec = token_spectrum(z, reference="largest")
        nonzero = spec.singular_values[spec.singular_values > 1e-9]
        assert np.allclose(nonzero, nonzero[0])
        assert np.allclose(spec.delta_log[: len(nonzero)], 0.0, atol=1e-9)

    def test_random_matches_ata_oracle(self):
        rng = np.random.default_rng(10)
        z = rng.standard_normal((6, 4))
        spec = token_spectrum(z)
        centered = z - z.mean(axis=0)
        ref = sigma_via_ata(centered)
        logs = np.log(np.maximum(ref, 1e-12))
        assert np.allclose(spec.singular_values, ref, atol=1e-8)
        assert np.allclose(spec.delta_log, logs - logs[1], atol=1e-8)
        assert spec.delta_log[spec.reference_index] == 0.0

    def test_image_spectrum_identical_images(self):
        z = np.random.default_rng(11).standard_normal((4, 3))
        with pytest.raises(DegenerateSpectrum):
            image_spectrum([z, z.copy(), z.copy()])

    def test_image_spectrum_rank_one(self):
        v = np.array([1.0, -2.0, 0.5])
        imgs = [np.tile(v, (4, 1)), np.tile(-v, (4, 1))]
        spec = image_spectrum(imgs, reference="largest")
        assert spec.singular_values[0] > 1e-6
        assert np.all(spec.singular_values[1:] < 1e-9)

    def test_image_spectrum_matches_oracle(self):
        rng = np.random.default_rng(12)
        imgs = [rng.standard_normal((4, 3)) for _ in range(5)]
        spec = image_spectrum(imgs)
        pooled = np.stack([im.mean(axis=0) for im in imgs])
        centered = pooled - pooled.mean(axis=0)
        assert np.allclose(spec.singular_values, sigma_via_ata(centered), atol=1e-8)

    def test_image_spectrum_needs_two(self):
        with pytest.raises(NotEnoughImages):
            image_spectrum([np.zeros((4, 3))])

    def test_aggregate_log_sigma(self):
        spectra = [np.array([4.0, 2.0, 1.0]), np.array([2.0, 1.0, 0.5])]
        ref_idx, mean_log, dlog = aggregate_log_sigma(spectra)
        assert ref_idx == 1
        assert mean_log == pytest.approx(
            (np.log(spectra[0]) + np.log(spectra[1])) / 2)
        assert dlog[1] == 0.0
