import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ssl_vit_lens import (
    FrequencyBand,
    ModelConfig,
    band_noise,
    dft2,
    idft2,
    random_weights,
    relative_log_amplitude,
    robustness_curve,
    tile_bands,
)
from ssl_vit_lens.errors import EmptyBand, NoClassifier, ShapeError, VitLensError
from ssl_vit_lens.images import two_class_lowfreq_dataset
from ssl_vit_lens.probe import ProbeConfig, train_probe
from ssl_vit_lens.spectral import (
    LOG_EPS,
    binned_log_amplitude,
    radial_frequency,
    spectrum_from_bins,
)
from ssl_vit_lens.vit import forward

from oracles import quad_loop_dft2


class TestDft2:
    def test_constant_grid_dc_only(self):
        c = 2.5
        x = dft2(np.full((4, 6), c))
        assert x[0, 0] == pytest.approx(c * 24)
        rest = np.abs(x).copy()
        rest[0, 0] = 0
        assert np.max(rest) <= 1e-6 * abs(c) * 24

    def test_impulse_flat_spectrum(self):
        g = np.zeros((5, 5))
        g[0, 0] = 1.0
        assert np.allclose(np.abs(dft2(g)), 1.0, atol=1e-12)

    def test_matches_quadruple_loop(self):
        rng = np.random.default_rng(0)
        g = rng.standard_normal((5, 7))
        assert np.max(np.abs(dft2(g) - quad_loop_dft2(g))) < 1e-6

    def test_parseval(self):
        rng = np.random.default_rng(1)
        g = rng.standard_normal((6, 8))
        lhs = np.sum(g * g)
        rhs = np.sum(np.abs(dft2(g)) ** 2) / (6 * 8)
        assert rhs == pytest.approx(lhs, rel=1e-6)

    def test_linearity(self):
        rng = np.random.default_rng(2)
        g1, g2 = rng.standard_normal((2, 4, 5))
        a, b = 2.0, -0.7
        assert np.allclose(dft2(a * g1 + b * g2), a * dft2(g1) + b * dft2(g2), atol=1e-9)

    def test_inverse(self):
        rng = np.random.default_rng(3)
        g = rng.standard_normal((4, 4))
        assert np.allclose(idft2(dft2(g)).real, g, atol=1e-10)


class TestRelativeLogAmplitude:
    def test_constant_map_strongly_negative_delta(self):
        reprs = np.tile(np.array([1.0, 2.0]), (16, 1))
        spec = relative_log_amplitude(reprs, 4, 4, exclude_cls=False)
        # all non-DC bins sit at the log-eps floor
        assert spec.bins[0][1] > np.log(LOG_EPS)
        for _, v in spec.bins[1:]:
            assert v == pytest.approx(np.log(LOG_EPS))
        assert spec.delta_log_amplitude < np.log(LOG_EPS) / 2

    def test_impulse_map_flat(self):
        reprs = np.zeros((16, 1))
        reprs[0, 0] = 1.0
        spec = relative_log_amplitude(reprs, 4, 4, exclude_cls=False)
        values = [v for _, v in spec.bins]
        assert np.max(values) - np.min(values) < 1e-6
        assert abs(spec.delta_log_amplitude) < 1e-6

    def test_cos_pattern_matches_manual_binning(self):
        xs = np.arange(4)
        grid = np.cos(np.pi * xs)[None, :] * np.ones((4, 1))
        reprs = grid.reshape(16, 1)
        spec = relative_log_amplitude(reprs, 4, 4, exclude_cls=False, n_bins=11)
        # manual binning over the quadruple-loop DFT
        amp = np.abs(quad_loop_dft2(grid))
        r = radial_frequency(4, 4)
        idx = np.minimum((r * 11).astype(int), 10)
        sums = np.zeros(11)
        counts = np.zeros(11)
        for u in range(4):
            for v in range(4):
                sums[idx[u, v]] += np.log(amp[u, v] + LOG_EPS)
                counts[idx[u, v]] += 1
        manual = spectrum_from_bins(sums, counts, n_bins=11)
        assert np.allclose(np.array(spec.bins), np.array(manual.bins))
        # energy concentrates in the bin holding the +-Nyquist-x radius
        target_bin = idx[0, 2]
        by_bin = {i: sums[i] / counts[i] for i in range(11) if counts[i]}
        assert max(by_bin, key=by_bin.get) == target_bin

    def test_dc_shift_only_affects_dc_bin(self):
        rng = np.random.default_rng(4)
        reprs = rng.standard_normal((16, 3))
        base = relative_log_amplitude(reprs, 4, 4, exclude_cls=False)
        shifted = relative_log_amplitude(reprs + np.array([5.0, -3.0, 2.0]),
                                         4, 4, exclude_cls=False)
        for (f1, v1), (f2, v2) in zip(base.bins[1:], shifted.bins[1:]):
            assert v1 == pytest.approx(v2, abs=1e-9)

    def test_grid_mismatch(self):
        with pytest.raises(ShapeError):
            relative_log_amplitude(np.zeros((10, 2)), 4, 4, exclude_cls=False)


class TestBandNoise:
    def test_allpass_is_rescaled_white_field(self):
        band = FrequencyBand(0.0, 1.0)
        out = band_noise(16, 16, band, rms=0.5, seed=3)
        assert np.sqrt(np.mean(out ** 2)) == pytest.approx(0.5, abs=1e-6)
        white = np.random.default_rng(3).standard_normal((16, 16))
        scaled = white * 0.5 / np.sqrt(np.mean(white ** 2))
        assert np.allclose(out, scaled, atol=1e-9)

    def test_high_band_energy_containment(self):
        band = FrequencyBand(0.9, 1.0)
        out = band_noise(32, 32, band, rms=1.0, seed=5)
        x = dft2(out)
        r = radial_frequency(32, 32)
        energy = np.abs(x) ** 2
        inband = energy[(r >= 0.9) & (r <= 1.0)].sum()
        assert inband / energy.sum() >= 0.99

    def test_deterministic(self):
        band = FrequencyBand(0.3, 0.5)
        a = band_noise(8, 8, band, rms=0.1, seed=9)
        b = band_noise(8, 8, band, rms=0.1, seed=9)
        assert np.array_equal(a, b)

    def test_real_and_zero_mean_without_dc(self):
        band = FrequencyBand(0.2, 0.6)
        out = band_noise(16, 16, band, rms=1.0, seed=1)
        assert abs(out.mean()) <= 1e-6

    def test_empty_band(self):
        with pytest.raises(EmptyBand):
            band_noise(4, 4, FrequencyBand(0.01, 0.02), rms=1.0, seed=0)

    def test_invalid_band(self):
        with pytest.raises(VitLensError):
            FrequencyBand(0.5, 0.4)

    @given(st.integers(0, 1000))
    @settings(max_examples=10, deadline=None)
    def test_rms_honored(self, seed):
        out = band_noise(16, 16, FrequencyBand(0.1, 0.9), rms=0.25, seed=seed)
        assert np.sqrt(np.mean(out ** 2)) == pytest.approx(0.25, abs=1e-9)


@pytest.fixture(scope="module")
def setup():
    # patch_size 1 so token pooling averages every non-DC frequency away;
    # the probe then reads low-frequency content only
    cfg = ModelConfig(depth=2, heads=2, dim=16, patch_size=1, image_size=8)
    weights = random_weights(cfg, 0)
    images, labels = two_class_lowfreq_dataset(40, 8, 3, seed=2)
    feats = np.stack([
        forward(im, weights, cfg, collect_head_outputs=False)
        .representations[-1].mean(axis=0)
        for im in images
    ])
    head = train_probe(feats, np.array(labels),
                       ProbeConfig(learning_rate=200.0, epochs=300, batch_size=8, seed=0))
    return cfg, weights, images, labels, head


class TestRobustnessCurve:

    def test_zero_rms_zero_drop(self, setup):
        cfg, weights, images, labels, head = setup
        pts = robustness_curve(weights, cfg, head, images[:8], labels[:8],
                               tile_bands(0.5), rms=0.0, seed=0)
        assert all(p.drop == 0 for p in pts)

    def test_tiling_bands_count_and_range(self, setup):
        cfg, weights, images, labels, head = setup
        bands = tile_bands(0.1)
        assert len(bands) == 10
        pts = robustness_curve(weights, cfg, head, images[:6], labels[:6],
                               bands[:2], rms=0.05, seed=1)
        for p in pts:
            assert -1.0 <= p.drop <= 1.0

    def test_low_band_hurts_more_than_high_band(self, setup):
        # classes differ only in low-frequency content, so low-band noise
        # must cost more accuracy than high-band noise
        cfg, weights, images, labels, head = setup
        bands = [FrequencyBand(0.0, 0.1), FrequencyBand(0.9, 1.0)]
        pts = robustness_curve(weights, cfg, head, images, labels,
                               bands, rms=1.0, seed=3)
        assert pts[0].accuracy_clean == 1.0
        assert pts[0].drop > pts[1].drop

    def test_missing_head(self, setup):
        cfg, weights, images, labels, _ = setup
        with pytest.raises(NoClassifier):
            robustness_curve(weights, cfg, None, images[:2], labels[:2],
                             tile_bands(0.5), rms=0.1, seed=0)
