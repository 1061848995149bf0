"""Spatial-frequency diagnostics: 2D DFT of token maps, radially binned log
amplitudes, band-limited random noise, and the noise-robustness harness.

The transform is a direct separable DFT (two matrix products), not a fast
transform: grids here are tiny and the direct path doubles as the reference
everything else is checked against.  Normalized radial frequency runs over
[0, 1], where 1 is the corner of the spectrum (Nyquist on both axes); a
band [f_low, f_high] keeps exactly the coefficients whose radius falls
inside the closed interval.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyBand, NoClassifier, ShapeError, VitLensError

LOG_EPS = 1e-8
DEFAULT_BINS = 11


@dataclass(frozen=True)
class FrequencyBand:
    """Closed interval of normalized frequencies; 1.0 denotes pi (Nyquist)."""
    f_low: float
    f_high: float

    def __post_init__(self):
        if not (0.0 <= self.f_low < self.f_high <= 1.0):
            raise VitLensError(f"invalid band [{self.f_low}, {self.f_high}]")

    @property
    def window(self) -> float:
        return self.f_high - self.f_low


@dataclass
class AmplitudeSpectrum:
    # (normalized_frequency_center, mean_log_amplitude) for populated bins
    bins: list[tuple[float, float]]
    delta_log_amplitude: float
    layer: int = -1
    n_bins: int = DEFAULT_BINS


def _dft_matrix(n: int, inverse: bool = False) -> np.ndarray:
    sign = 2j if inverse else -2j
    idx = np.arange(n)
    return np.exp(sign * np.pi * np.outer(idx, idx) / n)


def dft2(grid: np.ndarray) -> np.ndarray:
    """Direct separable 2D DFT: X[u,v] = sum g[x,y] exp(-2i pi (ux/h + vy/w))."""
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 2:
        raise ShapeError(f"expected a 2D grid, got shape {g.shape}")
    h, w = g.shape
    return _dft_matrix(h) @ g @ _dft_matrix(w).T


def idft2(spectrum: np.ndarray) -> np.ndarray:
    s = np.asarray(spectrum, dtype=np.complex128)
    if s.ndim != 2:
        raise ShapeError(f"expected a 2D spectrum, got shape {s.shape}")
    h, w = s.shape
    return (_dft_matrix(h, inverse=True) @ s @ _dft_matrix(w, inverse=True).T) / (h * w)


def radial_frequency(h: int, w: int) -> np.ndarray:
    """Normalized radius per (u, v) coefficient of an h x w spectrum.

    Centered indices are divided by the per-axis Nyquist index and the radius
    by sqrt(2), so the DC term maps to 0 and the corner to 1.
    """
    uc = ((np.arange(h) + h // 2) % h) - h // 2
    vc = ((np.arange(w) + w // 2) % w) - w // 2
    fu = uc / max(h / 2, 1)
    fv = vc / max(w / 2, 1)
    return np.sqrt(fu[:, None] ** 2 + fv[None, :] ** 2) / np.sqrt(2.0)


def binned_log_amplitude(
    spectrum_abs: np.ndarray,
    n_bins: int = DEFAULT_BINS,
    eps: float = LOG_EPS,
) -> tuple[np.ndarray, np.ndarray]:
    """Accumulate ln(|X| + eps) into equal radial bins over [0, 1].

    Returns per-bin ``(sums, counts)``; radius exactly 1 lands in the last bin.
    """
    h, w = spectrum_abs.shape
    r = radial_frequency(h, w)
    idx = np.minimum((r * n_bins).astype(int), n_bins - 1)
    logs = np.log(spectrum_abs + eps)
    sums = np.bincount(idx.ravel(), weights=logs.ravel(), minlength=n_bins)
    counts = np.bincount(idx.ravel(), minlength=n_bins)
    return sums, counts


def bin_centers(n_bins: int = DEFAULT_BINS) -> np.ndarray:
    return (np.arange(n_bins) + 0.5) / n_bins


def spectrum_from_bins(
    sums: np.ndarray,
    counts: np.ndarray,
    layer: int = -1,
    n_bins: int = DEFAULT_BINS,
) -> AmplitudeSpectrum:
    centers = bin_centers(n_bins)
    populated = [
        (float(centers[i]), float(sums[i] / counts[i]))
        for i in range(n_bins)
        if counts[i] > 0
    ]
    delta = populated[-1][1] - populated[0][1]
    return AmplitudeSpectrum(populated, delta, layer, n_bins)


def token_grid(reprs: np.ndarray, grid_h: int, grid_w: int, exclude_cls: bool) -> np.ndarray:
    """[N, D] token stack -> [grid_h, grid_w, D] spatial map."""
    z = np.asarray(reprs, dtype=np.float64)
    if exclude_cls and z.shape[0] == grid_h * grid_w + 1:
        z = z[1:]
    if z.shape[0] != grid_h * grid_w:
        raise ShapeError(f"{z.shape[0]} tokens do not fit a {grid_h}x{grid_w} grid")
    return z.reshape(grid_h, grid_w, -1)


def relative_log_amplitude(
    reprs: np.ndarray,
    grid_h: int,
    grid_w: int,
    exclude_cls: bool = True,
    n_bins: int = DEFAULT_BINS,
    layer: int = -1,
) -> AmplitudeSpectrum:
    """Radially binned mean log amplitude of a token map, per Fourier radius.

    The reported delta is the highest populated bin minus the lowest one, the
    depthwise high-vs-low frequency summary the spectra figures plot.
    """
    grid = token_grid(reprs, grid_h, grid_w, exclude_cls)
    sums = np.zeros(n_bins)
    counts = np.zeros(n_bins)
    for d in range(grid.shape[2]):
        amp = np.abs(dft2(grid[:, :, d]))
        s, c = binned_log_amplitude(amp, n_bins)
        sums += s
        counts += c
    return spectrum_from_bins(sums, counts, layer, n_bins)


def band_noise(
    height: int,
    width: int,
    band: FrequencyBand,
    rms: float,
    seed,
) -> np.ndarray:
    """Band-limited Gaussian noise field with the requested root-mean-square.

    A white field is transformed, coefficients outside the band are zeroed
    (the radial mask is symmetric, so the inverse transform is real up to
    rounding), and the result is rescaled to ``rms``.
    """
    if rms <= 0:
        raise VitLensError("rms must be positive")
    rng = np.random.default_rng(seed)
    white = rng.standard_normal((height, width))
    r = radial_frequency(height, width)
    mask = (r >= band.f_low) & (r <= band.f_high)
    if not np.any(mask):
        raise EmptyBand(f"band [{band.f_low}, {band.f_high}] admits no coefficient")
    filtered = idft2(dft2(white) * mask)
    out = filtered.real
    current = np.sqrt(np.mean(out * out))
    if current <= 0:
        raise EmptyBand("filtered field vanished")
    return (out * (rms / current)).astype(np.float64)


def tile_bands(window: float = 0.1) -> list[FrequencyBand]:
    """Bands of the given window tiling [0, 1]."""
    k = int(round(1.0 / window))
    return [FrequencyBand(i / k, (i + 1) / k) for i in range(k)]


@dataclass
class RobustnessPoint:
    band: FrequencyBand
    accuracy_clean: float
    accuracy_noisy: float

    @property
    def drop(self) -> float:
        return self.accuracy_clean - self.accuracy_noisy


def robustness_curve(
    weights,
    config,
    head,
    images: Sequence[np.ndarray],
    labels: Sequence[int],
    bands: Sequence[FrequencyBand],
    rms: float,
    seed: int,
    restriction=None,
) -> list[RobustnessPoint]:
    """Accuracy drop per frequency band of added noise.

    ``head`` is a trained linear probe (``probe.ProbeModel``); features are
    mean-pooled final-layer representations.  Noise is drawn per image and
    channel from subseeds derived from ``seed`` so runs are reproducible.
    """
    from . import vit
    from .probe import evaluate_probe

    if head is None:
        raise NoClassifier("robustness_curve requires a classifier head")
    labels = np.asarray(labels, dtype=int)

    def predict_features(imgs):
        feats = []
        for img in imgs:
            b = vit.forward(img, weights, config, restriction=restriction,
                            collect_head_outputs=False)
            feats.append(np.asarray(b.representations[-1], dtype=np.float64).mean(axis=0))
        return np.stack(feats)

    clean_acc = evaluate_probe(head, predict_features(images), labels)
    points = []
    for bi, band in enumerate(bands):
        if rms == 0:
            points.append(RobustnessPoint(band, clean_acc, clean_acc))
            continue
        noisy = []
        for ii, img in enumerate(images):
            img = np.asarray(img, dtype=np.float64).copy()
            for ch in range(img.shape[0]):
                sub = np.random.SeedSequence([int(seed), bi, ii, ch])
                img[ch] += band_noise(img.shape[1], img.shape[2], band, rms, sub)
            noisy.append(img.astype(np.float32))
        noisy_acc = evaluate_probe(head, predict_features(noisy), labels)
        points.append(RobustnessPoint(band, clean_acc, noisy_acc))
    return points
