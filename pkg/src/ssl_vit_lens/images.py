"""Native image I/O (binary PPM/PGM) and synthetic test-image generation.

Richer formats are the extractor's job; the primary component stays
dependency-light on purpose.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError, VitLensError


def read_pnm(path) -> np.ndarray:
    """Binary P5 (PGM) or P6 (PPM) -> float32 [C, H, W] in [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    magic, w, h, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    pos += 1  # single whitespace after maxval
    if magic not in (b"P5", b"P6"):
        raise VitLensError(f"unsupported PNM magic {magic!r}")
    if maxval > 255:
        raise VitLensError("16-bit PNM not supported")
    channels = 1 if magic == b"P5" else 3
    raw = np.frombuffer(data, dtype=np.uint8, count=h * w * channels, offset=pos)
    img = raw.reshape(h, w, channels).transpose(2, 0, 1)
    return (img.astype(np.float32) / maxval).copy()


def write_pnm(path, image: np.ndarray) -> None:
    """float32 [C, H, W] in [0, 1] -> binary PGM (C=1) or PPM (C=3)."""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[0] not in (1, 3):
        raise ShapeError(f"expected [1|3, H, W], got {img.shape}")
    c, h, w = img.shape
    magic = b"P5" if c == 1 else b"P6"
    quant = np.clip(np.round(img * 255), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(magic + b"\n%d %d\n255\n" % (w, h))
        fh.write(quant.transpose(1, 2, 0).tobytes())


def synthetic_image(size: int, channels: int, seed) -> np.ndarray:
    """Smooth random field in [0, 1]: a few low-frequency cosine modes plus
    mild white noise; deterministic in seed."""
    rng = np.random.default_rng(seed)
    ys, xs = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    img = np.zeros((channels, size, size))
    for ch in range(channels):
        field = np.zeros((size, size))
        for _ in range(4):
            fy, fx = rng.integers(0, 3, size=2)
            phase = rng.uniform(0, 2 * np.pi)
            field += rng.uniform(0.3, 1.0) * np.cos(
                2 * np.pi * (fy * ys + fx * xs) / size + phase)
        field += 0.1 * rng.standard_normal((size, size))
        lo, hi = field.min(), field.max()
        img[ch] = (field - lo) / max(hi - lo, 1e-9)
    return img.astype(np.float32)


def two_class_lowfreq_dataset(
    count: int,
    size: int,
    channels: int,
    seed: int,
) -> tuple[list[np.ndarray], list[int]]:
    """Synthetic dataset whose classes differ only in low-frequency content:
    opposite-sign half-period gradients (which also differ in mean level),
    overlaid with identical-statistics white texture."""
    rng = np.random.default_rng(seed)
    xs = np.arange(size)[None, :] * np.ones((size, 1))
    base = np.cos(np.pi * xs / size)
    images, labels = [], []
    for i in range(count):
        label = i % 2
        sign = 1.0 if label == 0 else -1.0
        texture = 0.15 * rng.standard_normal((channels, size, size))
        img = 0.5 + sign * 0.35 * base[None, :, :] + texture
        images.append(img.astype(np.float32))
        labels.append(label)
    return images, labels
