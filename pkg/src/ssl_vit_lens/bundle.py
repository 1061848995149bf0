"""Activation bundles: the unit every diagnostic consumes.

A bundle holds, for one image, the per-layer post-softmax attention
probabilities ``[H, N, N]`` and the token representations ``[N, D]`` before
block 0 and after each block, plus the model configuration and any named
extras (input image, per-head attention outputs, ...).  Bundles serialize to
the NADF container (`.nad` files); a directory of `.nad` files plus an
optional ``labels.csv`` is a dataset.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import BinaryIO

import numpy as np

from . import nadf
from .errors import InvalidBundle

ROW_SUM_TOL = 1e-4


@dataclass(frozen=True)
class ModelConfig:
    depth: int
    heads: int
    dim: int
    patch_size: int
    image_size: int
    mlp_ratio: float = 4.0
    use_cls: bool = False
    channels: int = 3

    def __post_init__(self):
        if self.depth < 1 or self.heads < 1 or self.dim < 1:
            raise InvalidBundle("depth, heads, and dim must be positive")
        if self.dim % self.heads != 0:
            raise InvalidBundle("dim must be divisible by heads")
        if self.image_size % self.patch_size != 0:
            raise InvalidBundle("image_size must be divisible by patch_size")

    @property
    def grid(self) -> int:
        return self.image_size // self.patch_size

    @property
    def num_tokens(self) -> int:
        return self.grid * self.grid + (1 if self.use_cls else 0)

    @property
    def head_dim(self) -> int:
        return self.dim // self.heads

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**{k: d[k] for k in (
            "depth", "heads", "dim", "patch_size", "image_size",
            "mlp_ratio", "use_cls", "channels")})


@dataclass
class ActivationBundle:
    config: ModelConfig
    attention: list[np.ndarray]        # L tensors [H, N, N]
    representations: list[np.ndarray]  # L+1 tensors [N, D]
    extras: dict[str, np.ndarray] = field(default_factory=dict)

    def validate(self) -> None:
        cfg = self.config
        n, d = cfg.num_tokens, cfg.dim
        if len(self.attention) != cfg.depth:
            raise InvalidBundle(
                f"expected {cfg.depth} attention tensors, got {len(self.attention)}")
        if len(self.representations) != cfg.depth + 1:
            raise InvalidBundle(
                f"expected {cfg.depth + 1} representation tensors, "
                f"got {len(self.representations)}")
        for i, a in enumerate(self.attention):
            if a.shape != (cfg.heads, n, n):
                raise InvalidBundle(f"attention[{i}] shape {a.shape} != {(cfg.heads, n, n)}")
            if np.any(a < 0) or np.any(a > 1):
                raise InvalidBundle(f"attention[{i}] has entries outside [0, 1]")
            sums = a.sum(axis=-1)
            if np.max(np.abs(sums - 1.0)) > ROW_SUM_TOL:
                raise InvalidBundle(f"attention[{i}] rows not stochastic within {ROW_SUM_TOL}")
        for i, r in enumerate(self.representations):
            if r.shape != (n, d):
                raise InvalidBundle(f"representations[{i}] shape {r.shape} != {(n, d)}")

    def equal_to(self, other: "ActivationBundle") -> bool:
        """Bit-exact equality on every tensor payload."""
        if self.config != other.config:
            return False
        if set(self.extras) != set(other.extras):
            return False
        pairs = list(zip(self.attention, other.attention))
        pairs += list(zip(self.representations, other.representations))
        pairs += [(self.extras[k], other.extras[k]) for k in self.extras]
        return all(
            a.shape == b.shape
            and np.array_equal(a.view(np.uint32), b.view(np.uint32))
            for a, b in pairs
        )


def _bundle_tensors(bundle: ActivationBundle) -> dict[str, np.ndarray]:
    tensors: dict[str, np.ndarray] = {}
    for i, a in enumerate(bundle.attention):
        tensors[f"attention/{i}"] = a
    for i, r in enumerate(bundle.representations):
        tensors[f"repr/{i}"] = r
    for name, t in bundle.extras.items():
        tensors[f"extras/{name}"] = t
    return tensors


def write_bundle(bundle: ActivationBundle, sink: BinaryIO) -> int:
    """Serialize a validated bundle; returns the byte count written."""
    bundle.validate()
    meta = {"kind": "activation_bundle", "config": bundle.config.to_dict()}
    return nadf.write_nadf(sink, meta, _bundle_tensors(bundle))


def read_bundle(source: BinaryIO, permissive: bool = False) -> ActivationBundle:
    """Parse and validate a bundle from a NADF stream."""
    meta, tensors = nadf.read_nadf(source, permissive=permissive)
    if meta.get("kind") != "activation_bundle" or "config" not in meta:
        raise InvalidBundle("NADF stream is not an activation bundle")
    config = ModelConfig.from_dict(meta["config"])
    attention, representations, extras = [], [], {}
    for i in range(config.depth):
        key = f"attention/{i}"
        if key not in tensors:
            raise InvalidBundle(f"missing tensor {key!r}")
        attention.append(tensors.pop(key))
    for i in range(config.depth + 1):
        key = f"repr/{i}"
        if key not in tensors:
            raise InvalidBundle(f"missing tensor {key!r}")
        representations.append(tensors.pop(key))
    for name, t in tensors.items():
        # unknown tensors are preserved verbatim under extras
        extras[name.removeprefix("extras/")] = t
    bundle = ActivationBundle(config, attention, representations, extras)
    if not permissive:
        bundle.validate()
    return bundle


def write_bundle_file(bundle: ActivationBundle, path) -> int:
    with open(path, "wb") as fh:
        return write_bundle(bundle, fh)


def read_bundle_file(path, permissive: bool = False) -> ActivationBundle:
    with open(path, "rb") as fh:
        return read_bundle(fh, permissive=permissive)
