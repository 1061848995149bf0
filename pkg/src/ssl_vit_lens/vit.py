"""Minimal deterministic pre-LN Vision Transformer forward pass.

Block order is the standard pre-LN arrangement:

    x <- x + Attn(LN(x))
    x <- x + MLP(LN(x))

GELU uses the exact error-function form; softmax is max-subtracted.  Local
attention restriction (Chebyshev-ball masks) is applied additively before the
softmax with a -1e9 constant, which underflows to exactly zero probability
after the exponential, so restricted rows stay stochastic over admitted keys.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import erf

from .bundle import ActivationBundle, ModelConfig
from .errors import InvalidBundle, InvalidKernel, NumericalError, ShapeError

MASK_NEG = np.float32(-1e9)
LN_EPS = 1e-6


@dataclass(frozen=True)
class AttentionRestriction:
    """Chebyshev-ball receptive-field limit; ``kernel=None`` means unlimited."""
    kernel: Optional[int] = None
    include_cls_always: bool = True

    def __post_init__(self):
        if self.kernel is not None:
            if self.kernel < 1 or self.kernel % 2 == 0:
                raise InvalidKernel(f"kernel must be odd and positive, got {self.kernel}")


@dataclass
class LayerWeights:
    ln1_scale: np.ndarray
    ln1_shift: np.ndarray
    wq: np.ndarray
    bq: np.ndarray
    wk: np.ndarray
    bk: np.ndarray
    wv: np.ndarray
    bv: np.ndarray
    wo: np.ndarray
    bo: np.ndarray
    ln2_scale: np.ndarray
    ln2_shift: np.ndarray
    mlp_w1: np.ndarray
    mlp_b1: np.ndarray
    mlp_w2: np.ndarray
    mlp_b2: np.ndarray


@dataclass
class Weights:
    patch_weight: np.ndarray          # [P*P*C, D]
    patch_bias: np.ndarray            # [D]
    pos_embed: np.ndarray             # [N, D]
    layers: list[LayerWeights]
    cls_token: Optional[np.ndarray] = None      # [D] when use_cls
    head_weight: Optional[np.ndarray] = None    # [D, num_classes]
    head_bias: Optional[np.ndarray] = None      # [num_classes]

    def named(self) -> dict[str, np.ndarray]:
        """Flat name -> tensor mapping under the ``weights/`` prefix."""
        out = {
            "weights/patch_weight": self.patch_weight,
            "weights/patch_bias": self.patch_bias,
            "weights/pos_embed": self.pos_embed,
        }
        if self.cls_token is not None:
            out["weights/cls_token"] = self.cls_token
        for i, lw in enumerate(self.layers):
            for name in vars(lw):
                out[f"weights/layer{i}/{name}"] = getattr(lw, name)
        if self.head_weight is not None:
            out["weights/head_weight"] = self.head_weight
            out["weights/head_bias"] = self.head_bias
        return out

    @classmethod
    def from_named(cls, config: ModelConfig, tensors: dict[str, np.ndarray]) -> "Weights":
        layers = []
        for i in range(config.depth):
            prefix = f"weights/layer{i}/"
            fields = {name: tensors[prefix + name] for name in (
                "ln1_scale", "ln1_shift", "wq", "bq", "wk", "bk", "wv", "bv",
                "wo", "bo", "ln2_scale", "ln2_shift",
                "mlp_w1", "mlp_b1", "mlp_w2", "mlp_b2")}
            layers.append(LayerWeights(**fields))
        return cls(
            patch_weight=tensors["weights/patch_weight"],
            patch_bias=tensors["weights/patch_bias"],
            pos_embed=tensors["weights/pos_embed"],
            layers=layers,
            cls_token=tensors.get("weights/cls_token"),
            head_weight=tensors.get("weights/head_weight"),
            head_bias=tensors.get("weights/head_bias"),
        )


def _trunc_normal(rng: np.random.Generator, shape, std: float) -> np.ndarray:
    """Normal(0, std) truncated to +-2 std, by rejection; deterministic in rng."""
    out = rng.standard_normal(shape)
    bad = np.abs(out) > 2.0
    while np.any(bad):
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > 2.0
    return (out * std).astype(np.float32)


def random_weights(
    config: ModelConfig,
    seed: int,
    num_classes: Optional[int] = None,
    std: float = 0.02,
) -> Weights:
    """Deterministic truncated-normal initialization (layernorms at identity)."""
    rng = np.random.default_rng(seed)
    d, n = config.dim, config.num_tokens
    hid = int(round(config.mlp_ratio * d))
    patch_in = config.patch_size * config.patch_size * config.channels

    def t(*shape):
        return _trunc_normal(rng, shape, std)

    def ones(*shape):
        return np.ones(shape, dtype=np.float32)

    def zeros(*shape):
        return np.zeros(shape, dtype=np.float32)

    layers = [
        LayerWeights(
            ln1_scale=ones(d), ln1_shift=zeros(d),
            wq=t(d, d), bq=zeros(d), wk=t(d, d), bk=zeros(d),
            wv=t(d, d), bv=zeros(d), wo=t(d, d), bo=zeros(d),
            ln2_scale=ones(d), ln2_shift=zeros(d),
            mlp_w1=t(d, hid), mlp_b1=zeros(hid),
            mlp_w2=t(hid, d), mlp_b2=zeros(d),
        )
        for _ in range(config.depth)
    ]
    return Weights(
        patch_weight=t(patch_in, d),
        patch_bias=zeros(d),
        pos_embed=t(n, d),
        layers=layers,
        cls_token=t(d) if config.use_cls else None,
        head_weight=t(d, num_classes) if num_classes else None,
        head_bias=zeros(num_classes) if num_classes else None,
    )


def make_local_mask(
    grid_h: int,
    grid_w: int,
    restriction: AttentionRestriction,
    use_cls: bool = False,
) -> np.ndarray:
    """0/1 mask [N, N]: admit keys within Chebyshev radius (kernel-1)/2."""
    n_spatial = grid_h * grid_w
    if restriction.kernel is None:
        n = n_spatial + (1 if use_cls else 0)
        return np.ones((n, n), dtype=np.float32)
    if restriction.kernel % 2 == 0:
        raise InvalidKernel(f"kernel must be odd, got {restriction.kernel}")
    radius = (restriction.kernel - 1) // 2
    ys, xs = np.divmod(np.arange(n_spatial), grid_w)
    cheb = np.maximum(
        np.abs(ys[:, None] - ys[None, :]),
        np.abs(xs[:, None] - xs[None, :]),
    )
    spatial = (cheb <= radius).astype(np.float32)
    if not use_cls:
        return spatial
    n = n_spatial + 1
    mask = np.zeros((n, n), dtype=np.float32)
    mask[1:, 1:] = spatial
    if restriction.include_cls_always:
        mask[0, :] = 1.0
        mask[:, 0] = 1.0
    else:
        mask[0, 0] = 1.0
    return mask


def _layernorm(x: np.ndarray, scale: np.ndarray, shift: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + LN_EPS) * scale + shift


def gelu(x: np.ndarray) -> np.ndarray:
    """Exact erf-form GELU."""
    return (0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))).astype(x.dtype)


def _softmax_last(x: np.ndarray) -> np.ndarray:
    z = np.exp(x - x.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def patchify(image: np.ndarray, config: ModelConfig) -> np.ndarray:
    """[C, S, S] -> [grid*grid, P*P*C]; patch pixels flattened channel-major."""
    c, s, p, g = config.channels, config.image_size, config.patch_size, config.grid
    if image.shape != (c, s, s):
        raise ShapeError(f"image shape {image.shape} != {(c, s, s)}")
    patches = image.reshape(c, g, p, g, p).transpose(1, 3, 0, 2, 4)
    return np.ascontiguousarray(patches.reshape(g * g, c * p * p))


def forward(
    image: np.ndarray,
    weights: Weights,
    config: ModelConfig,
    restriction: Optional[AttentionRestriction] = None,
    collect_head_outputs: bool = True,
    collect_image: bool = False,
    force_uniform_from: Optional[int] = None,
) -> ActivationBundle:
    """Run the ViT and record attention probabilities plus representations.

    ``force_uniform_from=k`` replaces the attention probabilities of layers
    >= k with the uniform distribution (collapse surrogate for diagnostics).
    """
    image = np.asarray(image, dtype=np.float32)
    if not np.all(np.isfinite(image)):
        raise NumericalError("image contains non-finite pixels")
    n, d, h = config.num_tokens, config.dim, config.heads
    dh = config.head_dim
    tokens = patchify(image, config) @ weights.patch_weight + weights.patch_bias
    if config.use_cls:
        if weights.cls_token is None:
            raise InvalidBundle("config.use_cls requires a cls_token weight")
        tokens = np.concatenate([weights.cls_token[None, :], tokens], axis=0)
    if weights.pos_embed.shape != (n, d):
        raise ShapeError(f"pos_embed shape {weights.pos_embed.shape} != {(n, d)}")
    x = (tokens + weights.pos_embed).astype(np.float32)

    mask_bias = None
    if restriction is not None and restriction.kernel is not None:
        mask = make_local_mask(config.grid, config.grid, restriction, config.use_cls)
        mask_bias = (1.0 - mask) * MASK_NEG

    attention: list[np.ndarray] = []
    reps: list[np.ndarray] = [x.copy()]
    extras: dict[str, np.ndarray] = {}
    if collect_image:
        extras["image"] = image

    for li, lw in enumerate(weights.layers):
        hnorm = _layernorm(x, lw.ln1_scale, lw.ln1_shift)
        q = (hnorm @ lw.wq + lw.bq).reshape(n, h, dh).transpose(1, 0, 2)
        k = (hnorm @ lw.wk + lw.bk).reshape(n, h, dh).transpose(1, 0, 2)
        v = (hnorm @ lw.wv + lw.bv).reshape(n, h, dh).transpose(1, 0, 2)
        scores = (q @ k.transpose(0, 2, 1) / np.sqrt(np.float32(dh))).astype(np.float32)
        if mask_bias is not None:
            scores = scores + mask_bias
        attn = _softmax_last(scores).astype(np.float32)
        if force_uniform_from is not None and li >= force_uniform_from:
            attn = np.full_like(attn, 1.0 / n)
        attention.append(attn)
        head_out = attn @ v                                   # [H, N, Dh]
        if collect_head_outputs:
            extras[f"head_out/{li}"] = head_out.astype(np.float32)
        merged = head_out.transpose(1, 0, 2).reshape(n, d)
        x = x + merged @ lw.wo + lw.bo
        hnorm2 = _layernorm(x, lw.ln2_scale, lw.ln2_shift)
        x = x + gelu(hnorm2 @ lw.mlp_w1 + lw.mlp_b1) @ lw.mlp_w2 + lw.mlp_b2
        x = x.astype(np.float32)
        if not np.all(np.isfinite(x)):
            raise NumericalError(f"non-finite representations after block {li}")
        reps.append(x.copy())

    return ActivationBundle(config, attention, reps, extras)


def classify(
    bundle_reprs: np.ndarray,
    weights: Weights,
) -> np.ndarray:
    """Logits from mean-pooled final representations via the classifier head."""
    if weights.head_weight is None:
        raise InvalidBundle("weights carry no classifier head")
    pooled = bundle_reprs.mean(axis=0)
    return pooled @ weights.head_weight + weights.head_bias
