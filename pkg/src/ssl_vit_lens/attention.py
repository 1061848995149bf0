"""Self-attention diagnostics: attention distance and attention NMI.

Attention distance is the attention-weighted mean Euclidean distance (in
pixels) between query and key token positions, the transformer analog of a
receptive field.  Attention NMI treats each attention map as a joint
distribution p(q, k) = A[q, k] / N (queries uniform) and reports
I(q, k) / sqrt(H(q) H(k)) in natural log; 0 means the map ignores the query,
1 means a deterministic bijection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidAttention, ShapeError

ROW_TOL = 1e-4
_CLAMP = 1e-12


@dataclass
class AttentionStats:
    distance: np.ndarray   # [L, H] pixels
    nmi: np.ndarray        # [L, H]
    nmi_degenerate: np.ndarray  # [L, H] bool
    nmi_mean: np.ndarray   # [L]
    nmi_std: np.ndarray    # [L]


def _strip_cls(attn: np.ndarray, renormalize: bool) -> np.ndarray:
    out = attn[:, 1:, 1:]
    if renormalize:
        sums = out.sum(axis=-1, keepdims=True)
        out = np.where(sums > 0, out / np.maximum(sums, _CLAMP), 1.0 / out.shape[-1])
    return out


def attention_distance(
    attn: np.ndarray,
    grid_h: int,
    grid_w: int,
    patch_px: int,
    exclude_cls: bool = True,
) -> np.ndarray:
    """Per-head mean attention-weighted query-key distance, in pixels.

    ``attn`` is [H, N, N]; with ``exclude_cls`` the CLS row/column is dropped
    and rows are re-normalized (spatial distance is undefined for CLS).
    """
    attn = np.asarray(attn, dtype=np.float64)
    if attn.ndim != 3 or attn.shape[1] != attn.shape[2]:
        raise ShapeError(f"attention must be [H, N, N], got {attn.shape}")
    n = attn.shape[1]
    n_spatial = grid_h * grid_w
    if n == n_spatial + 1:
        if exclude_cls:
            attn = _strip_cls(attn, renormalize=True)
        else:
            raise ShapeError("CLS present; attention_distance requires exclude_cls")
    elif n != n_spatial:
        raise ShapeError(f"{n} tokens do not fit a {grid_h}x{grid_w} grid")
    ys, xs = np.divmod(np.arange(n_spatial), grid_w)
    dist = patch_px * np.hypot(ys[:, None] - ys[None, :], xs[:, None] - xs[None, :])
    return np.einsum("hqk,qk->h", attn, dist) / n_spatial


def attention_nmi(attn: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-head NMI of the attention joint distribution.

    Returns ``(nmi, degenerate)``; heads whose key marginal is a point mass
    (H(k) = 0) are reported as 0 with the degenerate flag set.
    """
    attn = np.asarray(attn, dtype=np.float64)
    if attn.ndim != 3 or attn.shape[1] != attn.shape[2]:
        raise ShapeError(f"attention must be [H, N, N], got {attn.shape}")
    n = attn.shape[1]
    if n < 2:
        raise ShapeError("NMI needs at least 2 tokens")
    sums = attn.sum(axis=-1)
    if np.max(np.abs(sums - 1.0)) > ROW_TOL:
        raise InvalidAttention("attention rows not stochastic within 1e-4")

    joint = attn / n                        # p(q, k), with p(q) = 1/N
    p_key = joint.sum(axis=1)               # [H, N]
    h_query = np.log(n)
    jc = np.where(joint > _CLAMP, joint, 1.0)
    pk_b = np.broadcast_to(np.maximum(p_key, _CLAMP)[:, None, :], joint.shape)
    mi = np.sum(
        np.where(joint > _CLAMP, joint * (np.log(jc) - np.log(pk_b) + h_query), 0.0),
        axis=(1, 2),
    )
    pkc = np.where(p_key > _CLAMP, p_key, 1.0)
    h_key = -np.sum(np.where(p_key > _CLAMP, p_key * np.log(pkc), 0.0), axis=1)

    degenerate = h_key <= _CLAMP
    denom = np.sqrt(h_query * np.where(degenerate, 1.0, h_key))
    nmi = np.where(degenerate, 0.0, mi / denom)
    return nmi, degenerate


def nmi_head_stats(nmi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-layer arithmetic mean and population std over heads of [L, H]."""
    nmi = np.asarray(nmi, dtype=np.float64)
    return nmi.mean(axis=-1), nmi.std(axis=-1)


def bundle_attention_stats(
    attention: list[np.ndarray],
    grid_h: int,
    grid_w: int,
    patch_px: int,
    nmi_exclude_cls: bool = False,
) -> AttentionStats:
    """All attention diagnostics for one bundle's attention stack."""
    dists, nmis, flags = [], [], []
    n_spatial = grid_h * grid_w
    for a in attention:
        dists.append(attention_distance(a, grid_h, grid_w, patch_px, exclude_cls=True))
        a_nmi = a
        if nmi_exclude_cls and a.shape[1] == n_spatial + 1:
            a_nmi = _strip_cls(np.asarray(a, dtype=np.float64), renormalize=True)
        v, f = attention_nmi(a_nmi)
        nmis.append(v)
        flags.append(f)
    nmi = np.stack(nmis)
    mean, std = nmi_head_stats(nmi)
    return AttentionStats(
        distance=np.stack(dists),
        nmi=nmi,
        nmi_degenerate=np.stack(flags),
        nmi_mean=mean,
        nmi_std=std,
    )
