"""Representation diagnostics: cosine similarities and singular-value spectra.

The SVD is a one-sided Jacobi with round-robin pair ordering: each sweep
rotates disjoint column pairs simultaneously until all column dot products
vanish relative to the Frobenius norm.  Desk-scale matrices (at most a few
hundred per side) converge in a handful of sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal, Optional

import numpy as np

from .errors import (
    DegenerateSpectrum,
    NotEnoughHeads,
    NotEnoughImages,
    NotEnoughTokens,
    NumericalError,
    ShapeError,
)

_SIGMA_FLOOR = 1e-12


@dataclass
class SpectrumResult:
    singular_values: np.ndarray  # descending, >= 0
    reference_index: int
    delta_log: np.ndarray        # ln sigma_i - ln sigma_ref
    level: Literal["token", "image"]
    layer: int = -1


def _cosine_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise cosine; zero vectors contribute similarity 0."""
    na = np.linalg.norm(a, axis=-1)
    nb = np.linalg.norm(b, axis=-1)
    dot = np.sum(a * b, axis=-1)
    denom = na * nb
    return np.where(denom > 0, dot / np.where(denom > 0, denom, 1.0), 0.0)


def cosine_similarity_heads(head_outputs: np.ndarray) -> float:
    """Mean cosine over unordered head pairs and tokens of [H, N, Dh]."""
    z = np.asarray(head_outputs, dtype=np.float64)
    if z.ndim != 3:
        raise ShapeError(f"expected [H, N, Dh], got {z.shape}")
    h = z.shape[0]
    if h < 2:
        raise NotEnoughHeads("need at least 2 heads")
    sims = [
        _cosine_rows(z[i], z[j]).mean()
        for i in range(h)
        for j in range(i + 1, h)
    ]
    return float(np.mean(sims))


def cosine_similarity_depth(before: np.ndarray, after: np.ndarray) -> float:
    """Mean per-token cosine between two [N, D] representation stacks."""
    before = np.asarray(before, dtype=np.float64)
    after = np.asarray(after, dtype=np.float64)
    if before.shape != after.shape:
        raise ShapeError(f"shape mismatch {before.shape} vs {after.shape}")
    return float(_cosine_rows(before, after).mean())


def cosine_similarity_tokens(reprs: np.ndarray, exclude_cls: bool = False) -> float:
    """Mean cosine over all unordered token pairs of [N, D]."""
    z = np.asarray(reprs, dtype=np.float64)
    if exclude_cls:
        z = z[1:]
    n = z.shape[0]
    if n < 2:
        raise NotEnoughTokens("need at least 2 tokens")
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    unit = np.where(norms > 0, z / np.where(norms > 0, norms, 1.0), 0.0)
    gram = unit @ unit.T
    iu = np.triu_indices(n, k=1)
    return float(gram[iu].mean())


def _round_robin_rounds(n: int) -> list[list[tuple[int, int]]]:
    """Circle-method tournament schedule: n-1 rounds of disjoint pairs."""
    cols = list(range(n)) + ([None] if n % 2 else [])
    m = len(cols)
    rounds = []
    order = cols[:]
    for _ in range(m - 1):
        pairs = [
            (order[i], order[m - 1 - i])
            for i in range(m // 2)
            if order[i] is not None and order[m - 1 - i] is not None
        ]
        rounds.append([(min(p), max(p)) for p in pairs])
        order = [order[0]] + [order[-1]] + order[1:-1]
    return rounds


def jacobi_svd(
    matrix: np.ndarray,
    compute_uv: bool = False,
    tol: float = 1e-12,
    max_sweeps: int = 100,
):
    """One-sided Jacobi SVD.

    Returns descending singular values, or ``(U, s, Vt)`` when
    ``compute_uv``.  Columns with zero norm yield zero U columns, which
    preserves the reconstruction identity U @ diag(s) @ Vt == A.
    """
    a = np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"expected a matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericalError("matrix contains non-finite entries")
    transposed = a.shape[0] < a.shape[1]
    m_work = a.T.copy() if transposed else a.copy()
    n = m_work.shape[1]
    v = np.eye(n)
    fro2 = float(np.sum(m_work * m_work))
    if fro2 == 0.0 or n == 1:
        s = np.linalg.norm(m_work, axis=0)
    else:
        rounds = _round_robin_rounds(n)
        thresh = tol * fro2
        for _ in range(max_sweeps):
            off = 0.0
            for pairs in rounds:
                ii = np.fromiter((p[0] for p in pairs), dtype=np.intp)
                jj = np.fromiter((p[1] for p in pairs), dtype=np.intp)
                mi = m_work[:, ii]
                mj = m_work[:, jj]
                dij = np.sum(mi * mj, axis=0)
                dii = np.sum(mi * mi, axis=0)
                djj = np.sum(mj * mj, axis=0)
                off = max(off, float(np.max(np.abs(dij))))
                theta = 0.5 * np.arctan2(-2.0 * dij, dii - djj)
                c = np.cos(theta)
                s_ = np.sin(theta)
                m_work[:, ii] = mi * c - mj * s_
                m_work[:, jj] = mi * s_ + mj * c
                vi = v[:, ii]
                vj = v[:, jj]
                v[:, ii] = vi * c - vj * s_
                v[:, jj] = vi * s_ + vj * c
            if off <= thresh:
                break
        s = np.linalg.norm(m_work, axis=0)
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    if not compute_uv:
        return s_sorted
    u = np.where(s[order] > 0, 1.0, 0.0)  # guard for zero columns
    u_mat = m_work[:, order] / np.where(s_sorted > 0, s_sorted, 1.0)
    u_mat = u_mat * u
    vt = v[:, order].T
    if transposed:
        return vt.T, s_sorted, u_mat.T
    return u_mat, s_sorted, vt


def svd_values(matrix: np.ndarray) -> np.ndarray:
    return jacobi_svd(matrix, compute_uv=False)


def _delta_log(
    sigma: np.ndarray,
    reference: Literal["largest", "second_largest"],
) -> tuple[int, np.ndarray]:
    ref_idx = 0 if reference == "largest" else min(1, len(sigma) - 1)
    if sigma[ref_idx] <= _SIGMA_FLOOR:
        raise DegenerateSpectrum(f"reference singular value {sigma[ref_idx]} below floor")
    logs = np.log(np.maximum(sigma, _SIGMA_FLOOR))
    return ref_idx, logs - logs[ref_idx]


def token_spectrum(
    reprs: np.ndarray,
    exclude_cls: bool = False,
    reference: Literal["largest", "second_largest"] = "second_largest",
    center: bool = True,
    layer: int = -1,
) -> SpectrumResult:
    """Singular-value spectrum of the (mean-centered) token stack [N, D]."""
    z = np.asarray(reprs, dtype=np.float64)
    if exclude_cls:
        z = z[1:]
    if z.shape[0] < 2:
        raise NotEnoughTokens("need at least 2 tokens")
    if center:
        z = z - z.mean(axis=0, keepdims=True)
    sigma = svd_values(z)
    ref_idx, dlog = _delta_log(sigma, reference)
    return SpectrumResult(sigma, ref_idx, dlog, "token", layer)


def image_spectrum(
    reprs_stream: Iterable[np.ndarray],
    reference: Literal["largest", "second_largest"] = "second_largest",
    center: bool = True,
    layer: int = -1,
) -> SpectrumResult:
    """Spectrum over mean-pooled image vectors from a stream of [N, D] stacks."""
    pooled = [np.asarray(r, dtype=np.float64).mean(axis=0) for r in reprs_stream]
    if len(pooled) < 2:
        raise NotEnoughImages("need at least 2 images")
    stack = np.stack(pooled)
    if center:
        stack = stack - stack.mean(axis=0, keepdims=True)
    sigma = svd_values(stack)
    ref_idx, dlog = _delta_log(sigma, reference)
    return SpectrumResult(sigma, ref_idx, dlog, "image", layer)


def aggregate_log_sigma(
    spectra: list[np.ndarray],
    reference: Literal["largest", "second_largest"] = "second_largest",
) -> tuple[int, np.ndarray, np.ndarray]:
    """Dataset aggregation: mean of ln(sigma) across images, then difference.

    Returns ``(reference_index, mean_log_sigma, delta_log)``.  All spectra
    must have equal length; the mean-of-sigma alternative is a one-liner on
    the caller side and both are exported by the CLI.
    """
    logs = np.stack([np.log(np.maximum(s, _SIGMA_FLOOR)) for s in spectra])
    mean_log = logs.mean(axis=0)
    ref_idx = 0 if reference == "largest" else min(1, mean_log.shape[0] - 1)
    return ref_idx, mean_log, mean_log - mean_log[ref_idx]
