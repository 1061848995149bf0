"""Normalized mutual information of attention maps, computed in torch.

A deliberately separate implementation from the analysis toolkit's numpy
version, used to cross-check captures across the two components.
"""

from __future__ import annotations

import numpy as np
import torch

_EPS = 1e-12


def attention_nmi(attn: np.ndarray) -> np.ndarray:
    """Per-head NMI of [H, N, N] post-softmax attention, queries uniform."""
    a = torch.as_tensor(np.asarray(attn), dtype=torch.float64)
    n = a.shape[-1]
    joint = a / n
    p_key = joint.sum(dim=1)
    h_query = float(np.log(n))
    log_joint = torch.where(joint > _EPS, joint, torch.ones_like(joint)).log()
    log_pkey = p_key.clamp_min(_EPS).log()
    mi = torch.where(
        joint > _EPS,
        joint * (log_joint - log_pkey.unsqueeze(1) + h_query),
        torch.zeros_like(joint),
    ).sum(dim=(1, 2))
    h_key = -torch.where(
        p_key > _EPS, p_key * p_key.clamp_min(_EPS).log(),
        torch.zeros_like(p_key),
    ).sum(dim=1)
    nmi = torch.where(
        h_key > _EPS,
        mi / (h_query * h_key.clamp_min(_EPS)).sqrt(),
        torch.zeros_like(mi),
    )
    return nmi.numpy()
