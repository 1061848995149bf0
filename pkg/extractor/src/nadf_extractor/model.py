"""A small pre-LN ViT used as the built-in extraction target.

The module names are stable (``embed``, ``blocks.{i}.attn.softmax``,
``blocks.{i}``) so recipes can address hook points by dotted path.  The
model runs in eval mode with float32 parameters; checkpoints with float16
tensors are upcast on load.
"""

from __future__ import annotations

import torch
from torch import nn

from .errors import CheckpointError


class Attention(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.heads = heads
        self.head_dim = dim // heads
        self.qkv = nn.Linear(dim, 3 * dim)
        self.softmax = nn.Softmax(dim=-1)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        n, d = x.shape
        qkv = self.qkv(x).reshape(n, 3, self.heads, self.head_dim)
        q, k, v = (qkv[:, i].transpose(0, 1) for i in range(3))  # [H, N, Dh]
        scores = q @ k.transpose(-2, -1) / self.head_dim ** 0.5
        probs = self.softmax(scores)                              # hook point
        out = (probs @ v).transpose(0, 1).reshape(n, d)
        return self.proj(out)


class Block(nn.Module):
    def __init__(self, dim: int, heads: int, mlp_ratio: float):
        super().__init__()
        hidden = int(dim * mlp_ratio)
        self.ln1 = nn.LayerNorm(dim, eps=1e-6)
        self.attn = Attention(dim, heads)
        self.ln2 = nn.LayerNorm(dim, eps=1e-6)
        self.mlp = nn.Sequential(
            nn.Linear(dim, hidden), nn.GELU(), nn.Linear(hidden, dim))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.ln1(x))
        return x + self.mlp(self.ln2(x))


class Embed(nn.Module):
    """Patchify + linear projection + learned position embedding."""

    def __init__(self, image_size: int, patch_size: int, channels: int, dim: int):
        super().__init__()
        self.patch_size = patch_size
        grid = image_size // patch_size
        self.proj = nn.Linear(channels * patch_size * patch_size, dim)
        self.pos = nn.Parameter(torch.zeros(grid * grid, dim))

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        c, h, w = image.shape
        p = self.patch_size
        patches = (
            image.reshape(c, h // p, p, w // p, p)
            .permute(1, 3, 0, 2, 4)
            .reshape((h // p) * (w // p), c * p * p)
        )
        return self.proj(patches) + self.pos


class ToyViT(nn.Module):
    def __init__(self, depth: int = 2, heads: int = 2, dim: int = 8,
                 patch_size: int = 4, image_size: int = 8,
                 mlp_ratio: float = 4.0, channels: int = 3):
        super().__init__()
        self.config = {
            "depth": depth, "heads": heads, "dim": dim,
            "patch_size": patch_size, "image_size": image_size,
            "mlp_ratio": mlp_ratio, "use_cls": False, "channels": channels,
        }
        self.embed = Embed(image_size, patch_size, channels, dim)
        self.blocks = nn.ModuleList(
            Block(dim, heads, mlp_ratio) for _ in range(depth))

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        x = self.embed(image)
        for block in self.blocks:
            x = block(x)
        return x


def build_model(checkpoint: str, config_overrides: dict | None = None) -> ToyViT:
    """Resolve a checkpoint identifier to an eval-mode model.

    ``builtin:toy`` or ``builtin:toy:<seed>`` constructs the built-in model
    with deterministically seeded weights; any other string is treated as a
    local path to a ``state_dict`` for the same architecture.
    """
    overrides = config_overrides or {}
    if checkpoint.startswith("builtin:toy"):
        parts = checkpoint.split(":")
        seed = int(parts[2]) if len(parts) > 2 else 0
        torch.manual_seed(seed)
        model = ToyViT(**overrides)
    else:
        model = ToyViT(**overrides)
        try:
            state = torch.load(checkpoint, map_location="cpu", weights_only=True)
        except (OSError, RuntimeError, ValueError) as exc:
            raise CheckpointError(f"cannot load checkpoint {checkpoint!r}: {exc}")
        state = {k: v.float() for k, v in state.items()}
        try:
            model.load_state_dict(state)
        except RuntimeError as exc:
            raise CheckpointError(f"state dict mismatch for {checkpoint!r}: {exc}")
    model.eval()
    model.float()
    return model
