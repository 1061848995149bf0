"""Hook-based activation capture and bundle assembly."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .errors import HookError, RecipeError
from .model import build_model
from .recipe import ExtractionRecipe
from .writer import tensor_checksums, write_bundle

_ROW_SUM_TOL = 1e-4
_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".ppm", ".pgm", ".tiff"}


def preprocess(path, spec: dict) -> torch.Tensor:
    """Decode an image file and apply the recipe's resize/crop/normalize."""
    img = Image.open(path).convert("RGB")
    img = img.resize((spec["resize"], spec["resize"]), Image.BILINEAR)
    crop = spec["crop"]
    left = (img.width - crop) // 2
    top = (img.height - crop) // 2
    img = img.crop((left, top, left + crop, top + crop))
    arr = np.asarray(img, dtype=np.float32).transpose(2, 0, 1) / 255.0
    mean = np.asarray(spec["mean"], dtype=np.float32)[:, None, None]
    std = np.asarray(spec["std"], dtype=np.float32)[:, None, None]
    return torch.from_numpy((arr - mean) / std)


class Extractor:
    """Runs a model with forward hooks at the recipe's module paths."""

    def __init__(self, recipe: ExtractionRecipe):
        self.recipe = recipe
        self.model = build_model(
            recipe.checkpoint,
            {k: recipe.config[k] for k in
             ("depth", "heads", "dim", "patch_size", "image_size",
              "mlp_ratio", "channels")})
        modules = dict(self.model.named_modules())
        self._captured: dict[str, torch.Tensor] = {}
        for path, tensor_name in recipe.mapping.items():
            if path not in modules:
                raise RecipeError(f"mapping names missing layer {path!r}")
            modules[path].register_forward_hook(self._make_hook(path, tensor_name))

    def _make_hook(self, path: str, tensor_name: str):
        def hook(_module, _inputs, output):
            self._captured[tensor_name] = output.detach()
        return hook

    def capture(self, image: torch.Tensor) -> dict[str, np.ndarray]:
        """One forward pass; returns the named bundle tensors as float32."""
        self._captured.clear()
        with torch.no_grad():
            self.model(image)
        tensors = {}
        for name, value in self._captured.items():
            arr = value.float().numpy()
            if name.startswith("attention/"):
                sums = arr.sum(axis=-1)
                if np.max(np.abs(sums - 1.0)) > _ROW_SUM_TOL:
                    source = next(p for p, t in self.recipe.mapping.items()
                                  if t == name)
                    raise HookError(
                        f"hook at {source!r} captured non-row-stochastic "
                        f"attention for {name!r}; is it placed after softmax?")
            tensors[name] = arr
        missing = set(self.recipe.mapping.values()) - set(tensors)
        if missing:
            raise HookError(f"hooks never fired for {sorted(missing)}")
        return tensors

    def extract_directory(self, images_dir, out_dir) -> list[Path]:
        """Process every decodable image; one bundle + checksum file each."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for path in sorted(Path(images_dir).iterdir()):
            if path.suffix.lower() not in _IMAGE_SUFFIXES:
                continue
            tensors = self.capture(preprocess(path, self.recipe.preprocessing))
            bundle_path = out_dir / f"{path.stem}.nad"
            write_bundle(bundle_path, self.recipe.config, tensors,
                         preprocessing=self.recipe.preprocessing)
            sums_path = out_dir / f"{path.stem}.checksums.json"
            import json
            sums_path.write_text(json.dumps(
                tensor_checksums(tensors), indent=2, sort_keys=True) + "\n")
            written.append(bundle_path)
        return written
