"""Extraction recipes: which checkpoint, which hook points, what preprocessing.

A recipe is a JSON document::

    {
      "checkpoint": "builtin:toy",
      "config": {"depth": 2, "heads": 2, "dim": 8,
                 "patch_size": 4, "image_size": 8},
      "use_cls": false,
      "preprocessing": {"resize": 8, "crop": 8,
                        "mean": [0.5, 0.5, 0.5], "std": [0.5, 0.5, 0.5]},
      "mapping": {"embed": "repr/0",
                  "blocks.0.attn.softmax": "attention/0",
                  "blocks.0": "repr/1",
                  "blocks.1.attn.softmax": "attention/1",
                  "blocks.1": "repr/2"}
    }

``mapping`` sends module paths (hook points) to bundle tensor names and must
cover exactly L attention tensors and L+1 representation tensors for the
declared depth.  Hook-point naming is data, not code, precisely because
checkpoint releases disagree about where the interesting tensors live.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import RecipeError

_DEFAULT_CONFIG = {
    "depth": 2, "heads": 2, "dim": 8, "patch_size": 4, "image_size": 8,
    "mlp_ratio": 4.0, "use_cls": False, "channels": 3,
}


@dataclass(frozen=True)
class ExtractionRecipe:
    checkpoint: str
    config: dict
    preprocessing: dict
    mapping: dict[str, str]          # module path -> bundle tensor name
    projection_head: str | None = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        depth = self.config["depth"]
        targets = list(self.mapping.values())
        if len(set(targets)) != len(targets):
            raise RecipeError("mapping assigns the same tensor name twice")
        want_attn = {f"attention/{i}" for i in range(depth)}
        want_repr = {f"repr/{i}" for i in range(depth + 1)}
        have = set(targets)
        missing = (want_attn | want_repr) - have
        if missing:
            raise RecipeError(f"mapping is missing tensors: {sorted(missing)}")
        stray = have - want_attn - want_repr
        if stray:
            raise RecipeError(f"mapping names unknown tensors: {sorted(stray)}")


def load_recipe(path) -> ExtractionRecipe:
    try:
        doc = json.loads(open(path).read())
    except ValueError as exc:
        raise RecipeError(f"recipe is not valid JSON: {exc}")
    if "checkpoint" not in doc or "mapping" not in doc:
        raise RecipeError("recipe needs at least 'checkpoint' and 'mapping'")
    config = dict(_DEFAULT_CONFIG)
    config.update(doc.get("config", {}))
    if doc.get("use_cls"):
        raise RecipeError("CLS-token checkpoints are not supported by the "
                          "built-in architecture")
    pre = doc.get("preprocessing", {})
    pre.setdefault("resize", config["image_size"])
    pre.setdefault("crop", config["image_size"])
    pre.setdefault("mean", [0.5] * config["channels"])
    pre.setdefault("std", [0.5] * config["channels"])
    return ExtractionRecipe(
        checkpoint=doc["checkpoint"],
        config=config,
        preprocessing=pre,
        mapping=dict(doc["mapping"]),
        projection_head=doc.get("projection_head"),
    )


def builtin_recipe(seed: int = 0) -> ExtractionRecipe:
    """The ready-made recipe for the built-in 2-layer toy model."""
    config = dict(_DEFAULT_CONFIG)
    mapping = {"embed": "repr/0"}
    for i in range(config["depth"]):
        mapping[f"blocks.{i}.attn.softmax"] = f"attention/{i}"
        mapping[f"blocks.{i}"] = f"repr/{i + 1}"
    return ExtractionRecipe(
        checkpoint=f"builtin:toy:{seed}",
        config=config,
        preprocessing={
            "resize": config["image_size"], "crop": config["image_size"],
            "mean": [0.5] * 3, "std": [0.5] * 3,
        },
        mapping=mapping,
    )
