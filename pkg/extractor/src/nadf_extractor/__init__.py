"""Checkpoint-to-NADF activation extractor."""

__version__ = "0.1.0"

from .errors import CheckpointError, ExtractorError, HookError, RecipeError
from .extract import Extractor, preprocess
from .model import ToyViT, build_model
from .nmi import attention_nmi
from .recipe import ExtractionRecipe, builtin_recipe, load_recipe
from .writer import serialize, tensor_checksums, write_bundle

__all__ = [
    "CheckpointError", "ExtractionRecipe", "Extractor", "ExtractorError",
    "HookError", "RecipeError", "ToyViT", "attention_nmi", "build_model",
    "builtin_recipe", "load_recipe", "preprocess", "serialize",
    "tensor_checksums", "write_bundle", "__version__",
]
