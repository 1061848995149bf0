"""Extractor error types."""


class ExtractorError(Exception):
    """Base class for extractor failures."""


class RecipeError(ExtractorError):
    """The extraction recipe is malformed or incomplete."""


class HookError(ExtractorError):
    """A forward hook captured something that violates its contract."""


class CheckpointError(ExtractorError):
    """The checkpoint could not be resolved or loaded."""
