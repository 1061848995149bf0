"""Exception hierarchy shared by every subsystem."""


class VitLensError(Exception):
    """Base class for all toolkit errors."""


# ---- container / format ----

class NonFiniteData(VitLensError):
    """A tensor destined for a bundle contains NaN or Inf."""


class InvalidBundle(VitLensError):
    """Bundle contents violate the activation-bundle contract."""


class NotABundle(VitLensError):
    """Byte stream does not start with the NADF magic."""


class Truncated(VitLensError):
    """Byte stream ended before the declared payload did."""


# ---- runtime ----

class ShapeError(VitLensError):
    """Tensor shape inconsistent with the declared configuration."""


class NumericalError(VitLensError):
    """A computation produced non-finite intermediates."""


class InvalidKernel(VitLensError):
    """Attention-restriction kernel must be odd (or unlimited)."""


# ---- metrics ----

class InvalidAttention(VitLensError):
    """Attention rows are not row-stochastic within tolerance."""


class NotEnoughHeads(VitLensError):
    pass


class NotEnoughTokens(VitLensError):
    pass


class NotEnoughImages(VitLensError):
    pass


class DegenerateSpectrum(VitLensError):
    """Reference singular value is (numerically) zero."""


# ---- spectral ----

class EmptyBand(VitLensError):
    """Frequency band admits no discrete coefficient."""


class NoClassifier(VitLensError):
    """Robustness curve requires a classifier head."""


# ---- objectives ----

class DegenerateEmbedding(VitLensError):
    """Zero-norm embedding cannot be l2-normalized."""


class EmptyMask(VitLensError):
    pass


class DegenerateRatio(VitLensError):
    """Mask ratio rounds to an empty or full mask."""


class InvalidLambda(VitLensError):
    pass


# ---- probe ----

class NoClsToken(VitLensError):
    pass


class DegenerateLabels(VitLensError):
    """Training labels contain a single class."""


# ---- cli / datasets ----

class MixedBundles(VitLensError):
    """Bundles in one dataset disagree on model configuration."""


class EmptyRun(VitLensError):
    """No inputs produced any output."""
