"""Desk-scale diagnostics for self-supervised ViT representations."""

__version__ = "0.1.0"

from .bundle import (  # noqa: F401
    ActivationBundle,
    ModelConfig,
    read_bundle,
    read_bundle_file,
    write_bundle,
    write_bundle_file,
)
from .vit import (  # noqa: F401
    AttentionRestriction,
    Weights,
    forward,
    make_local_mask,
    random_weights,
)
from .attention import (  # noqa: F401
    AttentionStats,
    attention_distance,
    attention_nmi,
    bundle_attention_stats,
    nmi_head_stats,
)
from .representation import (  # noqa: F401
    SpectrumResult,
    cosine_similarity_depth,
    cosine_similarity_heads,
    cosine_similarity_tokens,
    image_spectrum,
    jacobi_svd,
    svd_values,
    token_spectrum,
)
from .spectral import (  # noqa: F401
    AmplitudeSpectrum,
    FrequencyBand,
    band_noise,
    dft2,
    idft2,
    relative_log_amplitude,
    robustness_curve,
    tile_bands,
)
from .objectives import (  # noqa: F401
    HybridConfig,
    hybrid_loss,
    infonce,
    mim_loss,
    random_mask,
)
from .probe import (  # noqa: F401
    ProbeConfig,
    ProbeModel,
    evaluate_probe,
    layerwise_probe,
    pool,
    train_probe,
)
