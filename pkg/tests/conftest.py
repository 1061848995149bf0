import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ssl_vit_lens import ModelConfig, forward, random_weights


@pytest.fixture(scope="session")
def toy_config():
    return ModelConfig(depth=2, heads=2, dim=8, patch_size=4, image_size=8)


@pytest.fixture(scope="session")
def toy_weights(toy_config):
    return random_weights(toy_config, 7)


@pytest.fixture(scope="session")
def toy_image(toy_config):
    rng = np.random.default_rng(11)
    return rng.random(
        (toy_config.channels, toy_config.image_size, toy_config.image_size),
        dtype=np.float32)


@pytest.fixture(scope="session")
def toy_bundle(toy_image, toy_weights, toy_config):
    return forward(toy_image, toy_weights, toy_config)
