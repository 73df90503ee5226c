import numpy as np
import pytest

from freqsub.config import Config
from freqsub.data_io import SynthSpec, generate_synthetic
from freqsub.model import ModelParams


@pytest.fixture(scope="session")
def small_data():
    return generate_synthetic(SynthSpec(classes=12, per_class=10, channels=4, height=6, width=6,
                                        noise_scale=1.0, seed=5))


@pytest.fixture(scope="session")
def small_params():
    return ModelParams.init(4, 2, seed=1)


@pytest.fixture
def small_config():
    return Config(way=3, shot=2, query=4, episodes=10, reduction=2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
