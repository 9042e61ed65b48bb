import numpy as np
import pytest

from irdrop.datagen import GenConfig, generate_dataset
from irdrop.unet import UNetParams, save_checkpoint


@pytest.fixture(scope="session")
def small_dataset_dir(tmp_path_factory):
    """Six full-size samples, enough for pipeline and CLI tests."""
    out = tmp_path_factory.mktemp("data")
    generate_dataset(GenConfig(seed=123, n_samples=6), out)
    return out


@pytest.fixture(scope="session")
def tiny_dataset_dir(tmp_path_factory):
    """Twelve 16x16 samples for fast training tests."""
    out = tmp_path_factory.mktemp("tiny")
    generate_dataset(GenConfig(seed=5, n_samples=12, height=16, width=16), out)
    return out


@pytest.fixture(scope="session")
def random_params():
    return UNetParams.init(np.random.default_rng(99))


@pytest.fixture(scope="session")
def checkpoint_dir(tmp_path_factory, random_params):
    out = tmp_path_factory.mktemp("ckpt")
    save_checkpoint(random_params, out, metadata={"origin": "test fixture"})
    return out
