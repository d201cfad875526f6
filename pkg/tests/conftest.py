import numpy as np
import pytest

from gazepath.model import Model, ModelConfig


def grad_config(**kw):
    """Smallest config used for gradient checks (d=16, one layer each, L=3)."""
    base = dict(d=16, n_enc=1, n_dec=1, heads=2, L=3, h=2, w=4, C=8, d_text=8)
    base.update(kw)
    return ModelConfig(**base)


@pytest.fixture
def tiny_cfg():
    return ModelConfig.tiny()


@pytest.fixture
def tiny_model(tiny_cfg):
    return Model.create(tiny_cfg, seed=0, dtype=np.float64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
