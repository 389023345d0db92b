import numpy as np
import pytest

from tunneldetect.datagen import LABEL_NORMAL, LABEL_TUNNELING, DomainSample
from tunneldetect.network import Hyperparams, init_params

TINY_HP = Hyperparams(nf=6, ks=3, sl=1, d=8, l=12, hn=4)


@pytest.fixture
def tiny_hp():
    return TINY_HP


@pytest.fixture
def tiny_model(tiny_hp):
    return init_params(tiny_hp, seed=5)


def make_separable_corpus(n_per_class=100, seed=0):
    """Trivially separable toy set: runs of 'a' vs runs of 'z'."""
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(n_per_class):
        samples.append(DomainSample("a" * int(rng.integers(4, 11)), LABEL_NORMAL))
        samples.append(
            DomainSample("z" * int(rng.integers(4, 11)), LABEL_TUNNELING, "iodine")
        )
    return samples


@pytest.fixture
def separable_corpus():
    return make_separable_corpus()
