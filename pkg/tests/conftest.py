import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from seedmap.fmindex import build_index  # noqa: E402
from seedmap.refseq import ReferenceSequence, encode  # noqa: E402
from seedmap.synth import random_reference, simulate_reads  # noqa: E402


@pytest.fixture(scope="session")
def small_ref():
    return random_reference(20_000, n_records=2, seed=11)


@pytest.fixture(scope="session")
def small_index(small_ref):
    return build_index(small_ref)


@pytest.fixture(scope="session")
def mapped_dataset(small_ref):
    reads, truth = simulate_reads(small_ref, 600, length=120, seed=12, sub_rate=0.01,
                                  indel_rate=0.002)
    return reads, truth


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_ref(text: str, name: str = "t") -> ReferenceSequence:
    return ReferenceSequence(name, encode(text))
