import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from labelguard.synthetic import fixture_networks, make_rng, tiny_networks, two_layer_example  # noqa: E402

EXAMPLE_NET_TEXT = """\
# 2-2-1 example network, zero biases
2 2 2 1
2 1
1 2
0 0
-1 1
0
"""


@pytest.fixture
def rng():
    return make_rng()


@pytest.fixture
def example_net():
    return two_layer_example()


@pytest.fixture(scope="session")
def fixture_nets():
    return fixture_networks()


@pytest.fixture(scope="session")
def tiny_nets():
    return tiny_networks()


@pytest.fixture
def example_net_file(tmp_path):
    path = tmp_path / "example.net"
    path.write_text(EXAMPLE_NET_TEXT)
    return path


def sample_box(rng, lo, hi, n):
    return rng.uniform(np.asarray(lo), np.asarray(hi), size=(n, len(lo)))
