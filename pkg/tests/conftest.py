import numpy as np
import pytest

from netmodal.netfile import parse_network_file
from netmodal.network import build_ynodal
from netmodal.modes import find_modes
from netmodal.statespace import random_rlc_network

SAMPLE_PATH = "src/netmodal/data/three_node.net"
CORPUS_SEED = 2024


@pytest.fixture(scope="session")
def three_node_doc():
    return parse_network_file(SAMPLE_PATH)


@pytest.fixture(scope="session")
def three_node_net(three_node_doc):
    return three_node_doc.network


@pytest.fixture(scope="session")
def three_node_model(three_node_net):
    """(network, nodal matrix, determinant, modes) for the shipped sample."""
    ynodal = build_ynodal(three_node_net)
    det = ynodal.det()
    modes = find_modes(ynodal, det=det)
    return three_node_net, ynodal, det, modes


@pytest.fixture(scope="session")
def small_corpus():
    """A couple dozen random passive networks for property checks."""
    rng = np.random.default_rng(CORPUS_SEED)
    return [random_rlc_network(rng) for _ in range(20)]
