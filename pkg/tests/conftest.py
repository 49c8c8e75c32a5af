import os
import sys

import numpy as np
import pytest

# Make the repository root importable the same way main.py does
ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from sbdc.benchmark import benchmark_graph  # noqa: E402
from sbdc.graph_core import build_graph  # noqa: E402
from sbdc.objective_coding import CodingAssignment, concave_decoder  # noqa: E402


@pytest.fixture
def bench():
    return benchmark_graph()


@pytest.fixture
def triangle():
    return build_graph(3, [(1, 2, 1.0), (1, 3, 1.0), (2, 3, 1.0)])


@pytest.fixture
def pair():
    return build_graph(2, [(1, 2, 1.0)])


@pytest.fixture
def coding_k1(bench):
    return CodingAssignment.uniform(bench, concave_decoder(6.0))


@pytest.fixture
def coding_k2(bench):
    return CodingAssignment.uniform(bench, concave_decoder(2.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def out_env(tmp_path, monkeypatch):
    """Point the output root at a temp dir through the environment."""
    monkeypatch.setenv("SBDC_OUT_DIR", str(tmp_path / "out"))
    return tmp_path / "out"
