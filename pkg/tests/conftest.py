import logging

import numpy as np
import pytest

from qal.datasets import gen_synthetic, split
from qal.encoding import ClassicalEncoder, ClassicalEncoderConfig, LabelScheme


def pytest_configure(config):
    """Configure pytest with custom markers."""
    config.addinivalue_line("markers", "integration: mark test as integration test")
    config.addinivalue_line("markers", "performance: mark test as performance test")
    config.addinivalue_line("markers", "slow: long-running experiment check")


@pytest.fixture(autouse=True)
def setup_logging():
    """Setup logging for tests."""
    logging.basicConfig(level=logging.DEBUG)


@pytest.fixture
def rng():
    """Fresh seeded generator per test."""
    return np.random.default_rng(1234)


@pytest.fixture
def toy_problem():
    """3-qubit classical encoder, binary label scheme and a small synthetic split."""
    data = gen_synthetic(24, 8, np.random.default_rng(7))
    train_set, test_set = split(data, test_size=8, seed=0)
    encoder = ClassicalEncoder(ClassicalEncoderConfig(n_qubits=3, data_dim=8))
    scheme = LabelScheme(2, 3)
    return {"train": train_set, "test": test_set, "encoder": encoder, "scheme": scheme}


@pytest.fixture
def idx_root(tmp_path, monkeypatch):
    """Tiny MNIST-style IDX tree under QAL_DATA_DIR (see sample_data.py)."""
    from sample_data import write_idx_tree

    write_idx_tree(tmp_path)
    monkeypatch.setenv("QAL_DATA_DIR", str(tmp_path))
    return tmp_path
