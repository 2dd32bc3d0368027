#!/usr/bin/env python3
"""
Performance tests for the training and evaluation paths

Covers the experiment-scale register sizes:
- 10-qubit state-vector training on 100-dimensional data
- H_S construction at 10 qubits
- 5+1 qubit density-matrix noisy steps
- thread-pool evaluation
"""

import time

import numpy as np
import psutil
import pytest

from qal.datasets import gen_synthetic
from qal.encoding import ClassicalEncoder, ClassicalEncoderConfig, LabelScheme
from qal.evaluation import failure_probabilities
from qal.hamiltonians import average_hamiltonian
from qal.noise import NoiseModel, train_noisy
from qal.quantum import PureState
from qal.trainer import TrainConfig, train

pytestmark = pytest.mark.performance


@pytest.fixture(scope="module")
def ten_qubit_problem():
    data = gen_synthetic(60, 100, np.random.default_rng(0))
    encoder = ClassicalEncoder(ClassicalEncoderConfig(n_qubits=10, data_dim=100))
    return data, encoder, LabelScheme(2, 10)


@pytest.mark.timeout(60)
class TestTrainingPerformance:
    def test_exact_steps_at_ten_qubits(self, ten_qubit_problem):
        data, encoder, scheme = ten_qubit_problem
        start = time.perf_counter()
        trace = train(data, encoder, scheme, TrainConfig(eta=0.1, steps=100, seed=0))
        elapsed = time.perf_counter() - start
        assert len(trace.records) == 100
        assert elapsed < 30.0, f"100 steps took {elapsed:.1f}s"

    def test_average_hamiltonian_memory(self, ten_qubit_problem):
        data, encoder, scheme = ten_qubit_problem
        process = psutil.Process()
        before = process.memory_info().rss / 1024 / 1024
        h_s = average_hamiltonian(data, encoder, scheme)
        after = process.memory_info().rss / 1024 / 1024
        assert h_s.dim == 1024
        # a 1024x1024 complex matrix is 16 MB; allow a few working copies
        assert after - before < 200, f"memory grew by {after - before:.1f}MB"

    def test_noisy_steps_at_five_plus_one_qubits(self):
        data = gen_synthetic(20, 25, np.random.default_rng(1))
        encoder = ClassicalEncoder(ClassicalEncoderConfig(n_qubits=5, data_dim=25))
        start = time.perf_counter()
        trace = train_noisy(data, encoder, LabelScheme(2, 5), 0.2, 5, NoiseModel(0.005),
                            np.random.default_rng(0))
        elapsed = time.perf_counter() - start
        assert len(trace.records) == 5
        assert elapsed < 30.0, f"5 noisy steps took {elapsed:.1f}s"

    def test_threaded_evaluation_matches_serial(self, ten_qubit_problem):
        data, encoder, scheme = ten_qubit_problem
        psi = PureState.haar_random(10, np.random.default_rng(3))
        serial = failure_probabilities(psi, data, encoder, scheme, threads=1)
        threaded = failure_probabilities(psi, data, encoder, scheme, threads=4)
        assert np.array_equal(serial, threaded)
