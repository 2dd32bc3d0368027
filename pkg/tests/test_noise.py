"""
Tests for noise.py: channels and noisy training.
"""

import numpy as np
import pytest

from qal.evaluation import evaluate
from qal.noise import (
    Convention,
    NoiseError,
    NoiseModel,
    depolarize,
    noisy_gate,
    noisy_train_step,
    pauli_strings,
    train_noisy,
)
from qal.quantum import DensityState, Gate, PureState, random_density
from qal.trainer import train_step_exact


class TestNoiseModel:
    def test_default_single_qubit_rate(self):
        model = NoiseModel(0.01)
        assert model.p1 == pytest.approx(0.001)
        assert model.rate_for(1) == pytest.approx(0.001)
        assert model.rate_for(2) == pytest.approx(0.01)
        assert model.convention is Convention.PAULI

    def test_noiseless(self):
        assert NoiseModel(0.0).noiseless
        assert not NoiseModel(0.0, p1=0.01).noiseless

    def test_validation(self):
        with pytest.raises(NoiseError):
            NoiseModel(1.5)
        with pytest.raises(NoiseError):
            NoiseModel(0.1, p1=-0.1)
        with pytest.raises(NoiseError):
            NoiseModel(0.1, convention="amplitude")
        assert NoiseModel(0.1, convention="replace").convention is Convention.REPLACE


class TestChannels:
    def test_pauli_string_count(self):
        assert len(pauli_strings(1)) == 3
        assert len(pauli_strings(2)) == 15

    @pytest.mark.parametrize("convention", ["pauli", "replace"])
    @pytest.mark.parametrize("qubits", [[0], [1, 2], [2, 0]])
    def test_trace_and_hermiticity(self, rng, convention, qubits):
        rho = random_density(3, rng)
        out = depolarize(rho, qubits, 0.3, convention)
        assert out.trace == pytest.approx(1.0)
        assert out.is_valid()

    def test_zero_rate_is_identity(self, rng):
        rho = random_density(2, rng)
        assert np.allclose(depolarize(rho, [0, 1], 0.0).matrix, rho.matrix)

    def test_pauli_full_depolarization(self):
        rho = PureState.zero(1).to_density()
        out = depolarize(rho, [0], 0.75, "pauli")
        assert np.allclose(out.matrix, np.eye(2) / 2)
        out2 = depolarize(PureState.zero(2).to_density(), [0, 1], 15 / 16, "pauli")
        assert np.allclose(out2.matrix, np.eye(4) / 4)

    def test_replace_full_depolarization_keeps_the_rest(self, rng):
        sys = PureState.haar_random(1, rng)
        rho = PureState.basis(1, 1).kron(sys).to_density()
        out = depolarize(rho, [0], 1.0, "replace")
        expected = np.kron(np.eye(2) / 2, sys.to_density().matrix)
        assert np.allclose(out.matrix, expected)

    def test_conventions_relate_by_rescaling(self, rng):
        # replace at p equals pauli at p (4^m - 1) / 4^m
        rho = random_density(2, rng)
        a = depolarize(rho, [1], 0.4, "replace")
        b = depolarize(rho, [1], 0.4 * 3 / 4, "pauli")
        assert np.allclose(a.matrix, b.matrix)

    def test_bad_targets(self, rng):
        rho = random_density(2, rng)
        with pytest.raises(NoiseError):
            depolarize(rho, [0, 0], 0.1)
        with pytest.raises(NoiseError):
            depolarize(rho, [3], 0.1)
        with pytest.raises(NoiseError):
            depolarize(rho, [0, 1, 0], 0.1)

    def test_noisy_gate_pure_input_loses_purity(self):
        rho = PureState.zero(2).to_density()
        out = noisy_gate(rho, Gate.cnot(0, 1), NoiseModel(0.2))
        purity = np.trace(out.matrix @ out.matrix).real
        assert purity < 1.0
        assert out.trace == pytest.approx(1.0)

    def test_dense_gate_gets_pairwise_layer(self):
        rho = PureState.zero(3).to_density()
        gate = Gate.dense(np.eye(8), [0, 1, 2])
        out = noisy_gate(rho, gate, NoiseModel(0.1))
        # the wire pair (0, 1) and the lone wire 2 are each depolarized
        diag = np.diag(out.matrix).real
        assert diag[0] < 1.0
        assert diag[1] > 0.0
        assert diag[2] > 0.0


class TestNoisyTraining:
    def test_noiseless_step_matches_exact(self, toy_problem, rng):
        enc, scheme = toy_problem["encoder"], toy_problem["scheme"]
        psi = PureState.haar_random(3, rng)
        sample = toy_problem["train"][2]
        exact = train_step_exact(psi, sample, enc, scheme, 0.3)
        noisy = noisy_train_step(psi.to_density(), sample, enc, scheme, 0.3, NoiseModel(0.0))
        assert noisy.success_prob == pytest.approx(exact.success_prob)
        assert np.allclose(noisy.state.normalized().matrix, exact.state.to_density().matrix)

    def test_noise_keeps_valid_state(self, toy_problem, rng):
        enc, scheme = toy_problem["encoder"], toy_problem["scheme"]
        rho = random_density(3, rng)
        step = noisy_train_step(rho, toy_problem["train"][0], enc, scheme, 0.2, NoiseModel(0.05))
        assert 0.0 < step.success_prob <= 1.0
        assert step.state.trace == pytest.approx(step.success_prob)
        assert step.state.normalized().is_valid()

    def test_size_mismatch(self, toy_problem):
        with pytest.raises(NoiseError):
            noisy_train_step(
                DensityState.maximally_mixed(2), toy_problem["train"][0],
                toy_problem["encoder"], toy_problem["scheme"], 0.1, NoiseModel(0.0),
            )

    def test_train_noisy(self, toy_problem):
        seen = []
        trace = train_noisy(
            toy_problem["train"], toy_problem["encoder"], toy_problem["scheme"], 0.1, 5,
            NoiseModel(0.01), np.random.default_rng(0),
            on_step=lambda rec, rho: seen.append((rec.step, rho.trace)),
        )
        assert [s for s, _ in seen] == [1, 2, 3, 4, 5]
        assert all(t == pytest.approx(1.0) for _, t in seen)
        assert trace.acceptance == pytest.approx(np.prod([r.success_prob for r in trace.records]))
        assert trace.final_state.is_valid()

    def test_train_noisy_validation(self, toy_problem):
        args = (toy_problem["encoder"], toy_problem["scheme"], 0.1)
        with pytest.raises(NoiseError):
            train_noisy([], *args, 3, NoiseModel(0.0), np.random.default_rng(0))
        with pytest.raises(NoiseError):
            train_noisy(toy_problem["train"], *args, -1, NoiseModel(0.0), np.random.default_rng(0))

    def test_full_noise_forgets_labels(self, toy_problem):
        enc, scheme = toy_problem["encoder"], toy_problem["scheme"]
        trace = train_noisy(
            toy_problem["train"], enc, scheme, 0.1, 3, NoiseModel(1.0), np.random.default_rng(0)
        )
        report = evaluate(trace.final_state, toy_problem["train"], toy_problem["test"], enc, scheme)
        assert report.accuracy == pytest.approx(1 / scheme.k_classes, abs=0.05)
        assert report.train_accuracy == pytest.approx(1 / scheme.k_classes, abs=0.05)
