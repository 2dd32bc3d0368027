import math
import time

import numpy as np
import pytest

from qal.encoding import (
    ABSTAIN,
    ClassicalEncoder,
    ClassicalEncoderConfig,
    EncodingError,
    HamiltonianEncoder,
    LabelScheme,
    StateEncoder,
    build_perturbation,
    encode_classical,
    encode_hamiltonian,
    entangler_blocks,
    induced_hamiltonian,
    label_projector,
    lmr_channel_step,
    lmr_evolve,
    single_qubit_layer,
    suggest_qubits,
)
from qal.hamiltonians import ModelSpec, aubry_andre, random_k_local
from qal.quantum import (
    DensityState,
    GateKind,
    HermitianOp,
    PureState,
    matrix_exp_hermitian,
    random_density,
    random_hermitian,
    trace_norm,
)
from qal.runtime import parallel_map


class TestClassicalEncoding:
    def test_layer_and_entangler_counts(self):
        cfg = ClassicalEncoderConfig(n_qubits=10, data_dim=100)
        assert cfg.n_layers == 4
        assert cfg.padded_dim == 120
        assert cfg.padding == 20
        assert cfg.entangler_count == 8

    def test_entangler_block_a_has_n_minus_one_cnots(self):
        a, b = entangler_blocks(10)
        assert a.count(GateKind.CNOT) == 9
        assert b.count(GateKind.CZ) == 9
        controls = [g.targets[0] for g in a]
        assert controls == [0, 2, 4, 6, 8, 1, 3, 5, 7]

    def test_circuit_gate_counts(self):
        cfg = ClassicalEncoderConfig(n_qubits=10, data_dim=100)
        c = encode_classical(np.zeros(100), cfg)
        assert c.count(GateKind.ROT_Y) == 2 * 10 * 4
        assert c.count(GateKind.ROT_Z) == 10 * 4
        assert c.count(GateKind.CNOT) == 9 * 8
        assert c.count(GateKind.CZ) == 9 * 8

    def test_single_qubit_layer_order(self):
        layer = single_qubit_layer([0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
        on_q0 = [(g.kind, g.angle) for g in layer if g.targets == (0,)]
        assert on_q0 == [(GateKind.ROT_Y, 0.1), (GateKind.ROT_Z, 0.3), (GateKind.ROT_Y, 0.5)]
        with pytest.raises(EncodingError):
            single_qubit_layer([0.1, 0.2])

    def test_padding_is_zero_angles(self):
        cfg = ClassicalEncoderConfig(n_qubits=2, data_dim=4)
        c = encode_classical([0.1, 0.2, 0.3, 0.4], cfg)
        angles = [g.angle for g in c if g.kind in (GateKind.ROT_Y, GateKind.ROT_Z)]
        assert angles[-3:] == [0.2, 0.4, 0.0]

    def test_wrong_length_rejected(self):
        cfg = ClassicalEncoderConfig(n_qubits=3, data_dim=8)
        with pytest.raises(EncodingError):
            encode_classical(np.zeros(9), cfg)

    def test_config_validation(self):
        with pytest.raises(EncodingError):
            ClassicalEncoderConfig(n_qubits=1, data_dim=4)
        with pytest.raises(EncodingError):
            ClassicalEncoderConfig(n_qubits=3, data_dim=0)

    def test_suggest_qubits(self):
        assert suggest_qubits(100) == 7
        assert suggest_qubits(1) == 2
        assert suggest_qubits(1024) == 10
        with pytest.raises(EncodingError):
            suggest_qubits(0)

    def test_encoder_wraps_config(self):
        enc = ClassicalEncoder(ClassicalEncoderConfig(n_qubits=3, data_dim=8))
        assert enc.n_qubits == 3
        assert enc.circuit(np.ones(8)).n_qubits == 3


class TestLabels:
    def test_scheme_defaults(self):
        scheme = LabelScheme(2, 4)
        assert scheme.measured == (0,)
        assert scheme.n_outcomes == 2
        assert LabelScheme(3, 4).measured == (0, 1)

    def test_custom_measured_qubits(self):
        scheme = LabelScheme(4, 3, measured=(2, 0))
        # outcome bits: qubit 2 most significant, then qubit 0
        assert scheme.outcomes()[0b001] == 0b10
        assert scheme.outcomes()[0b100] == 0b01

    def test_scheme_validation(self):
        with pytest.raises(EncodingError):
            LabelScheme(1, 3)
        with pytest.raises(EncodingError):
            LabelScheme(4, 3, measured=(0,))
        with pytest.raises(EncodingError):
            LabelScheme(2, 3, measured=(3,))
        with pytest.raises(EncodingError):
            LabelScheme(4, 3, measured=(1, 1))

    def test_unused_outcome_abstains(self):
        scheme = LabelScheme(3, 3)
        assert scheme.outcome_to_label(3) == ABSTAIN
        assert scheme.outcome_to_label(2) == 2
        with pytest.raises(EncodingError):
            scheme.check_label(3)

    def test_projector(self):
        proj = label_projector(1, LabelScheme(2, 2))
        assert np.allclose(np.diag(proj.matrix).real, [0, 0, 1, 1])


class TestPerturbation:
    def test_block_equals_m_y(self):
        ops = build_perturbation(1, LabelScheme(2, 3), 0.1)
        assert np.allclose(ops.block, ops.m_y, atol=1e-10)
        assert np.allclose(np.diag(ops.m_y).real, [0.9, 1.0])

    def test_u_y_is_unitary(self):
        ops = build_perturbation(2, LabelScheme(3, 3), 0.37)
        u = ops.u_y
        assert u.shape == (8, 8)
        assert np.allclose(u.conj().T @ u, np.eye(8), atol=1e-12)

    def test_complement_singular_value(self):
        ops = build_perturbation(0, LabelScheme(2, 2), 0.1)
        assert ops.complement_singular_value == pytest.approx(math.sqrt(0.19))

    def test_eta_bounds(self):
        scheme = LabelScheme(2, 2)
        build_perturbation(0, scheme, 0.0)
        build_perturbation(0, scheme, 1.0)
        with pytest.raises(EncodingError):
            build_perturbation(0, scheme, 1.5)
        with pytest.raises(EncodingError):
            build_perturbation(2, scheme, 0.1)


class TestQuantumEncoders:
    def test_hamiltonian_encoding_is_real_time_evolution(self, rng):
        op = random_hermitian(2, rng)
        c = encode_hamiltonian(op, 2.0)
        assert len(c) == 1
        assert np.allclose(c.to_matrix(), matrix_exp_hermitian(op, -2j))

    def test_hamiltonian_encoder_caches_specs(self):
        enc = HamiltonianEncoder(3, cache_size=4)
        spec = ModelSpec.aubry_andre(3, 1.0, 1.5)
        first = enc.circuit(spec)
        assert enc.circuit(ModelSpec.aubry_andre(3, 1.0, 1.5)) is first
        expected = encode_hamiltonian(aubry_andre(3, 1.0, 1.5)).to_matrix()
        assert np.allclose(first.to_matrix(), expected)

    def test_hamiltonian_encoder_without_cache(self):
        enc = HamiltonianEncoder(3, cache_size=0)
        spec = ModelSpec.aubry_andre(3, 1.0, 1.5)
        assert enc.circuit(spec) is not enc.circuit(spec)

    def test_full_cache_shared_across_threads(self):
        enc = HamiltonianEncoder(2, cache_size=2)
        specs = [ModelSpec.aubry_andre(2, 1.0, 0.25 * (i + 1)) for i in range(12)] * 4

        def unitary(spec):
            time.sleep(0.001)
            return enc.circuit(spec).to_matrix()

        out = parallel_map(unitary, specs, threads=8)
        assert len(enc._cache) <= 2
        for spec, u in zip(specs, out):
            assert np.allclose(u, encode_hamiltonian(spec.build()).to_matrix())

    def test_hamiltonian_encoder_rejects_bad_payload(self):
        enc = HamiltonianEncoder(2)
        with pytest.raises(EncodingError):
            enc.circuit(np.zeros(4))
        with pytest.raises(EncodingError):
            enc.circuit(HermitianOp.identity(3))

    def test_state_encoder(self, rng):
        h = random_k_local(4, 20, 2, rng)
        enc = StateEncoder(h, n_qubits=2, t=1.0)
        x = PureState.haar_random(2, rng)
        c = enc.circuit(x)
        assert c.n_qubits == 2
        assert np.allclose(c.to_matrix(), matrix_exp_hermitian(h.induced(x), -1j))
        with pytest.raises(EncodingError):
            enc.circuit(PureState.haar_random(3, rng))
        with pytest.raises(EncodingError):
            StateEncoder(h, n_qubits=4)


class TestChannelEvolution:
    def test_product_hamiltonian_gives_unitary_step(self, rng):
        k = random_hermitian(2, rng)
        global_h = HermitianOp(np.kron(np.eye(2), k.matrix), check=False)
        x = PureState.haar_random(1, rng)
        rho = random_density(2, rng)
        out = lmr_channel_step(global_h, x, rho, 0.3)
        u = matrix_exp_hermitian(k, -0.3j)
        assert np.allclose(out.matrix, u @ rho.matrix @ u.conj().T)

    def test_step_error_is_second_order(self, rng):
        global_h = random_hermitian(3, rng)
        x = PureState.haar_random(1, rng)
        rho = random_density(2, rng)
        induced = induced_hamiltonian(global_h, x)
        errors = []
        for dt in (0.2, 0.1, 0.05):
            u = matrix_exp_hermitian(induced, -1j * dt)
            exact = u @ rho.matrix @ u.conj().T
            errors.append(trace_norm(lmr_channel_step(global_h, x, rho, dt).matrix - exact))
        for coarse, fine in zip(errors, errors[1:]):
            assert 3.0 <= coarse / fine <= 5.0

    def test_evolution_keeps_state_valid(self, rng):
        global_h = random_hermitian(3, rng)
        x = PureState.haar_random(1, rng)
        rho = lmr_evolve(global_h, x, DensityState.maximally_mixed(2), 1.0, 0.1)
        assert rho.trace == pytest.approx(1.0)
        assert rho.is_valid()

    def test_evolution_validation(self, rng):
        global_h = random_hermitian(3, rng)
        x = PureState.haar_random(1, rng)
        with pytest.raises(EncodingError):
            lmr_channel_step(global_h, x, DensityState.maximally_mixed(2), 0.0)
        with pytest.raises(EncodingError):
            lmr_evolve(global_h, x, DensityState.maximally_mixed(1), 1.0, 0.1)
