#!/usr/bin/env python3
"""
Property-based tests for trainer.py using hypothesis

Invariants checked:
- One exact step succeeds with probability 1 - (2 eta - eta^2) h and never raises the datum's loss
- The oracle's success probability and conditional loss never increase with beta
- Learning-rate schedules sum to beta and gamma
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qal.datasets import gen_synthetic
from qal.encoding import ClassicalEncoder, ClassicalEncoderConfig, LabelScheme
from qal.evaluation import failure_probability
from qal.quantum import HermitianOp, PureState, random_density, random_hermitian
from qal.trainer import TrainConfig, predicted_tradeoff, train_step_exact

DATA = gen_synthetic(12, 8, np.random.default_rng(5))
ENCODER = ClassicalEncoder(ClassicalEncoderConfig(n_qubits=3, data_dim=8))
SCHEME = LabelScheme(2, 3)

etas = st.floats(min_value=1e-3, max_value=0.95, allow_nan=False)
seeds = st.integers(0, 2**32 - 1)


class TestStepProperties:
    @given(eta=etas, seed=seeds, index=st.integers(0, len(DATA) - 1))
    @settings(max_examples=60, deadline=None)
    def test_success_probability_formula(self, eta, seed, index):
        psi = PureState.haar_random(3, np.random.default_rng(seed))
        sample = DATA[index]
        h = failure_probability(psi, sample, ENCODER, SCHEME)
        step = train_step_exact(psi, sample, ENCODER, SCHEME, eta)
        assert step.success_prob == pytest.approx(1 - (2 * eta - eta**2) * h, abs=1e-10)
        assert (1 - eta) ** 2 - 1e-12 <= step.success_prob <= 1 + 1e-12
        assert step.state.is_normalized

    @given(eta=etas, seed=seeds, index=st.integers(0, len(DATA) - 1))
    @settings(max_examples=60, deadline=None)
    def test_step_never_raises_datum_loss(self, eta, seed, index):
        psi = PureState.haar_random(3, np.random.default_rng(seed))
        sample = DATA[index]
        before = failure_probability(psi, sample, ENCODER, SCHEME)
        after = failure_probability(
            train_step_exact(psi, sample, ENCODER, SCHEME, eta).state, sample, ENCODER, SCHEME
        )
        assert after <= before + 1e-10


class TestOracleProperties:
    @given(seed=seeds, pure=st.booleans())
    @settings(max_examples=40, deadline=None)
    def test_monotone_along_beta(self, seed, pure):
        rng = np.random.default_rng(seed)
        raw = random_hermitian(2, rng)
        lo, hi = raw.eigenvalues[0], raw.eigenvalues[-1]
        h = HermitianOp((raw.matrix - lo * np.eye(4)) / (hi - lo), check=False)
        rho0 = PureState.haar_random(2, rng) if pure else random_density(2, rng)
        points = predicted_tradeoff(h, rho0, np.linspace(0.0, 3.0, 13))
        success = np.array([p.success_prob for p in points])
        loss = np.array([p.loss for p in points])
        assert np.all(np.diff(success) <= 1e-12)
        assert np.all(np.diff(loss) <= 1e-9)


class TestScheduleProperties:
    @given(st.lists(st.floats(min_value=1e-3, max_value=1.0), min_size=1, max_size=20))
    def test_beta_and_gamma(self, schedule):
        cfg = TrainConfig(eta=tuple(schedule), steps=len(schedule))
        assert cfg.beta == pytest.approx(sum(schedule))
        assert cfg.gamma == pytest.approx(sum(e * e for e in schedule))
