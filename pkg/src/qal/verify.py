# SPDX-License-Identifier: MIT
# SPDX-FileCopyrightText: 2025 qal-sim contributors
"""
Numerical verification suites for the analytic bounds the training scheme relies on.

Each suite draws random instances from a seeded generator and returns Check rows
(measured value, bound, pass flag). `quick=True` shrinks the draw counts for smoke tests.

Suites:
  norm-inequality       ||BAB||_1 <= 1 and ||BAC + CAB||_1 <= 2 for ||A||_1 <= 1, 0 <= B, C <= I
  single-step           one averaged step vs exp(-eta H_S) rho exp(-eta H_S): <= 4 eta^2
  averaged-dynamics     Monte-Carlo mean over datum sequences vs the oracle: <= 4 T eta^2 + 5 SE
  convergence           log excited weight vs beta has slope -2 gap (10%)
  constant-probability  schedule constants; oracle success >= c4, loss <= g + eps + c3
  block-encoding        ancilla block equals M_y; sampled step matches the exact step
  majority-vote         binomial K-accuracy vs Monte-Carlo majority votes (3 sigma)
  generalization        bound arithmetic; empirical gap quantile below the bound
"""

from __future__ import annotations

import logging
import math
from typing import Callable, Final, NamedTuple

import numpy as np

from .datasets import gen_synthetic
from .encoding import ClassicalEncoder, ClassicalEncoderConfig, LabelScheme, build_perturbation
from .evaluation import empirical_gap_experiment, generalization_bound, k_accuracy
from .quantum import (
    DensityState,
    HermitianOp,
    PureState,
    fidelity,
    random_density,
    random_hermitian,
    random_unitary,
    trace_norm,
)
from .trainer import (
    averaged_step,
    excited_weight_ratio,
    predicted_tradeoff,
    schedule_from_theorem,
    train_step_exact,
    train_step_sampled,
    verify_single_step_lemma,
)

log = logging.getLogger(__name__)

NORM_SLACK: Final[float] = 1e-9
FIDELITY_TOL: Final[float] = 1e-9
BLOCK_TOL: Final[float] = 1e-10
SLOPE_TOL: Final[float] = 0.1  # relative error of the fitted decay rate


class Check(NamedTuple):
    suite: str
    name: str
    measured: float
    bound: float
    passed: bool


def _le(suite: str, name: str, measured: float, bound: float) -> Check:
    return Check(suite, name, float(measured), float(bound), bool(measured <= bound))


# ---------------------------------------------------------------------------
# random instances
# ---------------------------------------------------------------------------

def random_data_hamiltonian(n_qubits: int, rng: np.random.Generator) -> HermitianOp:
    """I - U^dagger Pi_y U for a Haar unitary U and a random label y on qubit 0."""
    dim = 1 << n_qubits
    u = random_unitary(dim, rng)
    y = int(rng.integers(2))
    rows = np.arange(dim)[(np.arange(dim) >> (n_qubits - 1)) == y]
    return HermitianOp(np.eye(dim) - u[rows].conj().T @ u[rows], check=False)


def _contraction(n_qubits: int, rng: np.random.Generator) -> np.ndarray:
    """Random Hermitian B with 0 <= B <= I."""
    _, vecs = random_hermitian(n_qubits, rng).eigh
    return (vecs * rng.uniform(0.0, 1.0, vecs.shape[0])) @ vecs.conj().T


def _spectrum_op(evals: np.ndarray, rng: np.random.Generator) -> HermitianOp:
    u = random_unitary(evals.size, rng)
    return HermitianOp((u * evals) @ u.conj().T, check=False)


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------

def check_norm_inequality(rng: np.random.Generator, quick: bool = False) -> list[Check]:
    draws = 40 if quick else 200
    worst_single = worst_pair = 0.0
    for _ in range(draws):
        n = int(rng.integers(1, 4))
        a = random_hermitian(n, rng).matrix
        a = a / trace_norm(a)
        b, c = _contraction(n, rng), _contraction(n, rng)
        worst_single = max(worst_single, trace_norm(b @ a @ b))
        worst_pair = max(worst_pair, trace_norm(b @ a @ c + c @ a @ b))
    return [
        _le("norm-inequality", "||BAB||_1", worst_single, 1.0 + NORM_SLACK),
        _le("norm-inequality", "||BAC+CAB||_1", worst_pair, 2.0 + NORM_SLACK),
    ]


def check_single_step(rng: np.random.Generator, quick: bool = False) -> list[Check]:
    draws = 20 if quick else 200
    out = []
    for eta in (0.05, 0.1, 0.2):
        worst = 0.0
        for _ in range(draws):
            h_list = [random_data_hamiltonian(3, rng) for _ in range(int(rng.integers(1, 6)))]
            rho = random_density(3, rng)
            worst = max(worst, verify_single_step_lemma(h_list, rho, eta, strict=False))
        out.append(_le("single-step", f"eta={eta:g}", worst, 4.0 * eta**2))
    return out


def check_averaged_dynamics(rng: np.random.Generator, quick: bool = False) -> list[Check]:
    n, steps, eta = 4, 50, 0.05
    sequences = 100 if quick else 500
    h_list = [random_data_hamiltonian(n, rng) for _ in range(4)]
    h_s = HermitianOp.average(h_list)
    psi0 = PureState.haar_random(n, rng)
    kraus = [np.eye(h.dim) - eta * h.matrix for h in h_list]
    finals = np.empty((sequences, psi0.dim, psi0.dim), dtype=np.complex128)
    for m in range(sequences):
        v = psi0.amplitudes.copy()
        for idx in rng.integers(len(kraus), size=steps):
            v = kraus[idx] @ v
        finals[m] = np.outer(v, v.conj())
    mean = finals.mean(axis=0)
    oracle = _oracle_matrix(h_s, psi0.to_density(), eta * steps)
    se = math.sqrt(psi0.dim * finals.var(axis=0).sum() / sequences)
    bound = 4.0 * steps * eta**2 + 5.0 * se
    # one-step consistency of the averaged map itself
    step_dev = trace_norm(
        averaged_step(h_list, psi0.to_density(), eta)
        - _oracle_matrix(h_s, psi0.to_density(), eta)
    )
    return [
        _le("averaged-dynamics", f"T={steps} eta={eta:g} M={sequences}",
            trace_norm(mean - oracle), bound),
        _le("averaged-dynamics", "first step", step_dev, 4.0 * eta**2),
    ]


def _oracle_matrix(h_s: HermitianOp, rho: DensityState, beta: float) -> np.ndarray:
    evals, vecs = h_s.eigh
    e = (vecs * np.exp(-beta * evals)) @ vecs.conj().T
    return e @ rho.matrix @ e


def check_convergence(rng: np.random.Generator, quick: bool = False) -> list[Check]:
    gap = 0.2
    dim = 16
    evals = np.concatenate([[0.0, gap], rng.uniform(0.6, 1.0, dim - 2)])
    h_s = _spectrum_op(evals, rng)
    psi0 = PureState.haar_random(4, rng)
    betas = np.linspace(10.0, 20.0, 6 if quick else 21)
    ratio = excited_weight_ratio(h_s, psi0, betas)
    slope = np.polyfit(betas, np.log(ratio), 1)[0]
    rel = abs(slope / (-2.0 * gap) - 1.0)
    losses = [p.loss for p in predicted_tradeoff(h_s, psi0, np.linspace(0.0, 20.0, 41))]
    rises = float(max(0.0, np.max(np.diff(losses))))
    return [
        _le("convergence", "decay rate vs -2 gap (relative)", rel, SLOPE_TOL),
        _le("convergence", "conditional loss increase along beta", rises, NORM_SLACK),
    ]


def check_constant_probability(rng: np.random.Generator, quick: bool = False) -> list[Check]:
    c1, c2, c3, eps, g = 0.5, 0.1, 0.5, 0.1, 0.02
    sched = schedule_from_theorem(c1, c2, c3, eps, g)
    expected_beta = 3.0 * math.log(1.1) / 0.05
    dim = 16
    low = dim // 4
    evals = np.concatenate([
        [g], rng.uniform(g, g + eps, low - 1), rng.uniform(0.3, 1.0, dim - low),
    ])
    h_s = _spectrum_op(np.sort(evals), rng)
    rho0 = DensityState.maximally_mixed(4)
    point = predicted_tradeoff(h_s, rho0, [sched.beta])[0]
    return [
        _le("constant-probability", "beta arithmetic", abs(sched.beta - expected_beta), 1e-12),
        _le("constant-probability", "c4 - success", sched.c4 - point.success_prob, 0.0),
        _le("constant-probability", "conditional loss", point.loss, g + eps + c3),
    ]


def check_block_encoding(rng: np.random.Generator, quick: bool = False) -> list[Check]:
    n = 3
    config = ClassicalEncoderConfig(n_qubits=n, data_dim=9)
    encoder = ClassicalEncoder(config)
    scheme = LabelScheme(2, n)
    data = gen_synthetic(20, 9, rng)
    block_err = 0.0
    worst_fid = 0.0
    draws = 100 if quick else 1000
    for _ in range(draws):
        eta = float(rng.uniform(0.0, 1.0))
        sample = data[int(rng.integers(len(data)))]
        ops = build_perturbation(sample.label, scheme, eta)
        block_err = max(block_err, float(np.abs(ops.block - ops.m_y).max()))
        state = PureState.haar_random(n, rng)
        exact = train_step_exact(state, sample, encoder, scheme, eta)
        for _ in range(200):
            outcome = train_step_sampled(state, sample, encoder, scheme, eta, rng)
            if outcome.accepted:
                worst_fid = max(worst_fid, 1.0 - fidelity(outcome.state, exact.state))
                break
    trials = 1000 if quick else 10_000
    worst_z = 0.0
    for _ in range(10):
        eta = float(rng.uniform(0.05, 0.5))
        sample = data[int(rng.integers(len(data)))]
        state = PureState.haar_random(n, rng)
        p = train_step_exact(state, sample, encoder, scheme, eta).success_prob
        hits = sum(
            train_step_sampled(state, sample, encoder, scheme, eta, rng).accepted
            for _ in range(trials)
        )
        sigma = math.sqrt(max(p * (1.0 - p), 1e-12) / trials)
        worst_z = max(worst_z, abs(hits / trials - p) / sigma)
    return [
        _le("block-encoding", "|<0|U_y|0> - M_y|", block_err, BLOCK_TOL),
        _le("block-encoding", "1 - fidelity(sampled, exact)", worst_fid, FIDELITY_TOL),
        _le("block-encoding", "acceptance z-score", worst_z, 4.0),
    ]


def check_majority_vote(rng: np.random.Generator, quick: bool = False) -> list[Check]:
    draws = 100_000 if quick else 1_000_000
    out = [_le("majority-vote", "K=3 h=0.2 value", abs(k_accuracy(0.2, 3) - 0.896), 1e-12)]
    for k, h in ((3, 0.2), (29, 0.4), (29, 0.1)):
        p = k_accuracy(h, k)
        fails = rng.binomial(k, h, size=draws)
        freq = float(np.mean(fails <= (k - 1) // 2))
        sigma = math.sqrt(max(p * (1.0 - p), 1e-12) / draws)
        out.append(_le("majority-vote", f"K={k} h={h:g} deviation", abs(freq - p), 3.0 * sigma))
    return out


def check_generalization(rng: np.random.Generator, quick: bool = False) -> list[Check]:
    value = generalization_bound(10, 500, 0.05)
    n = 4
    encoder = ClassicalEncoder(ClassicalEncoderConfig(n_qubits=n, data_dim=12))
    scheme = LabelScheme(2, n)
    pool = gen_synthetic(100 if quick else 200, 12, rng)
    stats = empirical_gap_experiment(
        pool, encoder, scheme, train_size=20, repetitions=50 if quick else 200, rng=rng,
        strict=False,
    )
    return [
        _le("generalization", "bound(10, 500, 0.05) - 0.29149", abs(value - 0.29149), 1e-4),
        _le("generalization", "95% gap quantile", stats.quantile, stats.bound),
    ]


SUITES: Final[dict[str, Callable[[np.random.Generator, bool], list[Check]]]] = {
    "norm-inequality": check_norm_inequality,
    "single-step": check_single_step,
    "averaged-dynamics": check_averaged_dynamics,
    "convergence": check_convergence,
    "constant-probability": check_constant_probability,
    "block-encoding": check_block_encoding,
    "majority-vote": check_majority_vote,
    "generalization": check_generalization,
}


def run_suite(name: str, seed: int = 0, quick: bool = False) -> list[Check]:
    """Run one suite (or "all", each suite on its own spawned generator)."""
    names = list(SUITES) if name == "all" else [name]
    unknown = [s for s in names if s not in SUITES]
    if unknown:
        raise ValueError(f"verify: unknown suite {unknown[0]!r}")
    seeds = np.random.SeedSequence(seed).spawn(len(names))
    checks: list[Check] = []
    for suite, ss in zip(names, seeds):
        log.info("verify: running %s", suite)
        checks += SUITES[suite](np.random.default_rng(ss), quick)
    return checks
