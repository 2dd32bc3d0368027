# SPDX-License-Identifier: MIT
# SPDX-FileCopyrightText: 2025 qal-sim contributors
"""
Prediction, accuracy, majority voting, generalization gaps and state reuse.

Losses are exact expectations (no shot noise): the failure probability of a sample is
h(x) = <psi|H_x|psi> = 1 - ||Pi_y U(x)|psi>||^2, and single-shot accuracy is 1 - h.
Outcomes of the label register that name no class count as failures.

K-accuracy with K copies of one state (K odd): P[at most (K-1)/2 of K shots fail],
a binomial tail in h. K = inf is the step function 1[h < 1/2], with 0.5 at h = 1/2.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Final, NamedTuple, Sequence

import numpy as np
from scipy.stats import binom

from .datasets import LabeledDataset, Sample
from .encoding import ABSTAIN, Encoder, LabelScheme, label_projector
from .hamiltonians import average_hamiltonian, sample_hamiltonian
from .quantum import (
    DensityState,
    HermitianOp,
    PureState,
    apply_circuit,
    expectation,
    fidelity,
    measure_qubits,
    qubit_probabilities,
    spectral_norm,
)
from .runtime import parallel_map
from .trainer import TrainConfig, initial_state, train_step_exact

log = logging.getLogger(__name__)

INF: Final[float] = math.inf


class EvaluationError(ValueError):
    """Raised on invalid majority-vote sizes, probabilities or evaluation inputs."""
    pass


# ---------------------------------------------------------------------------
# per-sample quantities
# ---------------------------------------------------------------------------

def failure_probability(
    state: PureState | DensityState, sample: Sample, encoder: Encoder, scheme: LabelScheme
) -> float:
    """<psi|H_x|psi> (or Tr(H_x rho)) without building H_x."""
    mask = scheme.outcome_mask(scheme.check_label(sample.label))
    rotated = apply_circuit(state, encoder.circuit(sample.payload))
    if isinstance(rotated, PureState):
        a = rotated.amplitudes
        return float(1.0 - np.vdot(a[mask], a[mask]).real / rotated.norm_sq)
    diag = np.diag(rotated.matrix).real
    return float(1.0 - diag[mask].sum() / rotated.trace)


def failure_probabilities(
    state: PureState | DensityState,
    samples: Sequence[Sample],
    encoder: Encoder,
    scheme: LabelScheme,
    threads: int = 1,
) -> np.ndarray:
    fn = lambda s: failure_probability(state, s, encoder, scheme)  # noqa: E731
    return np.clip(np.asarray(parallel_map(fn, list(samples), threads)), 0.0, 1.0)


def predict_probabilities(
    state: PureState, sample: Sample, encoder: Encoder, scheme: LabelScheme
) -> np.ndarray:
    """Distribution over label-register outcomes (index >= k_classes means abstain)."""
    rotated = apply_circuit(state, encoder.circuit(sample.payload))
    return qubit_probabilities(rotated, scheme.measured)


class Prediction(NamedTuple):
    label: int  # ABSTAIN for unused outcomes
    state: PureState  # post-measurement state, rotated back by U(x)^dagger
    probability: float


def measure_prediction(
    state: PureState,
    sample: Sample,
    encoder: Encoder,
    scheme: LabelScheme,
    rng: np.random.Generator,
) -> Prediction:
    """Projective measurement {U(x)^dagger Pi_y U(x)}: label plus collapsed state."""
    circuit = encoder.circuit(sample.payload)
    outcome, collapsed, prob = measure_qubits(apply_circuit(state, circuit), scheme.measured, rng)
    post = apply_circuit(collapsed, circuit, adjoint=True)
    return Prediction(scheme.outcome_to_label(outcome), post, prob)


def predict(
    state: PureState,
    sample: Sample,
    encoder: Encoder,
    scheme: LabelScheme,
    rng: np.random.Generator,
) -> int:
    return measure_prediction(state, sample, encoder, scheme, rng).label


# ---------------------------------------------------------------------------
# majority vote
# ---------------------------------------------------------------------------

def _check_k(k: int | float) -> None:
    if k == INF:
        return
    if int(k) != k or k < 1 or int(k) % 2 == 0:
        raise EvaluationError(f"K: majority vote needs an odd K >= 1 or inf, got {k}")


def k_accuracy(h: float | np.ndarray, k: int | float) -> float | np.ndarray:
    """Probability that the majority of K shots is correct, given failure probability h."""
    _check_k(k)
    h_arr = np.asarray(h, dtype=float)
    if np.any((h_arr < 0.0) | (h_arr > 1.0)):
        raise EvaluationError(f"h: failure probability must lie in [0, 1], got {h}")
    if k == INF:
        out = np.where(h_arr < 0.5, 1.0, np.where(h_arr == 0.5, 0.5, 0.0))
    else:
        k = int(k)
        out = binom.cdf((k - 1) // 2, k, h_arr)
    return float(out) if out.ndim == 0 else out


def ensemble_accuracy(failure_probs: Sequence[float]) -> float:
    """Majority-vote accuracy over independently trained copies (Poisson-binomial tail)."""
    h = np.asarray(failure_probs, dtype=float)
    _check_k(h.size)
    if np.any((h < 0.0) | (h > 1.0)):
        raise EvaluationError("h: failure probabilities must lie in [0, 1]")
    dist = np.array([1.0])  # dist[r] = P[r failures so far]
    for p in h:
        dist = np.convolve(dist, [1.0 - p, p])
    return float(dist[: (h.size - 1) // 2 + 1].sum())


def k_label(k: int | float) -> str:
    return "inf" if k == INF else str(int(k))


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class EvalReport:
    accuracy: float
    train_accuracy: float
    train_loss: float
    test_loss: float
    k_accuracy: dict[str, float] = field(default_factory=dict)
    bound: float | None = None
    n_train: int = 0
    n_test: int = 0

    @property
    def gap(self) -> float:
        return self.test_loss - self.train_loss

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "train_accuracy": self.train_accuracy,
            "train_loss": self.train_loss,
            "test_loss": self.test_loss,
            "gap": self.gap,
            "k_accuracy": dict(self.k_accuracy),
            "bound": self.bound,
            "n_train": self.n_train,
            "n_test": self.n_test,
        }


def evaluate(
    state: PureState | DensityState,
    train: LabeledDataset | Sequence[Sample],
    test: LabeledDataset | Sequence[Sample],
    encoder: Encoder,
    scheme: LabelScheme,
    ks: Sequence[int | float] = (),
    delta: float | None = None,
    threads: int = 1,
) -> EvalReport:
    """Exact train/test losses, accuracies and test K-accuracies for one state."""
    train, test = list(train), list(test)
    if not train or not test:
        raise EvaluationError("evaluate: train and test sets must be nonempty")
    for k in ks:
        _check_k(k)
    h_train = failure_probabilities(state, train, encoder, scheme, threads)
    h_test = failure_probabilities(state, test, encoder, scheme, threads)
    return report_from_failures(
        h_train, h_test, ks,
        bound=None if delta is None else generalization_bound(encoder.n_qubits, len(train), delta),
    )


def report_from_failures(
    h_train: np.ndarray,
    h_test: np.ndarray,
    ks: Sequence[int | float] = (),
    bound: float | None = None,
) -> EvalReport:
    train_loss = float(np.mean(h_train))
    test_loss = float(np.mean(h_test))
    kacc = {k_label(k): float(np.mean(k_accuracy(h_test, k))) for k in ks}
    return EvalReport(
        accuracy=1.0 - test_loss,
        train_accuracy=1.0 - train_loss,
        train_loss=train_loss,
        test_loss=test_loss,
        k_accuracy=kacc,
        bound=bound,
        n_train=len(h_train),
        n_test=len(h_test),
    )


def eigenbasis_failure_table(
    vectors: np.ndarray,
    samples: Sequence[Sample],
    encoder: Encoder,
    scheme: LabelScheme,
    threads: int = 1,
) -> np.ndarray:
    """F[s, i] = <v_i|H_x_s|v_i> for the columns v_i of `vectors`.

    A state diagonal in that basis with weights p has failure probabilities F @ p.
    """
    def row(sample: Sample) -> np.ndarray:
        mask = scheme.outcome_mask(scheme.check_label(sample.label))
        rotated = encoder.circuit(sample.payload).apply_to_columns(vectors)
        return 1.0 - (np.abs(rotated[mask]) ** 2).sum(axis=0)

    return np.vstack(parallel_map(row, list(samples), threads))


# ---------------------------------------------------------------------------
# generalization
# ---------------------------------------------------------------------------

def generalization_bound(n_qubits: int, n_train: int, delta: float) -> float:
    """sqrt(4 ln(2^(n+1) / delta) / N)."""
    if not 0.0 < delta <= 1.0:
        raise EvaluationError(f"delta: confidence parameter must lie in (0, 1], got {delta}")
    if n_train < 1:
        raise EvaluationError(f"N: training set size must be >= 1, got {n_train}")
    if n_qubits < 0:
        raise EvaluationError(f"n: qubit count must be >= 0, got {n_qubits}")
    return math.sqrt(4.0 * ((n_qubits + 1) * math.log(2.0) - math.log(delta)) / n_train)


def spectral_gap_bound(h_s: HermitianOp, h_pool: HermitianOp) -> float:
    """||H_S - H_D||, which bounds the worst-case generalization gap over all states."""
    return spectral_norm(h_s.matrix - h_pool.matrix)


class GapStatistics(NamedTuple):
    gaps: np.ndarray
    quantile: float
    bound: float
    delta: float

    @property
    def holds(self) -> bool:
        return self.quantile <= self.bound


def empirical_gap_experiment(
    pool: LabeledDataset | Sequence[Sample],
    encoder: Encoder,
    scheme: LabelScheme,
    train_size: int,
    repetitions: int,
    rng: np.random.Generator,
    delta: float = 0.05,
    strict: bool = True,
) -> GapStatistics:
    """Spectral distance between subsampled H_S and the pool average, over many draws."""
    samples = list(pool)
    if not 1 <= train_size <= len(samples):
        raise EvaluationError(f"train_size: {train_size} out of range for pool of {len(samples)}")
    if repetitions < 1:
        raise EvaluationError(f"repetitions: must be >= 1, got {repetitions}")
    stack = np.stack([
        sample_hamiltonian(encoder.circuit(s.payload), label_projector(s.label, scheme)).matrix
        for s in samples
    ])
    h_pool = stack.mean(axis=0)
    gaps = np.empty(repetitions)
    for r in range(repetitions):
        idx = rng.choice(len(samples), size=train_size, replace=False)
        gaps[r] = spectral_norm(stack[idx].mean(axis=0) - h_pool)
    stats = GapStatistics(
        gaps,
        float(np.quantile(gaps, 1.0 - delta)),
        generalization_bound(encoder.n_qubits, train_size, delta),
        delta,
    )
    if strict and not stats.holds:
        raise EvaluationError(
            f"generalization: {1 - delta:.0%} gap quantile {stats.quantile:.4g} "
            f"exceeds bound {stats.bound:.4g}"
        )
    return stats


# ---------------------------------------------------------------------------
# state reuse
# ---------------------------------------------------------------------------

class ReuseEvent(NamedTuple):
    step: int
    sample_id: int
    label: int
    predicted: int
    loss_before: float
    loss_after: float
    fidelity: float  # pre- vs post-measurement state
    recovery_steps: int | None  # None if training ran out first

    @property
    def correct(self) -> bool:
        return self.predicted == self.label and self.predicted != ABSTAIN


def reusability_run(
    train_set: LabeledDataset | Sequence[Sample],
    held_out: LabeledDataset | Sequence[Sample],
    encoder: Encoder,
    scheme: LabelScheme,
    config: TrainConfig,
    tau: float,
    n_predictions: int,
    rng: np.random.Generator,
    h_s: HermitianOp | None = None,
) -> list[ReuseEvent]:
    """Train; whenever the training loss is below tau, measure a held-out sample on the state.

    Training continues on the collapsed state; recovery counts the steps until the
    training loss is below tau again. `config.steps` caps the total number of steps.
    """
    samples, targets = list(train_set), list(held_out)
    if not samples or not targets:
        raise EvaluationError("reuse: train and held-out sets must be nonempty")
    if not 0.0 < tau <= 1.0:
        raise EvaluationError(f"tau: loss threshold must lie in (0, 1], got {tau}")
    if h_s is None:
        h_s = average_hamiltonian(samples, encoder, scheme)
    state = initial_state(config, encoder.n_qubits, rng)
    if not isinstance(state, PureState):
        raise EvaluationError("reuse: measurements need a pure initial state")
    events: list[ReuseEvent] = []
    pending: dict | None = None
    step = 0
    loss = expectation(state, h_s)
    while len(events) < n_predictions and step < config.steps:
        if pending is None and loss < tau:
            target = targets[int(rng.integers(len(targets)))]
            pred = measure_prediction(state, target, encoder, scheme, rng)
            after = expectation(pred.state, h_s)
            pending = {
                "step": step, "sample_id": target.sample_id, "label": target.label,
                "predicted": pred.label, "loss_before": loss, "loss_after": after,
                "fidelity": fidelity(state, pred.state),
            }
            state, loss = pred.state, after
            if after < tau:
                events.append(ReuseEvent(**pending, recovery_steps=0))
                pending = None
            else:
                pending["count"] = 0
            if len(events) == n_predictions:
                break
        sample = samples[int(rng.integers(len(samples)))]
        state = train_step_exact(state, sample, encoder, scheme, config.eta_at(step)).state
        loss = expectation(state, h_s)
        step += 1
        if pending is not None:
            pending["count"] += 1
            if loss < tau:
                count = pending.pop("count")
                events.append(ReuseEvent(**pending, recovery_steps=count))
                pending = None
    if pending is not None and len(events) < n_predictions:
        pending.pop("count", None)
        events.append(ReuseEvent(**pending, recovery_steps=None))
    log.info("reuse: %d events over %d training steps", len(events), step)
    return events
