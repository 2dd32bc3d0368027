# SPDX-License-Identifier: MIT
# SPDX-FileCopyrightText: 2025 qal-sim contributors
"""
Depolarizing noise and noisy training in density-matrix mode.

Channel on m target qubits with rate p:

    pauli    rho <- (1 - p) rho + p / (4^m - 1) * sum_{P != I} P rho P
    replace  rho <- (1 - p) rho + p * (I / 2^m  (x)  Tr_targets rho)

A noisy step runs U(x), U_y and U(x)^dagger gate by gate on (system + ancilla), with a
channel after every gate: p1 after single-qubit gates, p2 after two-qubit gates, and a
layer of p2 channels on consecutive wire pairs after dense gates. The ancilla is then
projected on |0> and traced out; the remaining trace is the step's success probability.
"""

from __future__ import annotations

import enum
import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache, reduce
from typing import Callable, Final, NamedTuple, Sequence

import numpy as np

from .datasets import LabeledDataset, Sample
from .encoding import Encoder, LabelScheme, build_perturbation
from .hamiltonians import pauli_matrix
from .quantum import (
    DensityState,
    Gate,
    PureState,
    apply_gate,
    apply_matrix,
    partial_trace,
)
from .trainer import DEGENERATE_TOL, DegenerateStepError

log = logging.getLogger(__name__)

SINGLE_TO_TWO_RATIO: Final[float] = 0.1  # default p1 / p2
_KEEP_ANCILLA_ZERO: Final[np.ndarray] = np.diag([1.0, 0.0]).astype(np.complex128)


class NoiseError(ValueError):
    """Raised on rates outside [0, 1] or unknown channel conventions."""
    pass


class Convention(str, enum.Enum):
    PAULI = "pauli"
    REPLACE = "replace"


def _check_rate(p: float, *, field: str) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise NoiseError(f"{field}: depolarizing rate must lie in [0, 1], got {p}")
    return p


@dataclass(frozen=True)
class NoiseModel:
    p2: float
    p1: float | None = None  # defaults to p2 / 10
    convention: Convention = Convention.PAULI

    def __post_init__(self) -> None:
        object.__setattr__(self, "p2", _check_rate(self.p2, field="p2"))
        p1 = self.p2 * SINGLE_TO_TWO_RATIO if self.p1 is None else self.p1
        object.__setattr__(self, "p1", _check_rate(p1, field="p1"))
        try:
            object.__setattr__(self, "convention", Convention(self.convention))
        except ValueError:
            raise NoiseError(f"convention: expected 'pauli' or 'replace', got {self.convention!r}")

    @property
    def noiseless(self) -> bool:
        return self.p1 == 0.0 and self.p2 == 0.0

    def rate_for(self, arity: int) -> float:
        return self.p1 if arity == 1 else self.p2


# ---------------------------------------------------------------------------
# channels
# ---------------------------------------------------------------------------

@lru_cache(maxsize=4)
def pauli_strings(m: int) -> tuple[np.ndarray, ...]:
    """All 4^m - 1 nontrivial Pauli strings on m qubits (first factor most significant)."""
    mats = []
    for axes in itertools.product("IXYZ", repeat=m):
        if set(axes) == {"I"}:
            continue
        mats.append(reduce(np.kron, [pauli_matrix(a) for a in axes]))
    return tuple(mats)


def _twirl(rho: DensityState, qubits: Sequence[int]) -> np.ndarray:
    """I/2^m on `qubits` tensored with rho traced over them."""
    n = rho.n_qubits
    targets = set(qubits)
    rows = list(range(n))
    cols = [q if q in targets else n + q for q in range(n)]
    rest = [q for q in range(n) if q not in targets]
    reduced_axes = rest + [n + q for q in rest]
    reduced = np.einsum(rho.tensor(), rows + cols, reduced_axes)
    operands: list = [reduced, reduced_axes]
    eye = np.eye(2, dtype=np.complex128) / 2.0
    for q in sorted(targets):
        operands += [eye, [q, n + q]]
    full = np.einsum(*operands, list(range(2 * n)))
    return full.reshape(rho.matrix.shape)


def depolarize(
    rho: DensityState,
    qubits: Sequence[int],
    p: float,
    convention: Convention | str = Convention.PAULI,
) -> DensityState:
    qubits = [int(q) for q in qubits]
    if len(qubits) not in (1, 2) or len(set(qubits)) != len(qubits):
        raise NoiseError(f"depolarize: expected 1 or 2 distinct qubits, got {qubits}")
    if max(qubits) >= rho.n_qubits or min(qubits) < 0:
        raise NoiseError(f"depolarize: qubits {qubits} out of range for {rho.n_qubits} qubits")
    p = _check_rate(p, field="p")
    if p == 0.0:
        return rho.copy()
    if Convention(convention) is Convention.REPLACE:
        out = (1.0 - p) * rho.matrix + p * _twirl(rho, qubits)
        return DensityState(rho.n_qubits, out)
    strings = pauli_strings(len(qubits))
    mixed = sum(apply_matrix(rho, s, qubits).matrix for s in strings)
    out = (1.0 - p) * rho.matrix + (p / len(strings)) * mixed
    return DensityState(rho.n_qubits, out)


def _wire_pairs(targets: Sequence[int]) -> list[tuple[int, ...]]:
    """(t0, t1), (t2, t3), ...; an odd last wire forms a group alone."""
    return [tuple(targets[i:i + 2]) for i in range(0, len(targets), 2)]


def noisy_gate(rho: DensityState, gate: Gate, model: NoiseModel) -> DensityState:
    """Apply `gate`, then its depolarizing layer."""
    rho = apply_gate(rho, gate)
    if model.noiseless:
        return rho
    if gate.arity <= 2:
        return depolarize(rho, gate.targets, model.rate_for(gate.arity), model.convention)
    for group in _wire_pairs(gate.targets):
        rho = depolarize(rho, group, model.p2, model.convention)
    return rho


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

class NoisyStep(NamedTuple):
    state: DensityState  # unnormalized; trace equals success_prob
    success_prob: float


def noisy_train_step(
    rho: DensityState,
    sample: Sample,
    encoder: Encoder,
    scheme: LabelScheme,
    eta: float,
    model: NoiseModel,
) -> NoisyStep:
    n = rho.n_qubits
    circuit = encoder.circuit(sample.payload)
    if circuit.n_qubits != n:
        raise NoiseError(f"noisy step: {circuit.n_qubits}-qubit circuit on {n}-qubit state")
    ops = build_perturbation(sample.label, scheme, eta)
    register = DensityState(n + 1, np.kron(rho.normalized().matrix, _KEEP_ANCILLA_ZERO))
    wide = circuit.on_register(n + 1)
    for gate in wide:
        register = noisy_gate(register, gate, model)
    register = noisy_gate(
        register, Gate.dense(ops.u_y, scheme.measured + (n,), check=False), model
    )
    for gate in wide.adjoint():
        register = noisy_gate(register, gate, model)
    register = apply_matrix(register, _KEEP_ANCILLA_ZERO, [n])
    system = partial_trace(register, list(range(n)))
    success = system.trace
    if success < DEGENERATE_TOL:
        raise DegenerateStepError(f"noisy step: success probability {success:.3g} vanishes")
    return NoisyStep(system, success)


class NoisyRecord(NamedTuple):
    step: int  # 1-based, as StepRecord.step
    sample_id: int
    success_prob: float


@dataclass(eq=False)
class NoisyTrace:
    records: list[NoisyRecord]
    final_state: DensityState
    model: NoiseModel
    eta: float

    @property
    def acceptance(self) -> float:
        return float(np.prod([r.success_prob for r in self.records])) if self.records else 1.0


def train_noisy(
    dataset: LabeledDataset | Sequence[Sample],
    encoder: Encoder,
    scheme: LabelScheme,
    eta: float,
    steps: int,
    model: NoiseModel,
    rng: np.random.Generator,
    initial: PureState | DensityState | None = None,
    on_step: Callable[[NoisyRecord, DensityState], None] | None = None,
) -> NoisyTrace:
    """Noisy trajectory; the state is renormalised after each step (post-selection kept)."""
    samples = list(dataset)
    if not samples:
        raise NoiseError("train_noisy: dataset is empty")
    if steps < 0:
        raise NoiseError(f"steps: must be >= 0, got {steps}")
    if initial is None:
        initial = PureState.haar_random(encoder.n_qubits, rng)
    rho = initial.to_density() if isinstance(initial, PureState) else initial.normalized()
    records: list[NoisyRecord] = []
    for t in range(steps):
        sample = samples[int(rng.integers(len(samples)))]
        new, success = noisy_train_step(rho, sample, encoder, scheme, eta, model)
        rho = new.normalized()
        rec = NoisyRecord(t + 1, sample.sample_id, success)
        records.append(rec)
        log.debug("noisy step %d: sample %d, success %.4f", t + 1, sample.sample_id, success)
        if on_step is not None:
            on_step(rec, rho)
    log.info("noisy run p2=%g: %d steps", model.p2, steps)
    return NoisyTrace(records, rho, model, eta)
