# SPDX-License-Identifier: MIT
# SPDX-FileCopyrightText: 2025 qal-sim contributors
"""
Data-encoding circuits U(x), label projectors Pi_y and the perturbation M_y / U_y.

Classical data (vector x of length l on n qubits):

    d = ceil(l / 3n) single-qubit layers, x zero-padded at the tail to 3nd entries
    U(x) = (BA)^(floor(n/2)-1) G(x[3n(d-1):3nd]) ... BA G(x[0:3n])

  Index conversion (1-indexed block k of the display -> 0-indexed slice):
    block k          -> x[3n(k-1) : 3nk]
    G_i(y_2n+i, y_n+i, y_i) -> qubit i: RotY(y[i]) then RotZ(y[n+i]) then RotY(y[2n+i])

  A = CNOT layer with controls 0, 2, 4, ... then CNOT layer with controls 1, 3, 5, ...
  B = same pattern with CZ

Hamiltonian data:   U(H) = exp(-i H t), one dense gate on every qubit (t = 2 by default)
Quantum-state data: U(|x>) = exp(-i H_|x> t), H_|x> = (<x| (x) I) H_global (|x> (x) I)

Perturbation on the label register (ancilla is the last wire of U_y):

    M_y = |y><y| + (1 - eta)(I - |y><y|)
    U_y = M_y (x) Z + sqrt(I - M_y^2) (x) X
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Final, Protocol, Sequence

import numpy as np

from .hamiltonians import ModelSpec, PauliSum
from .quantum import (
    Circuit,
    DensityState,
    Gate,
    HermitianOp,
    PureState,
    matrix_exp_hermitian,
    partial_trace,
)

log = logging.getLogger(__name__)

ABSTAIN: Final[int] = -1  # prediction for an unused label-register outcome
DEFAULT_HAMILTONIAN_TIME: Final[float] = 2.0
DEFAULT_STATE_TIME: Final[float] = 1.0


class EncodingError(ValueError):
    """Raised on malformed encoder input, label schemes or perturbation parameters."""
    pass


def suggest_qubits(data_dim: int) -> int:
    """Register size for a classical vector of `data_dim` entries: max(2, ceil(log2(l)))."""
    if data_dim < 1:
        raise EncodingError(f"data_dim: must be >= 1, got {data_dim}")
    return max(2, math.ceil(math.log2(data_dim)))


# ---------------------------------------------------------------------------
# classical data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassicalEncoderConfig:
    n_qubits: int
    data_dim: int

    def __post_init__(self) -> None:
        if self.n_qubits < 2:
            raise EncodingError(f"n_qubits: classical encoder needs >= 2, got {self.n_qubits}")
        if self.data_dim < 1:
            raise EncodingError(f"data_dim: must be >= 1, got {self.data_dim}")

    @property
    def n_layers(self) -> int:
        return math.ceil(self.data_dim / (3 * self.n_qubits))

    @property
    def padded_dim(self) -> int:
        return 3 * self.n_qubits * self.n_layers

    @property
    def padding(self) -> int:
        return self.padded_dim - self.data_dim

    @property
    def trailing_blocks(self) -> int:
        return self.n_qubits // 2 - 1

    @property
    def entangler_count(self) -> int:
        """Number of BA pairs in the circuit."""
        return self.n_layers + self.trailing_blocks


def single_qubit_layer(y: Sequence[float] | np.ndarray, n_qubits: int | None = None) -> Circuit:
    """G(y): qubit i gets RotY(y[i]), RotZ(y[n+i]), RotY(y[2n+i]) in that order."""
    y = np.asarray(y, dtype=float).ravel()
    n = y.size // 3 if n_qubits is None else n_qubits
    if n < 1 or y.size != 3 * n:
        raise EncodingError(f"single_qubit_layer: expected {3 * max(n, 1)} angles, got {y.size}")
    gates = []
    for i in range(n):
        gates += [Gate.ry(i, y[i]), Gate.rz(i, y[n + i]), Gate.ry(i, y[2 * n + i])]
    return Circuit(n, tuple(gates))


@lru_cache(maxsize=32)
def entangler_blocks(n: int) -> tuple[Circuit, Circuit]:
    """(A, B): brick layers of CNOTs and CZs, even-indexed controls first."""
    if n < 2:
        raise EncodingError(f"entangler_blocks: n must be >= 2, got {n}")
    pairs = [(i, i + 1) for i in range(0, n - 1, 2)] + [(i, i + 1) for i in range(1, n - 1, 2)]
    a = Circuit(n, tuple(Gate.cnot(c, t) for c, t in pairs))
    b = Circuit(n, tuple(Gate.cz(c, t) for c, t in pairs))
    return a, b


def encode_classical(x: Sequence[float] | np.ndarray, config: ClassicalEncoderConfig) -> Circuit:
    x = np.asarray(x, dtype=float).ravel()
    if x.size != config.data_dim:
        raise EncodingError(f"encode_classical: expected {config.data_dim} values, got {x.size}")
    n = config.n_qubits
    padded = np.zeros(config.padded_dim)
    padded[: x.size] = x
    a, b = entangler_blocks(n)
    ba = a.gates + b.gates
    gates: list[Gate] = []
    for k in range(config.n_layers):
        gates += single_qubit_layer(padded[3 * n * k: 3 * n * (k + 1)], n).gates
        gates += ba
    gates += ba * config.trailing_blocks
    return Circuit(n, tuple(gates))


# ---------------------------------------------------------------------------
# Hamiltonian and quantum-state data
# ---------------------------------------------------------------------------

def encode_hamiltonian(op: HermitianOp, t: float = DEFAULT_HAMILTONIAN_TIME) -> Circuit:
    """exp(-i H t) as a single dense gate."""
    if not isinstance(op, HermitianOp):
        raise EncodingError(f"encode_hamiltonian: expected HermitianOp, got {type(op).__name__}")
    u = matrix_exp_hermitian(op, -1j * t)
    return Circuit(op.n_qubits, (Gate.dense(u, range(op.n_qubits), check=False),))


def _as_state(x: PureState | np.ndarray) -> PureState:
    if isinstance(x, PureState):
        return x
    return PureState.from_amplitudes(np.asarray(x))


def induced_hamiltonian(global_h: HermitianOp | PauliSum, x: PureState | np.ndarray) -> HermitianOp:
    """H_|x> on the trailing qubits of a global Hamiltonian; |x> sits on the leading ones."""
    x = _as_state(x)
    if isinstance(global_h, PauliSum):
        return global_h.induced(x)
    s = x.n_qubits
    n = global_h.n_qubits - s
    if n <= 0:
        raise EncodingError(
            f"induced_hamiltonian: {s}-qubit state vs {global_h.n_qubits}-qubit Hamiltonian"
        )
    a = x.normalized().amplitudes
    blocks = global_h.matrix.reshape(1 << s, 1 << n, 1 << s, 1 << n)
    return HermitianOp(np.einsum("a,aibj,b->ij", a.conj(), blocks, a), check=False)


def lmr_channel_step(
    global_h: HermitianOp, x: PureState | np.ndarray, rho: DensityState, dt: float
) -> DensityState:
    """Tr_data[ exp(-iH dt) (|x><x| (x) rho) exp(iH dt) ]."""
    if dt <= 0:
        raise EncodingError(f"lmr_channel_step: dt must be > 0, got {dt}")
    return lmr_evolve(global_h, x, rho, dt, dt)


def lmr_evolve(
    global_h: HermitianOp,
    x: PureState | np.ndarray,
    rho: DensityState,
    total_time: float,
    dt: float,
) -> DensityState:
    """round(total_time / dt) channel steps with fresh copies of |x> each step."""
    x = _as_state(x).normalized()
    s, n = x.n_qubits, rho.n_qubits
    if global_h.n_qubits != s + n:
        raise EncodingError(
            f"lmr: Hamiltonian has {global_h.n_qubits} qubits, data+system have {s + n}"
        )
    if dt <= 0 or total_time < 0:
        raise EncodingError(f"lmr: need dt > 0 and total_time >= 0, got {dt}, {total_time}")
    u = matrix_exp_hermitian(global_h, -1j * dt)
    data = DensityState.from_pure(x).matrix
    keep = list(range(s, s + n))
    for _ in range(round(total_time / dt)):
        joint = u @ np.kron(data, rho.matrix) @ u.conj().T
        rho = partial_trace(DensityState(s + n, joint), keep)
    return rho


# ---------------------------------------------------------------------------
# labels and perturbation
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _outcome_index(n_qubits: int, measured: tuple[int, ...]) -> np.ndarray:
    """Label-register outcome of every basis index (measured[0] is the most significant bit)."""
    basis = np.arange(1 << n_qubits)
    out = np.zeros_like(basis)
    for q in measured:
        out = (out << 1) | ((basis >> (n_qubits - 1 - q)) & 1)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class LabelScheme:
    """Which qubits carry the label and how outcomes map to class labels."""

    k_classes: int
    n_qubits: int
    measured: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.k_classes < 2:
            raise EncodingError(f"k_classes: need at least 2 classes, got {self.k_classes}")
        m = (self.k_classes - 1).bit_length()
        measured = tuple(range(m)) if self.measured is None else tuple(map(int, self.measured))
        object.__setattr__(self, "measured", measured)
        if len(measured) != m:
            raise EncodingError(f"measured: {self.k_classes} classes need {m} qubits: {measured}")
        if len(set(measured)) != m:
            raise EncodingError(f"measured: duplicate qubits in {measured}")
        if min(measured) < 0 or max(measured) >= self.n_qubits:
            raise EncodingError(f"measured: {measured} out of range for {self.n_qubits} qubits")

    @property
    def label_qubits(self) -> int:
        return len(self.measured)

    @property
    def n_outcomes(self) -> int:
        return 1 << self.label_qubits

    def check_label(self, y: int) -> int:
        if not 0 <= y < self.k_classes:
            raise EncodingError(f"label: {y} out of range for {self.k_classes} classes")
        return int(y)

    def outcome_to_label(self, outcome: int) -> int:
        return outcome if outcome < self.k_classes else ABSTAIN

    def outcomes(self) -> np.ndarray:
        return _outcome_index(self.n_qubits, self.measured)

    def outcome_mask(self, y: int) -> np.ndarray:
        if not 0 <= y < self.n_outcomes:
            raise EncodingError(f"outcome: {y} out of range for {self.label_qubits} label qubits")
        return self.outcomes() == y

    def widened(self, n_total: int) -> LabelScheme:
        return LabelScheme(self.k_classes, n_total, self.measured)


def label_projector(y: int, scheme: LabelScheme) -> HermitianOp:
    """|bin(y)><bin(y)| on the measured qubits, identity elsewhere."""
    return HermitianOp.diagonal(scheme.outcome_mask(y).astype(float))


@dataclass(frozen=True, eq=False)
class PerturbationOps:
    label: int
    eta: float
    m_y: np.ndarray  # diagonal, label register
    u_y: np.ndarray  # label register (x) ancilla, ancilla last

    @property
    def complement_singular_value(self) -> float:
        return math.sqrt(2 * self.eta - self.eta**2)

    @cached_property
    def block(self) -> np.ndarray:
        """(I (x) <0|) U_y (I (x) |0>)."""
        return self.u_y[0::2, 0::2]


_Z: Final[np.ndarray] = np.diag([1.0, -1.0]).astype(np.complex128)
_X: Final[np.ndarray] = np.array([[0, 1], [1, 0]], dtype=np.complex128)


def build_perturbation(y: int, scheme: LabelScheme, eta: float) -> PerturbationOps:
    if not 0.0 <= eta <= 1.0:
        raise EncodingError(f"eta: learning rate must lie in [0, 1], got {eta}")
    y = scheme.check_label(y)
    dim = scheme.n_outcomes
    keep = np.zeros(dim)
    keep[y] = 1.0
    m_diag = keep + (1.0 - eta) * (1.0 - keep)
    s_diag = np.sqrt(np.clip(1.0 - m_diag**2, 0.0, None))
    m_y = np.diag(m_diag).astype(np.complex128)
    u_y = np.kron(m_y, _Z) + np.kron(np.diag(s_diag), _X)
    m_y.flags.writeable = False
    u_y.flags.writeable = False
    return PerturbationOps(y, float(eta), m_y, u_y)


# ---------------------------------------------------------------------------
# encoders
# ---------------------------------------------------------------------------

class Encoder(Protocol):
    n_qubits: int

    def circuit(self, payload) -> Circuit: ...


class ClassicalEncoder:
    """Angle encoding of real vectors."""

    kind = "classical"

    def __init__(self, config: ClassicalEncoderConfig):
        self.config = config
        self.n_qubits = config.n_qubits

    def circuit(self, payload) -> Circuit:
        return encode_classical(payload, self.config)


class _CircuitCache:
    """Small FIFO cache of dense-gate circuits keyed by payload identity.

    Shared by evaluation worker threads; builds run outside the lock, so two threads
    missing on the same key may both build it and the later one wins.
    """

    def __init__(self, size: int):
        self.size = size
        self._items: dict[object, Circuit] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._items)

    def get(self, key, build) -> Circuit:
        if self.size <= 0:
            return build()
        with self._lock:
            hit = self._items.get(key)
        if hit is not None:
            return hit
        hit = build()
        with self._lock:
            self._items.pop(key, None)
            while len(self._items) >= self.size:
                self._items.pop(next(iter(self._items)))
            self._items[key] = hit
        return hit


class HamiltonianEncoder:
    """Real-time evolution exp(-iHt) under a model Hamiltonian payload."""

    kind = "hamiltonian"

    def __init__(self, n_qubits: int, t: float = DEFAULT_HAMILTONIAN_TIME, cache_size: int = 16):
        self.n_qubits = n_qubits
        self.t = t
        self._cache = _CircuitCache(cache_size)

    def circuit(self, payload: ModelSpec | HermitianOp) -> Circuit:
        if isinstance(payload, HermitianOp):
            op = payload
        elif isinstance(payload, ModelSpec):
            return self._cache.get(payload, lambda: self.circuit(payload.build()))
        else:
            raise EncodingError(f"hamiltonian encoder: bad payload {type(payload).__name__}")
        if op.n_qubits != self.n_qubits:
            raise EncodingError(
                f"hamiltonian encoder: {op.n_qubits}-qubit payload, expected {self.n_qubits}"
            )
        return encode_hamiltonian(op, self.t)


class StateEncoder:
    """Evolution under the Hamiltonian a data state induces through a global Hamiltonian."""

    kind = "quantum_state"

    def __init__(
        self,
        global_h: PauliSum | HermitianOp,
        n_qubits: int,
        t: float = DEFAULT_STATE_TIME,
        cache_size: int = 16,
    ):
        if global_h.n_qubits <= n_qubits:
            raise EncodingError(
                f"state encoder: global Hamiltonian on {global_h.n_qubits} qubits "
                f"leaves no room for data next to {n_qubits} system qubits"
            )
        self.global_h = global_h
        self.n_qubits = n_qubits
        self.data_qubits = global_h.n_qubits - n_qubits
        self.t = t
        self._cache = _CircuitCache(cache_size)

    def circuit(self, payload: PureState | np.ndarray) -> Circuit:
        x = _as_state(payload)
        if x.n_qubits != self.data_qubits:
            raise EncodingError(
                f"state encoder: {x.n_qubits}-qubit data state, expected {self.data_qubits}"
            )
        key = x.amplitudes.tobytes()
        return self._cache.get(
            key, lambda: encode_hamiltonian(induced_hamiltonian(self.global_h, x), self.t)
        )
