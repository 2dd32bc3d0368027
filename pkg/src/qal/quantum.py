# SPDX-License-Identifier: MIT
# SPDX-FileCopyrightText: 2025 qal-sim contributors
"""
Dense statevector and density-matrix primitives.

Everything in the package is built on these few pieces:
- PureState / DensityState: amplitudes or density matrix of an n-qubit register
- Gate / Circuit: RotY, RotZ, CNOT, CZ and dense k-qubit unitaries on qubit indices
- HermitianOp: immutable Hermitian matrix with a cached (block-aware) eigendecomposition
- gate application, expectation values, projective measurement, partial trace, norms

Qubit ordering: qubit 0 is the most-significant bit of the basis-state index, so the
amplitude of |q0 q1 ... q(n-1)> sits at index q0*2^(n-1) + ... + q(n-1). Internally a
state is viewed as a tensor of shape (2,)*n, and axis k of that tensor is qubit k.

Global phases are not tracked; compare pure states with `fidelity`.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Final, Iterable, Iterator, NamedTuple, Sequence

import numpy as np
import scipy.linalg as la
from scipy import sparse
from scipy.sparse import csgraph
from scipy.stats import unitary_group

log = logging.getLogger(__name__)

TOL_ALGEBRA: Final[float] = 1e-10  # algebraic identities (hermiticity, unitarity)
TOL_COMPOSED: Final[float] = 1e-9  # composed operations (circuits, exponentials)
MAX_QUBITS: Final[int] = 24  # einsum sublist limit for density tensors (2n <= 52)


class QuantumError(ValueError):
    """Raised on invalid states, gates, operators or qubit indices."""
    pass


# ---------------------------------------------------------------------------
# tensor plumbing
# ---------------------------------------------------------------------------

def _check_dim(dim: int, *, field: str) -> int:
    """Return log2(dim), raising if dim is not a power of two."""
    n = int(dim).bit_length() - 1
    if dim < 1 or (1 << n) != dim:
        raise QuantumError(f"{field}: dimension {dim} is not a power of two")
    return n


def _apply_on_axes(tensor: np.ndarray, matrix: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Contract `matrix` (2^m x 2^m) with the given tensor axes, first axis most significant."""
    m = len(axes)
    front = list(range(m))
    moved = np.moveaxis(tensor, list(axes), front)
    shape = moved.shape
    out = (matrix @ moved.reshape(1 << m, -1)).reshape(shape)
    return np.moveaxis(out, front, list(axes))


def _is_unitary(matrix: np.ndarray, tol: float = TOL_ALGEBRA) -> bool:
    eye = np.eye(matrix.shape[0])
    return bool(np.allclose(matrix.conj().T @ matrix, eye, atol=tol, rtol=0.0))


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------

@dataclass
class PureState:
    """Amplitude vector of an n-qubit register.

    The vector may be unnormalised: `norm_sq` then carries the post-selection success
    probability accumulated so far.
    """

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        self.amplitudes = np.ascontiguousarray(self.amplitudes, dtype=np.complex128).ravel()
        if self.n_qubits < 0 or self.n_qubits > MAX_QUBITS:
            raise QuantumError(f"n_qubits: {self.n_qubits} out of range [0, {MAX_QUBITS}]")
        if self.amplitudes.size != 1 << self.n_qubits:
            raise QuantumError(
                f"amplitudes: length {self.amplitudes.size} != 2^{self.n_qubits}"
            )

    @classmethod
    def from_amplitudes(cls, amplitudes: Iterable[complex]) -> PureState:
        vec = np.asarray(list(amplitudes) if not isinstance(amplitudes, np.ndarray) else amplitudes)
        return cls(_check_dim(vec.size, field="amplitudes"), vec)

    @classmethod
    def basis(cls, n_qubits: int, index: int = 0) -> PureState:
        if not 0 <= index < 1 << n_qubits:
            raise QuantumError(f"basis index {index} out of range for {n_qubits} qubits")
        vec = np.zeros(1 << n_qubits, dtype=np.complex128)
        vec[index] = 1.0
        return cls(n_qubits, vec)

    @classmethod
    def zero(cls, n_qubits: int) -> PureState:
        return cls.basis(n_qubits, 0)

    @classmethod
    def haar_random(cls, n_qubits: int, rng: np.random.Generator) -> PureState:
        """Haar-random pure state (normalised complex Gaussian vector)."""
        dim = 1 << n_qubits
        vec = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        return cls(n_qubits, vec / np.linalg.norm(vec))

    @classmethod
    def random_basis(cls, n_qubits: int, rng: np.random.Generator) -> PureState:
        return cls.basis(n_qubits, int(rng.integers(1 << n_qubits)))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    @property
    def is_normalized(self) -> bool:
        return abs(self.norm_sq - 1.0) <= TOL_ALGEBRA

    def normalized(self) -> PureState:
        norm = np.sqrt(self.norm_sq)
        if norm == 0.0:
            raise QuantumError("cannot normalise a zero-norm state")
        return PureState(self.n_qubits, self.amplitudes / norm)

    def copy(self) -> PureState:
        return PureState(self.n_qubits, self.amplitudes.copy())

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.n_qubits)

    def kron(self, other: PureState) -> PureState:
        """Register `self` on the leading qubits, `other` on the trailing ones."""
        return PureState(self.n_qubits + other.n_qubits, np.kron(self.amplitudes, other.amplitudes))

    def to_density(self) -> DensityState:
        return DensityState.from_pure(self)

    def fidelity(self, other: PureState) -> float:
        return fidelity(self, other)


@dataclass
class DensityState:
    """Density matrix of an n-qubit register; the trace may be below one after post-selection."""

    n_qubits: int
    matrix: np.ndarray

    def __post_init__(self) -> None:
        self.matrix = np.ascontiguousarray(self.matrix, dtype=np.complex128)
        dim = 1 << self.n_qubits
        if self.matrix.shape != (dim, dim):
            raise QuantumError(f"matrix: shape {self.matrix.shape} != ({dim}, {dim})")

    @classmethod
    def from_pure(cls, state: PureState) -> DensityState:
        a = state.amplitudes
        return cls(state.n_qubits, np.outer(a, a.conj()))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> DensityState:
        matrix = np.asarray(matrix)
        return cls(_check_dim(matrix.shape[0], field="matrix"), matrix)

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> DensityState:
        dim = 1 << n_qubits
        return cls(n_qubits, np.eye(dim, dtype=np.complex128) / dim)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def normalized(self) -> DensityState:
        tr = self.trace
        if tr <= 0.0:
            raise QuantumError("cannot normalise a density matrix with non-positive trace")
        return DensityState(self.n_qubits, self.matrix / tr)

    def copy(self) -> DensityState:
        return DensityState(self.n_qubits, self.matrix.copy())

    def tensor(self) -> np.ndarray:
        return self.matrix.reshape((2,) * (2 * self.n_qubits))

    def is_valid(self, tol: float = TOL_COMPOSED) -> bool:
        """Hermitian within `tol` and no eigenvalue below -tol."""
        m = self.matrix
        if not np.allclose(m, m.conj().T, atol=tol, rtol=0.0):
            return False
        return bool(la.eigvalsh((m + m.conj().T) / 2).min() >= -tol)


def fidelity(a: PureState, b: PureState) -> float:
    """|<a|b>|^2 / (<a|a><b|b>), insensitive to global phase and norm."""
    if a.n_qubits != b.n_qubits:
        raise QuantumError(f"fidelity: {a.n_qubits}-qubit vs {b.n_qubits}-qubit state")
    overlap = np.vdot(a.amplitudes, b.amplitudes)
    return float(abs(overlap) ** 2 / (a.norm_sq * b.norm_sq))


# ---------------------------------------------------------------------------
# gates and circuits
# ---------------------------------------------------------------------------

class GateKind(str, enum.Enum):
    ROT_Y = "ry"
    ROT_Z = "rz"
    CNOT = "cnot"
    CZ = "cz"
    DENSE = "dense"


_CNOT: Final[np.ndarray] = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128
)
_CZ: Final[np.ndarray] = np.diag([1, 1, 1, -1]).astype(np.complex128)


def rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def rot_z(angle: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])


@dataclass(frozen=True, eq=False)
class Gate:
    """One gate on named qubits. Targets are ordered: for CNOT (control, target)."""

    kind: GateKind
    targets: tuple[int, ...]
    angle: float = 0.0
    matrix: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        targets = tuple(int(t) for t in self.targets)
        object.__setattr__(self, "targets", targets)
        if len(set(targets)) != len(targets):
            raise QuantumError(f"{self.kind.value}: duplicate targets {targets}")
        if any(t < 0 for t in targets):
            raise QuantumError(f"{self.kind.value}: negative target in {targets}")
        arity = {GateKind.ROT_Y: 1, GateKind.ROT_Z: 1, GateKind.CNOT: 2, GateKind.CZ: 2}
        if self.kind in arity and len(targets) != arity[self.kind]:
            raise QuantumError(f"{self.kind.value}: expected {arity[self.kind]} targets")
        if self.kind is GateKind.DENSE:
            if self.matrix is None:
                raise QuantumError("dense: matrix is required")
            dim = 1 << len(targets)
            if self.matrix.shape != (dim, dim):
                raise QuantumError(f"dense: matrix shape {self.matrix.shape} != ({dim}, {dim})")

    @classmethod
    def ry(cls, qubit: int, angle: float) -> Gate:
        return cls(GateKind.ROT_Y, (qubit,), float(angle))

    @classmethod
    def rz(cls, qubit: int, angle: float) -> Gate:
        return cls(GateKind.ROT_Z, (qubit,), float(angle))

    @classmethod
    def cnot(cls, control: int, target: int) -> Gate:
        return cls(GateKind.CNOT, (control, target))

    @classmethod
    def cz(cls, a: int, b: int) -> Gate:
        return cls(GateKind.CZ, (a, b))

    @classmethod
    def dense(cls, matrix: np.ndarray, targets: Sequence[int], *, check: bool = True) -> Gate:
        """Dense unitary on `targets` (first target is the most significant local bit)."""
        matrix = np.ascontiguousarray(matrix, dtype=np.complex128)
        if check and not _is_unitary(matrix):
            raise QuantumError("dense: matrix is not unitary within 1e-10")
        matrix.flags.writeable = False
        return cls(GateKind.DENSE, tuple(targets), matrix=matrix)

    @property
    def arity(self) -> int:
        return len(self.targets)

    def unitary(self) -> np.ndarray:
        if self.kind is GateKind.ROT_Y:
            return rot_y(self.angle)
        if self.kind is GateKind.ROT_Z:
            return rot_z(self.angle)
        if self.kind is GateKind.CNOT:
            return _CNOT
        if self.kind is GateKind.CZ:
            return _CZ
        return self.matrix

    def adjoint(self) -> Gate:
        if self.kind in (GateKind.ROT_Y, GateKind.ROT_Z):
            return Gate(self.kind, self.targets, -self.angle)
        if self.kind is GateKind.DENSE:
            return Gate.dense(self.matrix.conj().T, self.targets, check=False)
        return self  # CNOT and CZ are involutions


@dataclass(frozen=True, eq=False)
class Circuit:
    """Ordered gate list on an n-qubit register; gates[0] is applied first."""

    n_qubits: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self) -> None:
        gates = tuple(self.gates)
        object.__setattr__(self, "gates", gates)
        for g in gates:
            if max(g.targets) >= self.n_qubits:
                raise QuantumError(
                    f"circuit: {g.kind.value} targets {g.targets} out of range "
                    f"for {self.n_qubits} qubits"
                )

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self) -> Iterator[Gate]:
        return iter(self.gates)

    def then(self, other: Circuit) -> Circuit:
        """`self` followed by `other`."""
        if other.n_qubits != self.n_qubits:
            raise QuantumError(f"circuit: cannot join {self.n_qubits} and {other.n_qubits} qubits")
        return Circuit(self.n_qubits, self.gates + other.gates)

    def adjoint(self) -> Circuit:
        return Circuit(self.n_qubits, tuple(g.adjoint() for g in reversed(self.gates)))

    def on_register(self, n_total: int) -> Circuit:
        """Same gates acting on the leading qubits of a larger register."""
        if n_total < self.n_qubits:
            raise QuantumError(f"circuit: register of {n_total} < {self.n_qubits} qubits")
        return Circuit(n_total, self.gates)

    def count(self, kind: GateKind) -> int:
        return sum(1 for g in self.gates if g.kind is kind)

    @cached_property
    def program(self) -> tuple[_Local | _Permutation, ...]:
        """Fused gates: single-qubit runs merged, CNOT/CZ runs as signed permutations."""
        return _compile(self.gates, self.n_qubits)

    def apply_to_columns(self, columns: np.ndarray) -> np.ndarray:
        """U @ columns for a (2^n, k) block of column vectors."""
        dim = 1 << self.n_qubits
        cols = np.asarray(columns, dtype=np.complex128)
        if cols.ndim != 2 or cols.shape[0] != dim:
            raise QuantumError(f"circuit: column block {cols.shape} does not match dim {dim}")
        for op in self.program:
            cols = op.apply(cols, self.n_qubits)
        return cols

    def to_matrix(self) -> np.ndarray:
        """Dense 2^n x 2^n unitary of the whole circuit."""
        return self.apply_to_columns(np.eye(1 << self.n_qubits, dtype=np.complex128))


class _Local(NamedTuple):
    matrix: np.ndarray
    targets: tuple[int, ...]

    def apply(self, cols: np.ndarray, n_qubits: int) -> np.ndarray:
        batch = cols.shape[1]
        tensor = cols.reshape((2,) * n_qubits + (batch,))
        return _apply_on_axes(tensor, self.matrix, self.targets).reshape(cols.shape)


class _Permutation(NamedTuple):
    """U|b> = phase[b] |perm[b]>."""

    perm: np.ndarray
    phase: np.ndarray

    @classmethod
    def identity(cls, n_qubits: int) -> _Permutation:
        dim = 1 << n_qubits
        return cls(np.arange(dim), np.ones(dim))

    def then(self, gate: Gate, n_qubits: int) -> _Permutation:
        b = self.perm
        a_shift, b_shift = (n_qubits - 1 - t for t in gate.targets)
        if gate.kind is GateKind.CNOT:
            control = (b >> a_shift) & 1
            return _Permutation(b ^ (control << b_shift), self.phase)
        both = ((b >> a_shift) & 1) & ((b >> b_shift) & 1)
        return _Permutation(b, self.phase * (1 - 2 * both))

    def apply(self, cols: np.ndarray, n_qubits: int) -> np.ndarray:
        out = np.empty_like(cols)
        out[self.perm] = self.phase[:, None] * cols
        return out


def _compile(gates: Sequence[Gate], n_qubits: int) -> tuple[_Local | _Permutation, ...]:
    program: list[_Local | _Permutation] = []
    for g in gates:
        last = program[-1] if program else None
        if g.kind in (GateKind.CNOT, GateKind.CZ):
            base = last if isinstance(last, _Permutation) else _Permutation.identity(n_qubits)
            if base is last:
                program[-1] = base.then(g, n_qubits)
            else:
                program.append(base.then(g, n_qubits))
        elif g.arity == 1 and isinstance(last, _Local) and last.targets == g.targets:
            program[-1] = _Local(g.unitary() @ last.matrix, g.targets)
        else:
            program.append(_Local(g.unitary(), g.targets))
    return tuple(program)


def _check_targets(gate: Gate, n_qubits: int) -> None:
    if max(gate.targets) >= n_qubits:
        raise QuantumError(
            f"{gate.kind.value}: target {max(gate.targets)} out of range for {n_qubits} qubits"
        )


def apply_gate(state: PureState | DensityState, gate: Gate) -> PureState | DensityState:
    """Apply one gate: amplitudes <- U a, or matrix <- U rho U^dagger."""
    _check_targets(gate, state.n_qubits)
    u = gate.unitary()
    if isinstance(state, PureState):
        out = _apply_on_axes(state.tensor(), u, gate.targets)
        return PureState(state.n_qubits, out.reshape(-1))
    n = state.n_qubits
    tensor = _apply_on_axes(state.tensor(), u, gate.targets)
    tensor = _apply_on_axes(tensor, u.conj(), [n + t for t in gate.targets])
    return DensityState(n, tensor.reshape(state.matrix.shape))


def apply_matrix(
    state: PureState | DensityState, matrix: np.ndarray, targets: Sequence[int]
) -> PureState | DensityState:
    """Apply an arbitrary (not necessarily unitary) operator to `targets`.

    Density states get M rho M^dagger, so post-selection projectors can be applied with it.
    """
    targets = list(targets)
    if max(targets) >= state.n_qubits:
        raise QuantumError(f"apply_matrix: targets {targets} out of range")
    if isinstance(state, PureState):
        out = _apply_on_axes(state.tensor(), matrix, targets)
        return PureState(state.n_qubits, out.reshape(-1))
    n = state.n_qubits
    tensor = _apply_on_axes(state.tensor(), matrix, targets)
    tensor = _apply_on_axes(tensor, np.conj(matrix), [n + t for t in targets])
    return DensityState(n, tensor.reshape(state.matrix.shape))


def apply_circuit(
    state: PureState | DensityState, circuit: Circuit, *, adjoint: bool = False
) -> PureState | DensityState:
    """Apply the circuit in gate order (or its adjoint: conjugated gates, reverse order)."""
    if circuit.n_qubits != state.n_qubits:
        raise QuantumError(
            f"apply_circuit: {circuit.n_qubits}-qubit circuit on {state.n_qubits}-qubit state"
        )
    if adjoint:
        circuit = circuit.adjoint()
    if isinstance(state, PureState):
        out = circuit.apply_to_columns(state.amplitudes[:, None])
        return PureState(state.n_qubits, out[:, 0])
    left = circuit.apply_to_columns(state.matrix)
    both = circuit.apply_to_columns(left.conj().T).conj().T
    return DensityState(state.n_qubits, both)


# ---------------------------------------------------------------------------
# Hermitian operators
# ---------------------------------------------------------------------------

def _block_eigh(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition that diagonalises each connected block of the sparsity graph alone."""
    dim = matrix.shape[0]
    pattern = sparse.csr_matrix(np.abs(matrix) > 0)
    n_blocks, labels = csgraph.connected_components(pattern, directed=False)
    if n_blocks == 1:
        return la.eigh(matrix)
    evals = np.empty(dim)
    evecs = np.zeros((dim, dim), dtype=np.complex128)
    col = 0
    for b in range(n_blocks):
        idx = np.flatnonzero(labels == b)
        w, v = la.eigh(matrix[np.ix_(idx, idx)])
        evals[col:col + idx.size] = w
        evecs[idx, col:col + idx.size] = v
        col += idx.size
    order = np.argsort(evals, kind="stable")
    return evals[order], evecs[:, order]


class HermitianOp:
    """Immutable Hermitian operator on n qubits with a lazily cached eigendecomposition.

    The matrix is symmetrised on construction and frozen (read-only), so the cached
    eigenpairs never go stale.
    """

    def __init__(self, matrix: np.ndarray, *, check: bool = True, tol: float = TOL_ALGEBRA):
        m = np.array(matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise QuantumError(f"operator: expected a square matrix, got shape {m.shape}")
        self._n_qubits = _check_dim(m.shape[0], field="operator")
        if check and not np.allclose(m, m.conj().T, atol=tol, rtol=0.0):
            raise QuantumError(f"operator: matrix is not Hermitian within {tol:g}")
        m = (m + m.conj().T) / 2
        m.flags.writeable = False
        self._matrix = m

    def __repr__(self) -> str:
        return f"HermitianOp(n_qubits={self._n_qubits})"

    @classmethod
    def identity(cls, n_qubits: int) -> HermitianOp:
        return cls(np.eye(1 << n_qubits), check=False)

    @classmethod
    def zeros(cls, n_qubits: int) -> HermitianOp:
        return cls(np.zeros((1 << n_qubits, 1 << n_qubits)), check=False)

    @classmethod
    def diagonal(cls, values: Sequence[float]) -> HermitianOp:
        return cls(np.diag(np.asarray(values, dtype=float)), check=False)

    @classmethod
    def projector(cls, state: PureState) -> HermitianOp:
        a = state.normalized().amplitudes
        return cls(np.outer(a, a.conj()), check=False)

    @classmethod
    def average(cls, ops: Sequence[HermitianOp]) -> HermitianOp:
        if not ops:
            raise QuantumError("average: no operators")
        total = np.zeros_like(ops[0].matrix)
        for op in ops:
            if op.dim != ops[0].dim:
                raise QuantumError("average: dimension mismatch")
            total += op.matrix
        return cls(total / len(ops), check=False)

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def n_qubits(self) -> int:
        return self._n_qubits

    @property
    def dim(self) -> int:
        return self._matrix.shape[0]

    @cached_property
    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        """(eigenvalues ascending, eigenvectors as columns)."""
        try:
            return _block_eigh(self._matrix)
        except (np.linalg.LinAlgError, la.LinAlgError) as e:
            raise QuantumError(f"eigendecomposition failed: {e}") from e

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eigh[0]

    def __add__(self, other: HermitianOp) -> HermitianOp:
        if other.dim != self.dim:
            raise QuantumError("operator sum: dimension mismatch")
        return HermitianOp(self._matrix + other.matrix, check=False)

    def __sub__(self, other: HermitianOp) -> HermitianOp:
        if other.dim != self.dim:
            raise QuantumError("operator difference: dimension mismatch")
        return HermitianOp(self._matrix - other.matrix, check=False)

    def __mul__(self, scalar: float) -> HermitianOp:
        return HermitianOp(self._matrix * float(scalar), check=False)

    __rmul__ = __mul__

    def commutator_norm(self, other: HermitianOp) -> float:
        """Largest absolute entry of [self, other]."""
        a, b = self._matrix, other.matrix
        return float(np.abs(a @ b - b @ a).max())


def matrix_exp_hermitian(op: HermitianOp, scale: complex) -> np.ndarray:
    """V diag(exp(scale * E_i)) V^dagger from the cached eigendecomposition."""
    evals, evecs = op.eigh
    return (evecs * np.exp(scale * evals)) @ evecs.conj().T


def expectation(state: PureState | DensityState, op: HermitianOp) -> float:
    """<psi|O|psi>/<psi|psi> or Tr(O rho)/Tr(rho)."""
    if op.dim != state.dim:
        raise QuantumError(f"expectation: operator dim {op.dim} != state dim {state.dim}")
    if isinstance(state, PureState):
        a = state.amplitudes
        return float(np.vdot(a, op.matrix @ a).real / state.norm_sq)
    return float(np.einsum("ij,ji->", op.matrix, state.matrix).real / state.trace)


# ---------------------------------------------------------------------------
# measurement
# ---------------------------------------------------------------------------

class Measurement(NamedTuple):
    outcome: int
    state: PureState
    probability: float


def measure_projective(
    state: PureState,
    projectors: Sequence[HermitianOp],
    rng: np.random.Generator,
    *,
    tol: float = TOL_COMPOSED,
) -> Measurement:
    """Sample an outcome of a complete orthogonal projective measurement and collapse."""
    if not projectors:
        raise QuantumError("measure: empty projector set")
    dim = state.dim
    total = np.zeros((dim, dim), dtype=np.complex128)
    for i, p in enumerate(projectors):
        if p.dim != dim:
            raise QuantumError(f"measure: projector {i} has dim {p.dim} != {dim}")
        total += p.matrix
        for j in range(i, len(projectors)):
            prod = p.matrix @ projectors[j].matrix
            target = p.matrix if i == j else 0.0
            if not np.allclose(prod, target, atol=tol, rtol=0.0):
                raise QuantumError(f"measure: projectors {i}, {j} are not orthogonal projectors")
    if not np.allclose(total, np.eye(dim), atol=tol, rtol=0.0):
        raise QuantumError("measure: projectors do not sum to the identity")

    a = state.amplitudes
    branches = [p.matrix @ a for p in projectors]
    probs = np.array([np.vdot(b, b).real for b in branches]) / state.norm_sq
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()
    k = int(rng.choice(len(probs), p=probs))
    collapsed = PureState(state.n_qubits, branches[k]).normalized()
    return Measurement(k, collapsed, float(probs[k]))


def qubit_probabilities(state: PureState, qubits: Sequence[int]) -> np.ndarray:
    """Marginal distribution of the computational-basis outcome on `qubits`.

    Outcome index uses qubits[0] as the most significant bit.
    """
    qubits = list(qubits)
    if not qubits or max(qubits) >= state.n_qubits or len(set(qubits)) != len(qubits):
        raise QuantumError(f"measure: invalid qubit list {qubits}")
    moved = np.moveaxis(state.tensor(), qubits, list(range(len(qubits))))
    weights = np.abs(moved.reshape(1 << len(qubits), -1)) ** 2
    probs = weights.sum(axis=1)
    return probs / probs.sum()


def measure_qubits(
    state: PureState, qubits: Sequence[int], rng: np.random.Generator
) -> Measurement:
    """Computational-basis measurement of a subset of qubits; the rest stays coherent."""
    qubits = list(qubits)
    probs = qubit_probabilities(state, qubits)
    k = int(rng.choice(probs.size, p=probs))
    front = list(range(len(qubits)))
    moved = np.moveaxis(state.tensor(), qubits, front).copy()
    flat = moved.reshape(1 << len(qubits), -1)
    keep = flat[k].copy()
    flat[:] = 0.0
    flat[k] = keep
    collapsed = np.moveaxis(flat.reshape(moved.shape), front, qubits).reshape(-1)
    return Measurement(k, PureState(state.n_qubits, collapsed).normalized(), float(probs[k]))


# ---------------------------------------------------------------------------
# reductions and norms
# ---------------------------------------------------------------------------

def partial_trace(state: DensityState, keep: Sequence[int]) -> DensityState:
    """Reduced density matrix on `keep` (in the given order); trace is preserved."""
    keep = [int(q) for q in keep]
    n = state.n_qubits
    if not keep:
        raise QuantumError("partial_trace: keep list is empty")
    if len(set(keep)) != len(keep):
        raise QuantumError(f"partial_trace: duplicate qubits in {keep}")
    if min(keep) < 0 or max(keep) >= n:
        raise QuantumError(f"partial_trace: qubits {keep} out of range for {n} qubits")
    rows = list(range(n))
    cols = [q if q not in keep else n + q for q in range(n)]
    out = [q for q in keep] + [n + q for q in keep]
    reduced = np.einsum(state.tensor(), rows + cols, out)
    dim = 1 << len(keep)
    return DensityState(len(keep), reduced.reshape(dim, dim))


def trace_norm(matrix: np.ndarray) -> float:
    """Sum of singular values."""
    return float(la.svdvals(np.asarray(matrix)).sum())


def spectral_norm(matrix: np.ndarray) -> float:
    """Largest singular value."""
    return float(la.svdvals(np.asarray(matrix)).max())


# ---------------------------------------------------------------------------
# random instances (initial states, verification draws)
# ---------------------------------------------------------------------------

def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    return unitary_group.rvs(dim, random_state=rng)


def random_hermitian(n_qubits: int, rng: np.random.Generator) -> HermitianOp:
    dim = 1 << n_qubits
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return HermitianOp((a + a.conj().T) / 2, check=False)


def random_density(
    n_qubits: int, rng: np.random.Generator, rank: int | None = None
) -> DensityState:
    """Random full- or fixed-rank density matrix with unit trace."""
    dim = 1 << n_qubits
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    return DensityState(n_qubits, rho / np.trace(rho).real)
