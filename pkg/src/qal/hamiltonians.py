# SPDX-License-Identifier: MIT
# SPDX-FileCopyrightText: 2025 qal-sim contributors
"""
Data Hamiltonians, physics model Hamiltonians and spectral diagnostics.

Per-sample operator:   H_x = I - U(x)^dagger Pi_y U(x)    (failure probability of sample x)
Training average:      H_S = mean over the training set of H_x

Model Hamiltonians are assembled from Pauli strings with scipy.sparse Kronecker products
(qubit 0 leftmost, matching the register ordering in `qal.quantum`):

    aubry_andre(n, g, V)   -(g/2) sum_k (X_k X_k+1 + Y_k Y_k+1) - (V/2) sum_k cos(2 pi phi k) Z_k
                           open chain, sites k = 1..n, phi = (sqrt(5) - 1) / 2
    cluster_ising(n, h)    -sum_k X_k Z_k+1 X_k+2 + h sum_k Y_k Y_k+1, periodic
    random_k_local(...)    sum of k-body Pauli strings, coefficients ~ U(-1, 1)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Final, Iterable, NamedTuple, Sequence

import numpy as np
from scipy import sparse

from .quantum import (
    Circuit,
    HermitianOp,
    PureState,
    QuantumError,
    apply_matrix,
)

if TYPE_CHECKING:
    from .datasets import LabeledDataset
    from .encoding import Encoder, LabelScheme

log = logging.getLogger(__name__)

GOLDEN_PHI: Final[float] = (math.sqrt(5.0) - 1.0) / 2.0
DEGENERACY_TOL: Final[float] = 1e-8
DEFAULT_GRID_POINTS: Final[int] = 101  # heavy-tail grid, uniform on [0, 1]

_PAULI: Final[dict[str, np.ndarray]] = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


class HamiltonianError(ValueError):
    """Raised on invalid model parameters, Pauli terms or operator shapes."""
    pass


# ---------------------------------------------------------------------------
# Pauli strings
# ---------------------------------------------------------------------------

def pauli_matrix(axis: str) -> np.ndarray:
    try:
        return _PAULI[axis]
    except KeyError:
        raise HamiltonianError(f"pauli axis: expected one of X/Y/Z/I, got {axis!r}") from None


@dataclass(frozen=True)
class PauliTerm:
    """coefficient * (tensor product of single-qubit Paulis on the listed qubits)."""

    coefficient: float
    paulis: tuple[tuple[int, str], ...]

    def __post_init__(self) -> None:
        paulis = tuple((int(q), str(a).upper()) for q, a in self.paulis)
        object.__setattr__(self, "paulis", paulis)
        object.__setattr__(self, "coefficient", float(self.coefficient))
        qubits = [q for q, _ in paulis]
        if len(set(qubits)) != len(qubits):
            raise HamiltonianError(f"pauli term: repeated qubit in {paulis}")
        for q, a in paulis:
            if q < 0:
                raise HamiltonianError(f"pauli term: negative qubit {q}")
            if a not in ("X", "Y", "Z"):
                raise HamiltonianError(f"pauli term: bad axis {a!r} on qubit {q}")

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self.paulis)

    def label(self, n_qubits: int) -> str:
        chars = ["I"] * n_qubits
        for q, a in self.paulis:
            chars[q] = a
        return "".join(chars)

    def to_sparse(self, n_qubits: int) -> sparse.csr_matrix:
        if self.paulis and max(self.support) >= n_qubits:
            raise HamiltonianError(
                f"pauli term: qubit {max(self.support)} out of range for {n_qubits} qubits"
            )
        out = sparse.identity(1, dtype=np.complex128, format="csr")
        for axis in self.label(n_qubits):
            out = sparse.kron(out, sparse.csr_matrix(_PAULI[axis]), format="csr")
        return self.coefficient * out


@dataclass(frozen=True)
class PauliSum:
    """Sum of Pauli terms on an n-qubit register; stays sparse until `to_op` is called."""

    n_qubits: int
    terms: tuple[PauliTerm, ...] = ()

    def __post_init__(self) -> None:
        terms = tuple(self.terms)
        object.__setattr__(self, "terms", terms)
        for t in terms:
            if t.paulis and max(t.support) >= self.n_qubits:
                raise HamiltonianError(
                    f"pauli sum: term on {t.support} exceeds {self.n_qubits} qubits"
                )

    def __len__(self) -> int:
        return len(self.terms)

    def __add__(self, other: PauliSum) -> PauliSum:
        if other.n_qubits != self.n_qubits:
            raise HamiltonianError("pauli sum: register size mismatch")
        return PauliSum(self.n_qubits, self.terms + other.terms)

    def to_sparse(self) -> sparse.csr_matrix:
        dim = 1 << self.n_qubits
        total = sparse.csr_matrix((dim, dim), dtype=np.complex128)
        for t in self.terms:
            total = total + t.to_sparse(self.n_qubits)
        return total

    def to_op(self) -> HermitianOp:
        return HermitianOp(self.to_sparse().toarray(), check=False)

    def induced(self, state: PureState) -> HermitianOp:
        """(<x| (x) I) H (|x> (x) I) for a state |x> on the leading qubits, term by term.

        Each term splits into a system string P^s (qubits < s) and a remainder P^n:
        the induced operator is sum_j c_j <x|P_j^s|x> P_j^n.
        """
        s = state.n_qubits
        n = self.n_qubits - s
        if n <= 0:
            raise HamiltonianError(
                f"induced: {s}-qubit data state fills the {self.n_qubits}-qubit register"
            )
        x = state.normalized()
        dim = 1 << n
        total = sparse.csr_matrix((dim, dim), dtype=np.complex128)
        seen: dict[tuple[tuple[int, str], ...], float] = {}
        for t in self.terms:
            head = tuple((q, a) for q, a in t.paulis if q < s)
            tail = tuple((q - s, a) for q, a in t.paulis if q >= s)
            if head not in seen:
                seen[head] = _pauli_expectation(x, head)
            weight = t.coefficient * seen[head]
            if weight != 0.0:
                total = total + PauliTerm(weight, tail).to_sparse(n)
        return HermitianOp(total.toarray(), check=False)


def _pauli_expectation(state: PureState, paulis: Sequence[tuple[int, str]]) -> float:
    moved = state
    for q, a in paulis:
        moved = apply_matrix(moved, _PAULI[a], [q])
    return float(np.vdot(state.amplitudes, moved.amplitudes).real)


# ---------------------------------------------------------------------------
# physics models
# ---------------------------------------------------------------------------

def aubry_andre_terms(n: int, g: float, V: float) -> PauliSum:
    if n < 2:
        raise HamiltonianError(f"aubry_andre: n must be >= 2, got {n}")
    terms: list[PauliTerm] = []
    for k in range(n - 1):
        terms.append(PauliTerm(-g / 2, ((k, "X"), (k + 1, "X"))))
        terms.append(PauliTerm(-g / 2, ((k, "Y"), (k + 1, "Y"))))
    for k in range(1, n + 1):
        terms.append(PauliTerm(-(V / 2) * math.cos(2 * math.pi * GOLDEN_PHI * k), ((k - 1, "Z"),)))
    return PauliSum(n, tuple(terms))


def aubry_andre(n: int, g: float, V: float) -> HermitianOp:
    """Open-chain Aubry-Andre Hamiltonian; localised for V/g > 2."""
    return aubry_andre_terms(n, g, V).to_op()


def aubry_andre_phase(g: float, V: float) -> int:
    """1 = localised (V/g > 2), 0 = delocalised."""
    if g == 0:
        raise HamiltonianError("aubry_andre_phase: g must be nonzero")
    return int(V / g > 2)


def cluster_ising_terms(n: int, h: float) -> PauliSum:
    if n < 3:
        raise HamiltonianError(f"cluster_ising: n must be >= 3, got {n}")
    terms: list[PauliTerm] = []
    for k in range(n):
        terms.append(PauliTerm(-1.0, ((k, "X"), ((k + 1) % n, "Z"), ((k + 2) % n, "X"))))
    for k in range(n):
        terms.append(PauliTerm(h, ((k, "Y"), ((k + 1) % n, "Y"))))
    return PauliSum(n, tuple(terms))


def cluster_ising(n: int, h: float) -> HermitianOp:
    """Periodic cluster-Ising Hamiltonian; SPT phase for h < 1, antiferromagnetic for h > 1."""
    return cluster_ising_terms(n, h).to_op()


def cluster_ising_phase(h: float) -> int:
    """1 = antiferromagnetic (h > 1), 0 = symmetry-protected topological."""
    return int(h > 1)


def random_k_local(
    n_total: int, n_terms: int, k: int = 4, rng: np.random.Generator | None = None
) -> PauliSum:
    """n_terms random k-body Pauli strings on distinct random sites, coefficients ~ U(-1, 1)."""
    if k < 1 or k > n_total:
        raise HamiltonianError(f"random_k_local: k={k} invalid for {n_total} qubits")
    if n_terms < 0:
        raise HamiltonianError(f"random_k_local: n_terms must be >= 0, got {n_terms}")
    rng = rng if rng is not None else np.random.default_rng()
    terms = []
    for _ in range(n_terms):
        sites = rng.choice(n_total, size=k, replace=False)
        axes = rng.integers(0, 3, size=k)
        coef = rng.uniform(-1.0, 1.0)
        terms.append(PauliTerm(coef, tuple((int(q), "XYZ"[a]) for q, a in zip(sites, axes))))
    return PauliSum(n_total, tuple(terms))


@dataclass(frozen=True)
class ModelSpec:
    """Hamiltonian descriptor carried as a dataset payload: (model name, size, parameters)."""

    name: str
    n_qubits: int
    params: tuple[tuple[str, float], ...] = field(default=())

    MODELS = ("aubry_andre", "cluster_ising")

    def __post_init__(self) -> None:
        if self.name not in self.MODELS:
            raise HamiltonianError(f"model: unknown model {self.name!r}")
        object.__setattr__(self, "params", tuple((k, float(v)) for k, v in self.params))

    @classmethod
    def aubry_andre(cls, n: int, g: float, V: float) -> ModelSpec:
        return cls("aubry_andre", n, (("g", g), ("V", V)))

    @classmethod
    def cluster_ising(cls, n: int, h: float) -> ModelSpec:
        return cls("cluster_ising", n, (("h", h),))

    def param(self, key: str) -> float:
        for k, v in self.params:
            if k == key:
                return v
        raise HamiltonianError(f"model {self.name}: missing parameter {key!r}")

    def as_dict(self) -> dict[str, float | int | str]:
        return {"model": self.name, "n_qubits": self.n_qubits, **dict(self.params)}

    def build(self) -> HermitianOp:
        if self.name == "aubry_andre":
            return aubry_andre(self.n_qubits, self.param("g"), self.param("V"))
        return cluster_ising(self.n_qubits, self.param("h"))


# ---------------------------------------------------------------------------
# data Hamiltonians
# ---------------------------------------------------------------------------

def _diagonal_mask(op: HermitianOp) -> np.ndarray | None:
    """Boolean row mask if `op` is a diagonal 0/1 projector, else None."""
    m = op.matrix
    diag = np.diag(m).real
    if np.count_nonzero(m - np.diag(np.diag(m))):
        return None
    if not np.all((np.abs(diag) < 1e-12) | (np.abs(diag - 1.0) < 1e-12)):
        return None
    return diag > 0.5


def _conjugated_projector(u_x: Circuit, mask: np.ndarray) -> np.ndarray:
    """U^dagger Pi U for a diagonal projector, built from the masked rows of U."""
    dim = mask.size
    rows = np.eye(dim, dtype=np.complex128)[:, mask]
    v = u_x.adjoint().apply_to_columns(rows)  # columns U^dagger |r>
    return v @ v.conj().T


def sample_hamiltonian(u_x: Circuit, projector: HermitianOp) -> HermitianOp:
    """H_x = I - U(x)^dagger Pi_y U(x)."""
    dim = 1 << u_x.n_qubits
    if projector.dim != dim:
        raise HamiltonianError(
            f"sample_hamiltonian: projector dim {projector.dim} != circuit dim {dim}"
        )
    mask = _diagonal_mask(projector)
    if mask is not None:
        conj = _conjugated_projector(u_x, mask)
    else:
        u = u_x.to_matrix()
        conj = u.conj().T @ projector.matrix @ u
    return HermitianOp(np.eye(dim) - conj, check=False)


def average_hamiltonian(
    dataset: LabeledDataset | Iterable,
    encoder: Encoder,
    scheme: LabelScheme,
) -> HermitianOp:
    """H_S: uniform average of H_x over the samples."""
    samples = list(dataset)
    if not samples:
        raise HamiltonianError("average_hamiltonian: empty dataset")
    dim = 1 << encoder.n_qubits
    acc = np.zeros((dim, dim), dtype=np.complex128)
    for i, sample in enumerate(samples):
        mask = scheme.outcome_mask(sample.label)
        acc += _conjugated_projector(encoder.circuit(sample.payload), mask)
        if (i + 1) % 100 == 0:
            log.debug("average_hamiltonian: %d/%d samples", i + 1, len(samples))
    return HermitianOp(np.eye(dim) - acc / len(samples), check=False)


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpectrumReport:
    eigenvalues: np.ndarray
    ground_energy: float
    gap: float
    ground_degeneracy: int
    heavy_tail: tuple[tuple[float, float], ...]

    @property
    def g(self) -> float:
        return self.ground_energy

    def fraction_below(self, energy: float) -> float:
        """|{i: E_i <= energy}| / dim."""
        count = np.searchsorted(self.eigenvalues, energy, side="right")
        return count / self.eigenvalues.size

    def summary(self) -> dict:
        return {
            "dim": int(self.eigenvalues.size),
            "ground_energy": float(self.ground_energy),
            "gap": float(self.gap),
            "ground_degeneracy": int(self.ground_degeneracy),
            "heavy_tail": [[float(e), float(f)] for e, f in self.heavy_tail],
        }


def spectrum(op: HermitianOp, grid: Sequence[float] | None = None) -> SpectrumReport:
    """Full eigenvalue list, ground energy, gap and the heavy-tail fraction table."""
    evals = np.sort(np.asarray(op.eigenvalues, dtype=float))
    grid = np.linspace(0.0, 1.0, DEFAULT_GRID_POINTS) if grid is None else np.asarray(grid, float)
    if grid.size and np.any(np.diff(grid) < 0):
        raise HamiltonianError("spectrum: energy grid must be nondecreasing")
    e0 = float(evals[0])
    degeneracy = int(np.count_nonzero(evals - e0 < DEGENERACY_TOL))
    excited = evals[evals - e0 >= DEGENERACY_TOL]
    gap = float(excited[0] - e0) if excited.size else 0.0
    counts = np.searchsorted(evals, grid, side="right")
    table = tuple((float(e), float(c / evals.size)) for e, c in zip(grid, counts))
    return SpectrumReport(evals, e0, gap, degeneracy, table)


class GroundState(NamedTuple):
    energy: float
    state: PureState
    degeneracy: int

    @property
    def degenerate(self) -> bool:
        return self.degeneracy > 1


def ground_state(op: HermitianOp) -> GroundState:
    """Lowest eigenpair with a fixed phase (largest-magnitude component real positive)."""
    try:
        evals, evecs = op.eigh
    except QuantumError as e:
        raise HamiltonianError(f"ground_state: {e}") from e
    vec = evecs[:, 0].copy()
    pivot = int(np.argmax(np.abs(vec)))
    vec *= np.exp(-1j * np.angle(vec[pivot]))
    degeneracy = int(np.count_nonzero(evals - evals[0] < DEGENERACY_TOL))
    if degeneracy > 1:
        log.debug("ground_state: %d-fold degenerate ground space", degeneracy)
    return GroundState(float(evals[0]), PureState(op.n_qubits, vec), degeneracy)
