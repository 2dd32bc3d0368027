# SPDX-License-Identifier: MIT
# SPDX-FileCopyrightText: 2025 qal-sim contributors
"""
Training loop in three modes plus schedule calculators.

One step on datum (x, y) with learning rate eta:

    exact    |psi> <- (I - eta H_x)|psi> / ||(I - eta H_x)|psi>||
             realised as U(x), then M_y on the label qubits, then U(x)^dagger
    sampled  same circuit with U_y on (label qubits, ancilla); the ancilla is measured and
             outcome 0 is kept. Outcome 1 aborts the trajectory (or, with
             continue_on_reject, the rejected branch is kept)
    oracle   sigma(beta) = exp(-beta H_S) rho0 exp(-beta H_S), beta = sum of eta_t,
             the averaged dynamics to leading order in eta

Bookkeeping per trajectory: beta = sum eta_t, gamma = sum eta_t^2, and the acceptance
estimate is the running product of per-step success probabilities.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Callable, ClassVar, Final, NamedTuple, Sequence

import numpy as np

from .datasets import LabeledDataset, Sample
from .encoding import Encoder, LabelScheme, build_perturbation
from .hamiltonians import average_hamiltonian
from .quantum import (
    Circuit,
    DensityState,
    Gate,
    HermitianOp,
    PureState,
    apply_circuit,
    apply_gate,
    expectation,
    matrix_exp_hermitian,
    measure_qubits,
    trace_norm,
)

log = logging.getLogger(__name__)

DEGENERATE_TOL: Final[float] = 1e-14  # squared norm below which a step has no survivor
DIVISION_GUARD: Final[float] = 1e-12  # smallest trace accepted as a conditional-loss denominator
LEMMA_SLACK: Final[float] = 1e-12  # float rounding allowance on top of 4 eta^2


class TrainerError(ValueError):
    """Raised on invalid training configuration or numerically undefined results."""
    pass


class DegenerateStepError(TrainerError):
    """The post-step state has (numerically) zero norm."""
    pass


class BoundViolationError(TrainerError):
    """A measured deviation exceeded its analytic bound."""
    pass


class TrainMode(str, enum.Enum):
    EXACT = "exact"
    SAMPLED = "sampled"
    ORACLE = "oracle"


class InitPolicy(str, enum.Enum):
    HAAR = "haar_random_pure"
    BASIS = "computational_basis_random"
    MIXED = "maximally_mixed"
    EXPLICIT = "explicit"


@dataclass(frozen=True, eq=False)
class TrainConfig:
    mode: TrainMode = TrainMode.EXACT
    eta: float | tuple[float, ...] = 0.1
    steps: int = 100
    seed: int = 0
    init: InitPolicy = InitPolicy.HAAR
    initial_state: PureState | DensityState | None = None
    loss_threshold: float | None = None
    continue_on_reject: bool = False
    max_attempts: int = 1000

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", TrainMode(self.mode))
        object.__setattr__(self, "init", InitPolicy(self.init))
        if self.steps < 0:
            raise TrainerError(f"steps: must be >= 0, got {self.steps}")
        if not isinstance(self.eta, (int, float)):
            etas = tuple(float(e) for e in self.eta)
            if len(etas) < self.steps:
                raise TrainerError(f"eta: schedule has {len(etas)} entries for {self.steps} steps")
            object.__setattr__(self, "eta", etas)
        for e in self.schedule():
            if not 0.0 < e <= 1.0:
                raise TrainerError(f"eta: learning rate must lie in (0, 1], got {e}")
        if self.init is InitPolicy.MIXED and self.mode is not TrainMode.ORACLE:
            raise TrainerError("init: maximally_mixed is only available in oracle mode")
        if self.init is InitPolicy.EXPLICIT and self.initial_state is None:
            raise TrainerError("init: explicit policy needs initial_state")
        explicit_mixed = isinstance(self.initial_state, DensityState)
        if explicit_mixed and self.mode is not TrainMode.ORACLE:
            raise TrainerError("initial_state: density matrices are only trained in oracle mode")
        if self.max_attempts < 1:
            raise TrainerError(f"max_attempts: must be >= 1, got {self.max_attempts}")

    def eta_at(self, step: int) -> float:
        return float(self.eta) if isinstance(self.eta, (int, float)) else self.eta[step]

    def schedule(self) -> np.ndarray:
        if isinstance(self.eta, (int, float)):
            return np.full(self.steps, float(self.eta))
        return np.asarray(self.eta[: self.steps], dtype=float)

    @property
    def beta(self) -> float:
        return float(self.schedule().sum())

    @property
    def gamma(self) -> float:
        return float((self.schedule() ** 2).sum())


class StepRecord(NamedTuple):
    step: int
    sample_id: int  # -1 in oracle mode
    loss: float  # <psi|H_x|psi> before the step (oracle: conditional loss)
    exact_loss: float | None  # <psi|H_S|psi> after the step, when H_S is known
    success_prob: float
    beta: float
    gamma: float
    accepted: bool


@dataclass(eq=False)
class TrainTrace:
    records: list[StepRecord]
    final_state: PureState | DensityState
    acceptance_estimate: float
    seed: int
    mode: TrainMode
    attempts: int = 1
    stopped_early: bool = False

    @property
    def beta(self) -> float:
        return self.records[-1].beta if self.records else 0.0

    @property
    def gamma(self) -> float:
        return self.records[-1].gamma if self.records else 0.0

    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.records])

    def summary(self) -> dict:
        last = self.records[-1] if self.records else None
        return {
            "mode": self.mode.value,
            "seed": self.seed,
            "steps": len(self.records),
            "attempts": self.attempts,
            "acceptance_estimate": self.acceptance_estimate,
            "beta": self.beta,
            "gamma": self.gamma,
            "final_loss": _record_loss(last) if last else None,
            "stopped_early": self.stopped_early,
        }


# ---------------------------------------------------------------------------
# single steps
# ---------------------------------------------------------------------------

class ExactStep(NamedTuple):
    state: PureState
    success_prob: float


@dataclass(frozen=True, eq=False)
class Accepted:
    state: PureState
    probability: float
    accepted: ClassVar[bool] = True


@dataclass(frozen=True, eq=False)
class Rejected:
    state: PureState  # rejected branch, after U(x)^dagger
    probability: float
    accepted: ClassVar[bool] = False


def _exact_update(
    state: PureState, circuit: Circuit, mask: np.ndarray, eta: float
) -> tuple[PureState, float, float]:
    """(new state, success probability, pre-step loss) for one exact step."""
    norm_sq = state.norm_sq
    phi = apply_circuit(state, circuit).amplitudes
    kept = float(np.vdot(phi[mask], phi[mask]).real)
    loss = 1.0 - kept / norm_sq
    scaled = np.where(mask, phi, (1.0 - eta) * phi)
    success = float(np.vdot(scaled, scaled).real) / norm_sq
    if success < DEGENERATE_TOL:
        raise DegenerateStepError(
            f"step: post-step norm {success:.3g} vanishes (state lies in the eta=1 kill space)"
        )
    rotated = PureState(state.n_qubits, scaled / math.sqrt(success * norm_sq))
    return apply_circuit(rotated, circuit, adjoint=True), success, loss


def train_step_exact(
    state: PureState, sample: Sample, encoder: Encoder, scheme: LabelScheme, eta: float
) -> ExactStep:
    """(I - eta H_x)|psi> renormalised, with the squared norm as success probability."""
    mask = scheme.outcome_mask(scheme.check_label(sample.label))
    new, success, _ = _exact_update(state, encoder.circuit(sample.payload), mask, eta)
    return ExactStep(new, success)


def train_step_sampled(
    state: PureState,
    sample: Sample,
    encoder: Encoder,
    scheme: LabelScheme,
    eta: float,
    rng: np.random.Generator,
) -> Accepted | Rejected:
    """Physical step: ancilla block encoding of M_y, ancilla measured, outcome 0 kept."""
    n = state.n_qubits
    circuit = encoder.circuit(sample.payload)
    ops = build_perturbation(sample.label, scheme, eta)
    register = state.normalized().kron(PureState.zero(1))
    register = apply_circuit(register, circuit.on_register(n + 1))
    register = apply_gate(register, Gate.dense(ops.u_y, scheme.measured + (n,), check=False))
    outcome, collapsed, prob = measure_qubits(register, [n], rng)
    branch = collapsed.amplitudes.reshape(1 << n, 2)[:, outcome]
    system = apply_circuit(PureState(n, branch).normalized(), circuit, adjoint=True)
    return Accepted(system, prob) if outcome == 0 else Rejected(system, prob)


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

def initial_state(
    config: TrainConfig, n_qubits: int, rng: np.random.Generator
) -> PureState | DensityState:
    if config.init is InitPolicy.EXPLICIT:
        st = config.initial_state
        if st.n_qubits != n_qubits:
            raise TrainerError(f"initial_state: {st.n_qubits} qubits, encoder has {n_qubits}")
        return st.copy()
    if config.init is InitPolicy.MIXED:
        return DensityState.maximally_mixed(n_qubits)
    if config.init is InitPolicy.BASIS:
        return PureState.random_basis(n_qubits, rng)
    return PureState.haar_random(n_qubits, rng)


def train(
    dataset: LabeledDataset | Sequence[Sample],
    encoder: Encoder,
    scheme: LabelScheme,
    config: TrainConfig,
    h_s: HermitianOp | None = None,
    on_step: Callable[[StepRecord, PureState | DensityState | None], None] | None = None,
) -> TrainTrace:
    """Run one training trajectory. `on_step` sees every record with the post-step state.

    Oracle mode passes None for the state; `oracle_state(h_s, rho0, rec.beta)` rebuilds it.
    """
    samples = list(dataset)
    if not samples:
        raise TrainerError("train: dataset is empty")
    if config.mode is TrainMode.ORACLE:
        return _train_oracle(samples, encoder, scheme, config, h_s, on_step)
    if config.mode is TrainMode.SAMPLED:
        return _train_sampled(samples, encoder, scheme, config, h_s, on_step)
    return _train_exact(samples, encoder, scheme, config, h_s, on_step)


def _exact_loss(state: PureState, h_s: HermitianOp | None) -> float | None:
    return None if h_s is None else expectation(state, h_s)


def _record_loss(record: StepRecord) -> float:
    return record.exact_loss if record.exact_loss is not None else record.loss


def _should_stop(config: TrainConfig, record: StepRecord) -> bool:
    if config.loss_threshold is None:
        return False
    return _record_loss(record) < config.loss_threshold


def _train_exact(samples, encoder, scheme, config, h_s, on_step) -> TrainTrace:
    rng = np.random.default_rng(config.seed)
    state = initial_state(config, encoder.n_qubits, rng)
    records: list[StepRecord] = []
    acceptance, beta, gamma = 1.0, 0.0, 0.0
    stopped = False
    for t in range(config.steps):
        eta = config.eta_at(t)
        sample = samples[int(rng.integers(len(samples)))]
        mask = scheme.outcome_mask(scheme.check_label(sample.label))
        state, success, loss = _exact_update(state, encoder.circuit(sample.payload), mask, eta)
        acceptance *= success
        beta += eta
        gamma += eta * eta
        rec = StepRecord(
            t + 1, sample.sample_id, loss, _exact_loss(state, h_s), success, beta, gamma, True
        )
        records.append(rec)
        log.debug(
            "step %d: sample %d loss %.4f success %.4f", t + 1, sample.sample_id, loss, success
        )
        if on_step:
            on_step(rec, state)
        if _should_stop(config, rec):
            stopped = True
            break
    return TrainTrace(records, state, acceptance, config.seed, config.mode, stopped_early=stopped)


def _train_sampled(samples, encoder, scheme, config, h_s, on_step) -> TrainTrace:
    rng = np.random.default_rng(config.seed)
    for attempt in range(1, config.max_attempts + 1):
        state = initial_state(config, encoder.n_qubits, rng)
        records: list[StepRecord] = []
        acceptance, beta, gamma = 1.0, 0.0, 0.0
        aborted = stopped = False
        for t in range(config.steps):
            eta = config.eta_at(t)
            sample = samples[int(rng.integers(len(samples)))]
            loss = 1.0 - _correct_probability(state, sample, encoder, scheme)
            outcome = train_step_sampled(state, sample, encoder, scheme, eta, rng)
            acceptance *= outcome.probability
            if not outcome.accepted and not config.continue_on_reject:
                aborted = True
                log.debug("attempt %d rejected at step %d", attempt, t + 1)
                break
            state = outcome.state
            beta += eta
            gamma += eta * eta
            rec = StepRecord(
                t + 1, sample.sample_id, loss, _exact_loss(state, h_s),
                outcome.probability, beta, gamma, outcome.accepted,
            )
            records.append(rec)
            if on_step:
                on_step(rec, state)
            if _should_stop(config, rec):
                stopped = True
                break
        if not aborted:
            return TrainTrace(
                records, state, acceptance, config.seed, config.mode,
                attempts=attempt, stopped_early=stopped,
            )
    raise TrainerError(f"sampled training: no trajectory survived {config.max_attempts} attempts")


def _correct_probability(
    state: PureState, sample: Sample, encoder: Encoder, scheme: LabelScheme
) -> float:
    phi = apply_circuit(state, encoder.circuit(sample.payload)).amplitudes
    mask = scheme.outcome_mask(sample.label)
    return float(np.vdot(phi[mask], phi[mask]).real / state.norm_sq)


def _train_oracle(samples, encoder, scheme, config, h_s, on_step) -> TrainTrace:
    rng = np.random.default_rng(config.seed)
    rho0 = initial_state(config, encoder.n_qubits, rng)
    if h_s is None:
        h_s = average_hamiltonian(samples, encoder, scheme)
    evals, _ = h_s.eigh
    weights = _eigen_weights(h_s, rho0)
    etas = config.schedule()
    betas = np.cumsum(etas)
    gammas = np.cumsum(etas**2)
    records: list[StepRecord] = []
    prev = 1.0
    stopped = False
    for t, (beta, gamma) in enumerate(zip(betas, gammas)):
        success, loss = _oracle_point(evals, weights, beta)
        rec = StepRecord(t + 1, -1, loss, loss, success / prev, float(beta), float(gamma), True)
        prev = success
        records.append(rec)
        if on_step:
            on_step(rec, None)
        if _should_stop(config, rec):
            stopped = True
            break
    beta_final = records[-1].beta if records else 0.0
    final = oracle_state(h_s, rho0, beta_final)
    return TrainTrace(records, final, prev, config.seed, config.mode, stopped_early=stopped)


# ---------------------------------------------------------------------------
# imaginary-time oracle
# ---------------------------------------------------------------------------

class OracleResult(NamedTuple):
    state: DensityState  # unnormalised sigma(beta)
    success_prob: float
    loss: float  # Tr(H_S sigma) / Tr(sigma)


class TradeoffPoint(NamedTuple):
    beta: float
    success_prob: float
    loss: float


def _as_density(rho: PureState | DensityState) -> DensityState:
    return rho.to_density() if isinstance(rho, PureState) else rho


def evolve_oracle(rho0: PureState | DensityState, h_s: HermitianOp, beta: float) -> OracleResult:
    """sigma(beta) = exp(-beta H_S) rho0 exp(-beta H_S), full matrix conjugation."""
    if beta < 0:
        raise TrainerError(f"beta: must be >= 0, got {beta}")
    rho = _as_density(rho0)
    if rho.dim != h_s.dim:
        raise TrainerError(f"oracle: state dim {rho.dim} != Hamiltonian dim {h_s.dim}")
    e = matrix_exp_hermitian(h_s, -beta)
    sigma = DensityState(rho.n_qubits, e @ rho.matrix @ e)
    success = sigma.trace / rho.trace
    if success < DIVISION_GUARD:
        raise TrainerError(f"oracle: success probability {success:.3g} below {DIVISION_GUARD:g}")
    loss = float(np.einsum("ij,ji->", h_s.matrix, sigma.matrix).real) / sigma.trace
    return OracleResult(sigma, float(success), loss)


def _eigen_weights(h_s: HermitianOp, rho0: PureState | DensityState) -> np.ndarray:
    """Diagonal of rho0 in the eigenbasis of H_S (normalised to unit total)."""
    _, vecs = h_s.eigh
    if isinstance(rho0, PureState):
        w = np.abs(vecs.conj().T @ rho0.amplitudes) ** 2
    else:
        w = np.einsum("ki,kl,li->i", vecs.conj(), rho0.matrix, vecs).real
    return w / w.sum()


def _oracle_point(evals: np.ndarray, weights: np.ndarray, beta: float) -> tuple[float, float]:
    damped = weights * np.exp(-2.0 * beta * (evals - evals[0]))
    success = float(damped.sum() * math.exp(-2.0 * beta * evals[0]))
    if success < DIVISION_GUARD:
        raise TrainerError(f"oracle: success probability {success:.3g} at beta={beta:g}")
    return success, float((evals * damped).sum() / damped.sum())


def oracle_state(
    h_s: HermitianOp, rho0: PureState | DensityState, beta: float
) -> PureState | DensityState:
    """Normalised post-selected oracle state; stays a vector for pure inputs."""
    evals, vecs = h_s.eigh
    damp = np.exp(-beta * (evals - evals[0]))
    if isinstance(rho0, PureState):
        vec = vecs @ (damp * (vecs.conj().T @ rho0.amplitudes))
        return PureState(rho0.n_qubits, vec).normalized()
    e = (vecs * damp) @ vecs.conj().T
    return DensityState(rho0.n_qubits, e @ rho0.matrix @ e).normalized()


def predicted_tradeoff(
    h_s: HermitianOp, rho0: PureState | DensityState, betas: Sequence[float]
) -> list[TradeoffPoint]:
    """(success probability, conditional loss) along the oracle curve, O(T eta^2) dropped."""
    evals, _ = h_s.eigh
    weights = _eigen_weights(h_s, rho0)
    points = []
    for beta in betas:
        if beta < 0:
            raise TrainerError(f"beta: must be >= 0, got {beta}")
        success, loss = _oracle_point(evals, weights, float(beta))
        points.append(TradeoffPoint(float(beta), success, loss))
    return points


def excited_weight_ratio(
    h_s: HermitianOp, rho0: PureState | DensityState, betas: Sequence[float], tol: float = 1e-8
) -> np.ndarray:
    """Excited-state weight over ground-space weight of sigma(beta) for each beta."""
    evals, _ = h_s.eigh
    weights = _eigen_weights(h_s, rho0)
    ground = evals - evals[0] < tol
    if weights[ground].sum() <= 0:
        raise TrainerError("excited_weight_ratio: initial state has no ground-space overlap")
    out = []
    for beta in betas:
        damped = weights * np.exp(-2.0 * beta * (evals - evals[0]))
        out.append(damped[~ground].sum() / damped[ground].sum())
    return np.asarray(out)


# ---------------------------------------------------------------------------
# bounds and schedules
# ---------------------------------------------------------------------------

def averaged_step(h_list: Sequence[HermitianOp], rho: DensityState, eta: float) -> np.ndarray:
    """E_x (I - eta H_x) rho (I - eta H_x) as a dense matrix."""
    dim = rho.dim
    eye = np.eye(dim)
    acc = np.zeros((dim, dim), dtype=np.complex128)
    for h in h_list:
        k = eye - eta * h.matrix
        acc += k @ rho.matrix @ k
    return acc / len(h_list)


def verify_single_step_lemma(
    h_list: Sequence[HermitianOp], rho: DensityState, eta: float, *, strict: bool = True
) -> float:
    """Trace-norm distance between one averaged step and exp(-eta H_S) rho exp(-eta H_S)."""
    if not h_list:
        raise TrainerError("single-step check: empty Hamiltonian list")
    h_s = HermitianOp.average(list(h_list))
    e = matrix_exp_hermitian(h_s, -eta)
    deviation = trace_norm(averaged_step(h_list, rho, eta) - e @ rho.matrix @ e)
    bound = 4.0 * eta**2 * trace_norm(rho.matrix)
    if strict and deviation > bound + LEMMA_SLACK:
        raise BoundViolationError(
            f"single-step deviation {deviation:.6g} exceeds 4 eta^2 = {bound:.6g}"
        )
    return deviation


class Schedule(NamedTuple):
    beta: float
    eta: float
    steps: int
    c4: float
    gamma: float


def schedule_from_theorem(
    c1: float, c2: float, c3: float, eps: float, g: float = 0.0
) -> Schedule:
    """Constant-probability schedule for a heavy-tailed H_S.

    beta = 3 ln(1+c2) / (c3 eps), c4 = exp(-6 (1+c1) ln(1+c2) / c3) c2 / 2,
    gamma = c3 c4 / 40, eta = gamma / beta, T = ceil(beta^2 / gamma).
    """
    if not 0 < c1 < 1:
        raise TrainerError(f"c1: must lie in (0, 1), got {c1}")
    if not 0 < c2 <= 0.1:
        raise TrainerError(f"c2: must lie in (0, 0.1], got {c2}")
    if not 0 < c3 < 1:
        raise TrainerError(f"c3: must lie in (0, 1), got {c3}")
    if eps <= 0:
        raise TrainerError(f"eps: must be > 0, got {eps}")
    if g < 0 or g / eps > c1:
        raise TrainerError(f"g: need 0 <= g/eps <= c1, got g={g}, eps={eps}, c1={c1}")
    log1p = math.log1p(c2)
    beta = 3.0 * log1p / (c3 * eps)
    c4 = math.exp(-6.0 * (1.0 + c1) * log1p / c3) * c2 / 2.0
    gamma = c3 * c4 / 40.0
    return Schedule(beta, gamma / beta, math.ceil(beta**2 / gamma), c4, gamma)


class GlobalSchedule(NamedTuple):
    beta: float
    eta: float
    steps: int


def schedule_for_global_minimum(sigma_g: float, gap: float, g: float, c: float) -> GlobalSchedule:
    """Schedule reaching the ground space with probability >= c.

    beta satisfies exp(-2 beta gap) < sigma_g c / 4 and eta satisfies
    beta eta exp(2 beta g) < sigma_g c / 16; sigma_g is the initial ground-space overlap.
    """
    if not 0 < sigma_g <= 1:
        raise TrainerError(f"sigma_g: must lie in (0, 1], got {sigma_g}")
    if gap <= 0:
        raise TrainerError(f"gap: must be > 0, got {gap}")
    if not 0 < c < 1:
        raise TrainerError(f"c: must lie in (0, 1), got {c}")
    if g < 0:
        raise TrainerError(f"g: must be >= 0, got {g}")
    target = sigma_g * c
    beta = 1.01 * math.log(4.0 / target) / (2.0 * gap)
    eta = 0.99 * target / (16.0 * beta * math.exp(2.0 * beta * g))
    return GlobalSchedule(beta, eta, math.ceil(beta / eta))


def loss_gradient(state: PureState, h: HermitianOp) -> np.ndarray:
    """Gradient of <psi|H|psi> with respect to <psi|: 2 H|psi>."""
    return 2.0 * (h.matrix @ state.normalized().amplitudes)


def projected_gradient_step(state: PureState, h: HermitianOp, eta: float) -> PureState:
    """psi - (eta/2) grad, renormalised onto the unit sphere."""
    psi = state.normalized().amplitudes
    return PureState(state.n_qubits, psi - 0.5 * eta * loss_gradient(state, h)).normalized()
