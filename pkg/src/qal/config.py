# SPDX-License-Identifier: MIT
# SPDX-FileCopyrightText: 2025 qal-sim contributors
"""
Experiment configuration: named recipes plus YAML/JSON overrides.

YAML schema (every section optional; a file overrides its recipe section by section):

schema_version: 1
recipe: fashion-mnist-10q          # toy | fashion-mnist-10q | mnist-10q | aubry-andre-10q
                                   # | cluster-ising-10q | fashion-mnist-5q-noise
seed: 1234
out_dir: runs/fmnist
threads: 4                         # 0 = all available cores

dataset:  { name: fashion-mnist, n_train: 500, n_test: 500, classes: [1, 9], side: 10,
            angle_range: pi }      # synthetic: data_dim, k_classes, spread
                                   # aubry-andre: n_qubits, g, v_range
                                   # cluster-ising: n_qubits, h_range
encoder:  { kind: classical, n_qubits: 10, label_qubits: [0] }
                                   # hamiltonian / quantum_state: t, cache_size
                                   # quantum_state: global_terms, global_k
train:    { mode: exact, eta: 0.1, steps: 300, init: haar_random_pure,
            loss_threshold: null, continue_on_reject: false, max_attempts: 1000 }
eval:     { interval: 10, ks: [1, 29, inf], delta: 0.05 }
majority: { copies: 0, shared_sequence: false }
noise:    { rates: [0.0, 0.005], p1_ratio: 0.1, convention: pauli }
tradeoff: { betas: [0, 1, 2, 5, 10, 20, 40], pure: true, mixed: false }
reuse:    { tau: 0.15, predictions: 50 }
spectrum: { grid_points: 101 }

Unknown keys raise ConfigError. Resolved configs round-trip through to_dict().
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Final

import yaml

SCHEMA_VERSION: Final[int] = 1
DATASETS: Final[tuple[str, ...]] = (
    "synthetic", "fashion-mnist", "mnist", "aubry-andre", "cluster-ising",
)
ENCODERS: Final[tuple[str, ...]] = ("classical", "hamiltonian", "quantum_state")
MODES: Final[tuple[str, ...]] = ("exact", "sampled", "oracle")
INITS: Final[tuple[str, ...]] = (
    "haar_random_pure", "computational_basis_random", "maximally_mixed",
)
ANGLE_RANGES: Final[tuple[str, ...]] = ("pi", "2pi", "unit")
CONVENTIONS: Final[tuple[str, ...]] = ("pauli", "replace")


class ConfigError(ValueError):
    """Raised when an experiment configuration cannot be loaded or fails validation."""
    pass


# ---------------------------------------------------------------------------
# sections
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DatasetSection:
    name: str = "synthetic"
    n_train: int = 16
    n_test: int = 8
    classes: tuple[int, ...] | None = None  # image datasets: original class ids kept
    side: int = 10
    angle_range: str = "pi"
    data_dim: int = 8
    k_classes: int = 2
    spread: float = 0.3
    n_qubits: int = 10
    g: float = 1.0
    v_range: tuple[float, float] = (0.0, 4.0)
    h_range: tuple[float, float] = (0.0, 2.0)


@dataclass(frozen=True)
class EncoderSection:
    kind: str = "classical"
    n_qubits: int | None = None  # classical: suggest_qubits(data_dim) when unset
    label_qubits: tuple[int, ...] | None = None
    t: float | None = None  # kind default when unset
    cache_size: int = 16
    global_terms: int = 120
    global_k: int = 4


@dataclass(frozen=True)
class TrainSection:
    mode: str = "exact"
    eta: float = 0.1
    steps: int = 100
    init: str = "haar_random_pure"
    loss_threshold: float | None = None
    continue_on_reject: bool = False
    max_attempts: int = 1000


@dataclass(frozen=True)
class EvalSection:
    interval: int = 10
    ks: tuple[float, ...] = (1, 29, math.inf)
    delta: float = 0.05


@dataclass(frozen=True)
class MajoritySection:
    copies: int = 0  # independently trained copies; 0 disables the ensemble
    shared_sequence: bool = False


@dataclass(frozen=True)
class NoiseSection:
    rates: tuple[float, ...] = (0.0, 0.005)
    p1_ratio: float = 0.1
    convention: str = "pauli"


@dataclass(frozen=True)
class TradeoffSection:
    betas: tuple[float, ...] = (0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 40.0)
    pure: bool = True
    mixed: bool = False


@dataclass(frozen=True)
class ReuseSection:
    tau: float = 0.15
    predictions: int = 50


@dataclass(frozen=True)
class SpectrumSection:
    grid_points: int = 101


@dataclass(frozen=True)
class ExperimentConfig:
    recipe: str = "toy"
    seed: int = 0
    out_dir: str = "runs/toy"
    threads: int = 0  # 0: default_threads()
    dataset: DatasetSection = field(default_factory=DatasetSection)
    encoder: EncoderSection = field(default_factory=EncoderSection)
    train: TrainSection = field(default_factory=TrainSection)
    eval: EvalSection = field(default_factory=EvalSection)
    majority: MajoritySection = field(default_factory=MajoritySection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    tradeoff: TradeoffSection = field(default_factory=TradeoffSection)
    reuse: ReuseSection = field(default_factory=ReuseSection)
    spectrum: SpectrumSection = field(default_factory=SpectrumSection)

    def to_dict(self) -> dict[str, Any]:
        """Plain nested dict (tuples as lists, inf as the string 'inf') with schema_version."""
        data = asdict(self)
        data["eval"]["ks"] = ["inf" if k == math.inf else int(k) for k in self.eval.ks]
        data["schema_version"] = SCHEMA_VERSION
        return json.loads(json.dumps(data))


_SECTIONS: Final[dict[str, type]] = {
    "dataset": DatasetSection,
    "encoder": EncoderSection,
    "train": TrainSection,
    "eval": EvalSection,
    "majority": MajoritySection,
    "noise": NoiseSection,
    "tradeoff": TradeoffSection,
    "reuse": ReuseSection,
    "spectrum": SpectrumSection,
}
_TOP_LEVEL: Final[frozenset[str]] = frozenset(
    {"schema_version", "recipe", "seed", "out_dir", "threads", *_SECTIONS}
)


# ---------------------------------------------------------------------------
# recipes
# ---------------------------------------------------------------------------

RECIPES: Final[dict[str, dict[str, Any]]] = {
    "toy": {
        "out_dir": "runs/toy",
        "dataset": {"name": "synthetic", "n_train": 16, "n_test": 8, "data_dim": 8},
        "encoder": {"kind": "classical", "n_qubits": 3},
        "train": {"steps": 30, "eta": 0.1},
        "eval": {"interval": 1, "ks": [1, 3, "inf"]},
        "noise": {"rates": [0.0, 0.01]},
        "tradeoff": {"betas": [0.0, 0.5, 1.0, 2.0, 4.0], "mixed": True},
        "reuse": {"tau": 0.5, "predictions": 5},
    },
    "fashion-mnist-10q": {
        "out_dir": "runs/fashion-mnist-10q",
        "dataset": {"name": "fashion-mnist", "n_train": 500, "n_test": 500, "classes": [1, 9]},
        "encoder": {"kind": "classical", "n_qubits": 10},
        "train": {"steps": 300, "eta": 0.1},
        "eval": {"interval": 10, "ks": [1, 29, "inf"]},
    },
    "mnist-10q": {
        "out_dir": "runs/mnist-10q",
        "dataset": {"name": "mnist", "n_train": 500, "n_test": 500, "classes": [1, 9]},
        "encoder": {"kind": "classical", "n_qubits": 10},
        "train": {"steps": 300, "eta": 0.1},
    },
    "aubry-andre-10q": {
        "out_dir": "runs/aubry-andre-10q",
        "dataset": {"name": "aubry-andre", "n_train": 500, "n_test": 500, "n_qubits": 10},
        "encoder": {"kind": "hamiltonian", "n_qubits": 10, "t": 2.0, "cache_size": 0},
        "train": {"steps": 300, "eta": 0.1},
    },
    "cluster-ising-10q": {
        "out_dir": "runs/cluster-ising-10q",
        "dataset": {"name": "cluster-ising", "n_train": 500, "n_test": 500, "n_qubits": 10},
        "encoder": {"kind": "quantum_state", "n_qubits": 10, "t": 1.0, "cache_size": 0},
        "train": {"steps": 300, "eta": 0.1},
    },
    "fashion-mnist-5q-noise": {
        "out_dir": "runs/fashion-mnist-5q-noise",
        "dataset": {
            "name": "fashion-mnist", "n_train": 500, "n_test": 500, "classes": [1, 9], "side": 5,
        },
        "encoder": {"kind": "classical", "n_qubits": 5},
        "train": {"steps": 200, "eta": 0.2},
        "noise": {"rates": [0.0, 0.001, 0.005, 0.01], "p1_ratio": 0.1},
    },
}


# ---------------------------------------------------------------------------
# field parsers
# ---------------------------------------------------------------------------

def _parse_int(val: Any, *, field: str, lo: int | None = None) -> int:
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(f"{field}: expected an integer, got {val!r}")
    if lo is not None and val < lo:
        raise ConfigError(f"{field}: must be >= {lo}, got {val}")
    return val


def _parse_float(
    val: Any, *, field: str, lo: float | None = None, hi: float | None = None,
    lo_open: bool = False,
) -> float:
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{field}: expected a number, got {val!r}")
    x = float(val)
    if math.isnan(x):
        raise ConfigError(f"{field}: NaN is not allowed")
    if lo is not None and (x < lo or (lo_open and x == lo)):
        raise ConfigError(f"{field}: must be {'>' if lo_open else '>='} {lo}, got {x}")
    if hi is not None and x > hi:
        raise ConfigError(f"{field}: must be <= {hi}, got {x}")
    return x


def _parse_bool(val: Any, *, field: str) -> bool:
    if not isinstance(val, bool):
        raise ConfigError(f"{field}: expected true or false, got {val!r}")
    return val


def _parse_choice(val: Any, choices: tuple[str, ...], *, field: str) -> str:
    if val not in choices:
        raise ConfigError(f"{field}: expected one of {', '.join(choices)}, got {val!r}")
    return val


def _parse_list(val: Any, *, field: str) -> list:
    if not isinstance(val, (list, tuple)):
        raise ConfigError(f"{field}: must be a list")
    return list(val)


def _parse_range(val: Any, *, field: str) -> tuple[float, float]:
    items = _parse_list(val, field=field)
    if len(items) != 2:
        raise ConfigError(f"{field}: expected [low, high]")
    lo, hi = (_parse_float(v, field=field) for v in items)
    if lo > hi:
        raise ConfigError(f"{field}: low {lo} exceeds high {hi}")
    return lo, hi


def _parse_k(val: Any, *, field: str) -> float:
    if val == "inf" or (isinstance(val, float) and val == math.inf):
        return math.inf
    k = _parse_int(val, field=field, lo=1)
    if k % 2 == 0:
        raise ConfigError(f"{field}: majority vote needs an odd K, got {k}")
    return k


def _check_keys(data: Any, allowed: frozenset[str] | set[str], *, field: str) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"{field}: must be a mapping")
    unknown = sorted(set(map(str, data)) - set(allowed))
    if unknown:
        raise ConfigError(f"{field}: unknown keys {', '.join(unknown)}")
    return data


# ---------------------------------------------------------------------------
# section parsers
# ---------------------------------------------------------------------------

def _parse_dataset(d: dict) -> DatasetSection:
    f = "dataset"
    out: dict[str, Any] = {}
    if "name" in d:
        out["name"] = _parse_choice(d["name"], DATASETS, field=f"{f}.name")
    for key, lo in (("n_train", 1), ("n_test", 0), ("side", 1), ("data_dim", 1),
                    ("k_classes", 2), ("n_qubits", 3)):
        if key in d:
            out[key] = _parse_int(d[key], field=f"{f}.{key}", lo=lo)
    if d.get("classes") is not None:
        classes = tuple(_parse_int(c, field=f"{f}.classes", lo=0)
                        for c in _parse_list(d["classes"], field=f"{f}.classes"))
        if len(classes) < 2 or len(set(classes)) != len(classes):
            raise ConfigError(f"{f}.classes: need at least two distinct class ids")
        out["classes"] = classes
    if "angle_range" in d:
        out["angle_range"] = _parse_choice(d["angle_range"], ANGLE_RANGES, field=f"{f}.angle_range")
    if "spread" in d:
        out["spread"] = _parse_float(d["spread"], field=f"{f}.spread", lo=0.0)
    if "g" in d:
        out["g"] = _parse_float(d["g"], field=f"{f}.g", lo=0.0, lo_open=True)
    for key in ("v_range", "h_range"):
        if key in d:
            out[key] = _parse_range(d[key], field=f"{f}.{key}")
    return DatasetSection(**out)


def _parse_encoder(d: dict) -> EncoderSection:
    f = "encoder"
    out: dict[str, Any] = {}
    if "kind" in d:
        out["kind"] = _parse_choice(d["kind"], ENCODERS, field=f"{f}.kind")
    if d.get("n_qubits") is not None:
        out["n_qubits"] = _parse_int(d["n_qubits"], field=f"{f}.n_qubits", lo=1)
    if d.get("label_qubits") is not None:
        qs = tuple(_parse_int(q, field=f"{f}.label_qubits", lo=0)
                   for q in _parse_list(d["label_qubits"], field=f"{f}.label_qubits"))
        if not qs or len(set(qs)) != len(qs):
            raise ConfigError(f"{f}.label_qubits: need distinct qubit indices")
        out["label_qubits"] = qs
    if d.get("t") is not None:
        out["t"] = _parse_float(d["t"], field=f"{f}.t", lo=0.0, lo_open=True)
    for key, lo in (("cache_size", 0), ("global_terms", 0), ("global_k", 1)):
        if key in d:
            out[key] = _parse_int(d[key], field=f"{f}.{key}", lo=lo)
    return EncoderSection(**out)


def _parse_train(d: dict) -> TrainSection:
    f = "train"
    out: dict[str, Any] = {}
    if "mode" in d:
        out["mode"] = _parse_choice(d["mode"], MODES, field=f"{f}.mode")
    if "eta" in d:
        out["eta"] = _parse_float(d["eta"], field=f"{f}.eta", lo=0.0, hi=1.0, lo_open=True)
    if "steps" in d:
        out["steps"] = _parse_int(d["steps"], field=f"{f}.steps", lo=0)
    if "init" in d:
        out["init"] = _parse_choice(d["init"], INITS, field=f"{f}.init")
    if d.get("loss_threshold") is not None:
        out["loss_threshold"] = _parse_float(
            d["loss_threshold"], field=f"{f}.loss_threshold", lo=0.0, hi=1.0
        )
    if "continue_on_reject" in d:
        out["continue_on_reject"] = _parse_bool(
            d["continue_on_reject"], field=f"{f}.continue_on_reject"
        )
    if "max_attempts" in d:
        out["max_attempts"] = _parse_int(d["max_attempts"], field=f"{f}.max_attempts", lo=1)
    section = TrainSection(**out)
    if section.init == "maximally_mixed" and section.mode != "oracle":
        raise ConfigError(f"{f}.init: maximally_mixed requires mode oracle")
    return section


def _parse_eval(d: dict) -> EvalSection:
    f = "eval"
    out: dict[str, Any] = {}
    if "interval" in d:
        out["interval"] = _parse_int(d["interval"], field=f"{f}.interval", lo=1)
    if "ks" in d:
        ks = _parse_list(d["ks"], field=f"{f}.ks")
        out["ks"] = tuple(_parse_k(k, field=f"{f}.ks") for k in ks)
    if "delta" in d:
        out["delta"] = _parse_float(d["delta"], field=f"{f}.delta", lo=0.0, hi=1.0, lo_open=True)
    return EvalSection(**out)


def _parse_majority(d: dict) -> MajoritySection:
    out: dict[str, Any] = {}
    if "copies" in d:
        copies = _parse_int(d["copies"], field="majority.copies", lo=0)
        if copies and copies % 2 == 0:
            raise ConfigError(f"majority.copies: must be odd, got {copies}")
        out["copies"] = copies
    if "shared_sequence" in d:
        out["shared_sequence"] = _parse_bool(d["shared_sequence"], field="majority.shared_sequence")
    return MajoritySection(**out)


def _parse_noise(d: dict) -> NoiseSection:
    out: dict[str, Any] = {}
    if "rates" in d:
        out["rates"] = tuple(_parse_float(p, field="noise.rates", lo=0.0, hi=1.0)
                             for p in _parse_list(d["rates"], field="noise.rates"))
    if "p1_ratio" in d:
        out["p1_ratio"] = _parse_float(d["p1_ratio"], field="noise.p1_ratio", lo=0.0, hi=1.0)
    if "convention" in d:
        out["convention"] = _parse_choice(d["convention"], CONVENTIONS, field="noise.convention")
    return NoiseSection(**out)


def _parse_tradeoff(d: dict) -> TradeoffSection:
    out: dict[str, Any] = {}
    if "betas" in d:
        betas = tuple(_parse_float(b, field="tradeoff.betas", lo=0.0)
                      for b in _parse_list(d["betas"], field="tradeoff.betas"))
        if not betas:
            raise ConfigError("tradeoff.betas: must not be empty")
        out["betas"] = betas
    for key in ("pure", "mixed"):
        if key in d:
            out[key] = _parse_bool(d[key], field=f"tradeoff.{key}")
    return TradeoffSection(**out)


def _parse_reuse(d: dict) -> ReuseSection:
    out: dict[str, Any] = {}
    if "tau" in d:
        out["tau"] = _parse_float(d["tau"], field="reuse.tau", lo=0.0, hi=1.0, lo_open=True)
    if "predictions" in d:
        out["predictions"] = _parse_int(d["predictions"], field="reuse.predictions", lo=1)
    return ReuseSection(**out)


def _parse_spectrum(d: dict) -> SpectrumSection:
    out: dict[str, Any] = {}
    if "grid_points" in d:
        out["grid_points"] = _parse_int(d["grid_points"], field="spectrum.grid_points", lo=2)
    return SpectrumSection(**out)


_PARSERS: Final[dict[str, Any]] = {
    "dataset": _parse_dataset,
    "encoder": _parse_encoder,
    "train": _parse_train,
    "eval": _parse_eval,
    "majority": _parse_majority,
    "noise": _parse_noise,
    "tradeoff": _parse_tradeoff,
    "reuse": _parse_reuse,
    "spectrum": _parse_spectrum,
}


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------

def _section_fields(name: str) -> set[str]:
    return set(_SECTIONS[name].__dataclass_fields__)


def parse_config(data: dict[str, Any]) -> ExperimentConfig:
    """Validate a raw mapping (recipe name plus overrides) into an ExperimentConfig.

    Args:
        data: Top-level mapping as loaded from YAML/JSON

    Returns:
        Fully-resolved configuration with recipe defaults filled in

    Raises:
        ConfigError: On unknown keys, bad values or an unknown recipe
    """
    data = _check_keys(data, _TOP_LEVEL, field="config")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
    recipe = data.get("recipe", "toy")
    if recipe not in RECIPES:
        raise ConfigError(f"recipe: unknown recipe {recipe!r} (known: {', '.join(RECIPES)})")
    merged = copy.deepcopy(RECIPES[recipe])
    for key, value in data.items():
        if key in _SECTIONS:
            section = _check_keys(value or {}, _section_fields(key), field=key)
            merged.setdefault(key, {}).update(section)
        elif key != "schema_version":
            merged[key] = value

    kwargs: dict[str, Any] = {"recipe": recipe}
    if "seed" in merged:
        kwargs["seed"] = _parse_int(merged["seed"], field="seed", lo=0)
    if "out_dir" in merged:
        if not isinstance(merged["out_dir"], str) or not merged["out_dir"]:
            raise ConfigError("out_dir: must be a nonempty string")
        kwargs["out_dir"] = merged["out_dir"]
    if "threads" in merged:
        kwargs["threads"] = _parse_int(merged["threads"], field="threads", lo=0)
    for name, parser in _PARSERS.items():
        section = _check_keys(merged.get(name, {}), _section_fields(name), field=name)
        kwargs[name] = parser(section)
    return ExperimentConfig(**kwargs)


def load_config(
    path: str | Path | None = None,
    recipe: str | None = None,
    overrides: dict[str, Any] | None = None,
) -> ExperimentConfig:
    """Load a config file (YAML or JSON) on top of a recipe.

    Args:
        path: Config file; None means recipe defaults only
        recipe: Recipe name; takes precedence over the file's `recipe` key
        overrides: Top-level values (seed, out_dir, threads) applied last

    Returns:
        Validated ExperimentConfig

    Raises:
        ConfigError: If the file cannot be read or contains invalid settings
    """
    data: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"Failed to load config from {path}: {e}")
        if not isinstance(data, dict):
            raise ConfigError("Top-level config must be a mapping")
    if recipe is not None:
        data["recipe"] = recipe
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    return parse_config(data)
