"""
Quantum automated learning simulator

State-vector and density-matrix simulation of training by repeated post-selected
perturbation, with evaluation, noise sweeps and numerical bound checks.
"""

__version__ = "0.1.0"

from . import artifacts
from . import config
from . import datasets
from . import encoding
from . import evaluation
from . import hamiltonians
from . import noise
from . import quantum
from . import trainer
from . import verify

from .config import ConfigError, load_config
from .evaluation import evaluate, k_accuracy
from .trainer import TrainConfig, TrainMode, train

__all__ = [
    # Modules
    "artifacts", "config", "datasets", "encoding", "evaluation", "hamiltonians",
    "noise", "quantum", "trainer", "verify",
    # Key functions and classes
    "ConfigError", "load_config", "evaluate", "k_accuracy", "TrainConfig", "TrainMode", "train",
]
