"""Experiment configuration: per-experiment defaults and a stable hash.

The three experiments ship with fixed hyperparameters (network widths,
learning rates, epochs, K, the evidential regularizer weight) chosen
for single-core desk-scale runs; any field can be overridden through
``default_config`` keyword arguments or the CLI flags.
"""

import hashlib
import json
from dataclasses import asdict, dataclass

from ..distloss import VARIANTS
from ..errors import ContractError

EXPERIMENTS = ("toy_a", "toy_b", "tabular")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seeds: tuple = (1, 2, 3)
    k: int = 5
    lam: float = 0.001
    dist: str = "laplace"
    main_widths: tuple = (1, 300, 300, 300, 300, 1)
    main_activations: tuple = ("relu", "relu", "relu", "relu", "identity")
    main_lr: float = 1e-3
    main_epochs: int = 200
    main_batch: int = 64
    auxue_lr: float = 5e-3
    auxue_epochs: int = 100
    auxue_batch: int = 64
    feature_mode: str = "penultimate"  # penultimate | extractor
    extractor_width: int = 16
    extractor_activation: str = "tanh"
    cos_width: int = 300
    hidden_width: int = 300
    ensemble_size: int = 3
    n_data: int = 1000
    split_fractions: tuple = (0.8, 0.1, 0.1)
    standardize: bool = False
    data_path: str | None = None
    data_seed: int = 0
    target_column: str = "quality"
    sep: str = ","
    out_dir: str = "runs"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ContractError(f"unknown experiment {self.experiment!r}")
        if self.dist not in VARIANTS:
            raise ContractError(f"unknown aleatoric variant {self.dist!r}")
        if self.feature_mode not in ("penultimate", "extractor"):
            raise ContractError(f"unknown feature mode {self.feature_mode!r}")
        if self.k < 2:
            raise ContractError(f"K must be >= 2, got {self.k}")
        if self.lam < 0:
            raise ContractError(f"lambda must be >= 0, got {self.lam}")
        for name in ("main_epochs", "main_batch", "auxue_epochs", "auxue_batch",
                     "ensemble_size", "n_data"):
            if getattr(self, name) <= 0:
                raise ContractError(f"{name} must be positive")
        for name in ("main_lr", "auxue_lr"):
            if getattr(self, name) <= 0:
                raise ContractError(f"{name} must be positive")
        if not self.seeds:
            raise ContractError("need at least one seed")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "main_widths", tuple(int(w) for w in self.main_widths))
        object.__setattr__(self, "main_activations", tuple(self.main_activations))
        object.__setattr__(
            self, "split_fractions", tuple(float(f) for f in self.split_fractions)
        )

    def to_dict(self):
        out = asdict(self)
        for key, value in out.items():
            if isinstance(value, tuple):
                out[key] = list(value)
        return out

    def config_hash(self):
        """Short stable digest of every field except the output directory."""
        payload = {k: v for k, v in self.to_dict().items() if k != "out_dir"}
        blob = json.dumps(payload, sort_keys=True)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


_TOY_DEFAULTS = dict(
    main_widths=(1, 300, 300, 300, 300, 1),
    main_activations=("relu", "relu", "relu", "relu", "identity"),
    main_lr=1e-3,
    main_epochs=200,
    main_batch=64,
    auxue_lr=5e-3,
    auxue_epochs=100,
    auxue_batch=64,
    k=5,
    lam=0.001,
    feature_mode="penultimate",
    n_data=1000,
    split_fractions=(0.8, 0.1, 0.1),
    seeds=(1,),
)

_TABULAR_DEFAULTS = dict(
    main_widths=(11, 16, 32, 16, 1),
    main_activations=("tanh", "tanh", "tanh", "identity"),
    main_lr=1e-3,
    main_epochs=60,
    main_batch=128,
    auxue_lr=1e-3,
    auxue_epochs=20,
    auxue_batch=64,
    k=5,
    lam=0.0001,
    feature_mode="extractor",
    n_data=1599,
    split_fractions=(0.72, 0.08, 0.20),
    seeds=(1, 2, 3),
)


def default_config(experiment, **overrides):
    """Per-experiment defaults with keyword overrides applied on top."""
    if experiment not in EXPERIMENTS:
        raise ContractError(f"unknown experiment {experiment!r}")
    base = dict(_TABULAR_DEFAULTS if experiment == "tabular" else _TOY_DEFAULTS)
    base["experiment"] = experiment
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in ExperimentConfig.__dataclass_fields__:
            raise ContractError(f"unknown config field {key!r}")
        base[key] = value
    return ExperimentConfig(**base)
