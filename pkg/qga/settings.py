from __future__ import annotations

import hashlib
import json
import os

from typing import List, TypedDict

from typing_extensions import override

from qga.errors import ConfigurationError, ParsingError
from qga.models import Variant

DEFAULT_VARIANTS = ["bcqo/off", "bcqo/sampled", "uqcm/off", "uqcm/sampled"]
INIT_MODES = ("haar-full", "haar-product")

class ConfigDict(TypedDict):
    n: int
    c: int
    num_hamiltonians: int
    num_initial_states: int
    generations: int
    p_m: float
    variants: List[str]
    burn_in: int
    seed: int
    init_mode: str
    spectral: bool
    topk: int
    output_dir: str

class ExperimentConfig:

    def __init__(self) -> None:
        self.n: int = 4
        self.c: int = 2
        self.num_hamiltonians: int = 200
        self.num_initial_states: int = 10
        self.generations: int = 10
        self.p_m: float = 1 / 24
        self.variants: List[str] = list(DEFAULT_VARIANTS)
        self.burn_in: int = 4
        self.seed: int = 0
        self.init_mode: str = "haar-full"
        self.spectral: bool = True
        self.topk: int = 6
        self.output_dir: str = "qga-output"

    @override
    def __repr__(self) -> str:
        return f'<ExperimentConfig n={self.n} c={self.c} hamiltonians={self.num_hamiltonians} variants={self.variants}>'

    @classmethod
    def full_preset(cls) -> ExperimentConfig:
        """Returns the 200 Hamiltonian x 10 initial state benchmark configuration."""
        return cls()

    @classmethod
    def reduced_preset(cls) -> ExperimentConfig:
        """Returns the 50 Hamiltonian x 5 initial state acceptance configuration."""
        config = cls()
        config.num_hamiltonians = 50
        config.num_initial_states = 5
        return config

    @property
    def parsed_variants(self) -> List[Variant]:
        return [Variant.parse(label, self.p_m) for label in self.variants]

    @property
    def config_hash(self) -> str:
        """Returns a digest of every setting that changes the produced records."""
        data = self._as_dict()
        del data["output_dir"]
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode("utf-8")).hexdigest()

    def validate(self) -> None:
        if self.n < 4 or self.n % 4 != 0:
            raise ConfigurationError(f"n must be a positive multiple of 4, got {self.n}")
        if self.c < 1:
            raise ConfigurationError(f"c must be positive, got {self.c}")
        if self.num_hamiltonians < 1 or self.num_initial_states < 1:
            raise ConfigurationError("At least one Hamiltonian and one initial state are required")
        if self.generations < 1:
            raise ConfigurationError(f"generations must be positive, got {self.generations}")
        if not 0 <= self.burn_in < self.generations:
            raise ConfigurationError(f"burn_in must lie in [0, generations), got {self.burn_in}")
        if self.generations + 1 <= self.burn_in + 2:
            raise ConfigurationError("Not enough generations after burn-in to fit convergence")
        if not 0.0 <= self.p_m <= 1.0:
            raise ConfigurationError(f"p_m must lie in [0, 1], got {self.p_m}")
        if self.init_mode not in INIT_MODES:
            raise ConfigurationError(f"Unknown init_mode '{self.init_mode}'")
        if not self.variants:
            raise ConfigurationError("At least one variant is required")
        if self.topk < 2:
            raise ConfigurationError(f"topk must be at least 2, got {self.topk}")
        _ = self.parsed_variants

    def _deserialize(self, data: ConfigDict) -> None:
        try:
            self.n = int(data.get("n", self.n))
            self.c = int(data.get("c", self.c))
            self.num_hamiltonians = int(data.get("num_hamiltonians", self.num_hamiltonians))
            self.num_initial_states = int(data.get("num_initial_states", self.num_initial_states))
            self.generations = int(data.get("generations", self.generations))
            self.p_m = float(data.get("p_m", self.p_m))
            self.variants = [str(v) for v in data.get("variants", self.variants)]
            self.burn_in = int(data.get("burn_in", self.burn_in))
            self.seed = int(data.get("seed", self.seed))
            self.init_mode = str(data.get("init_mode", self.init_mode))
            self.spectral = bool(data.get("spectral", self.spectral))
            self.topk = int(data.get("topk", self.topk))
            self.output_dir = str(data.get("output_dir", self.output_dir))
        except (TypeError, ValueError) as e:
            raise ParsingError(f"Invalid configuration value: {e}") from None

    def _as_dict(self) -> ConfigDict:
        return {
            "n": self.n,
            "c": self.c,
            "num_hamiltonians": self.num_hamiltonians,
            "num_initial_states": self.num_initial_states,
            "generations": self.generations,
            "p_m": self.p_m,
            "variants": list(self.variants),
            "burn_in": self.burn_in,
            "seed": self.seed,
            "init_mode": self.init_mode,
            "spectral": self.spectral,
            "topk": self.topk,
            "output_dir": self.output_dir
        }

    def _serialize(self) -> str:
        return json.dumps(self._as_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: ConfigDict) -> ExperimentConfig:
        config = cls()
        config._deserialize(data)
        return config

    @classmethod
    def load(cls, file_path: str) -> ExperimentConfig:
        """Loads and validates a JSON configuration file."""
        try:
            with open(file_path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError, UnicodeDecodeError) as e:
            raise ParsingError(f"Could not read configuration '{file_path}': {e}") from None
        if not isinstance(data, dict):
            raise ParsingError(f"Configuration '{file_path}' does not hold a JSON object")
        config = cls.from_dict(data)
        config.validate()
        return config

    def save(self, file_path: str) -> None:
        directory = os.path.dirname(file_path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(file_path, "w", encoding="utf-8") as f:
            _ = f.write(self._serialize() + "\n")
