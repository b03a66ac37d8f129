import hashlib
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import yaml
from loguru import logger

from esclust.graph import BlockModel, LatentConfig, canonical_latent_positions
from esclust.utils import Utils
from esclust.utils.errors import ConfigError, EsClustError

from .presets import FAMILIES, LABEL_MODES, get_preset

ALL_METHODS = ["kmeans_ase", "kmeans_lse", "em_ase", "em_lse", "es_ase", "es_lse"]

# Keys that change where or how fast a run happens but never its numbers
RUNTIME_KEYS = ("jobs", "output_dir", "log_dir")


@dataclass
class ExperimentConfig:
    name: str
    family: str
    n_grid: List[int]
    model: Optional[str] = None
    B: Optional[List[List[float]]] = None
    x: Optional[List[List[float]]] = None
    pi: Optional[List[float]] = None
    labels: Optional[str] = None
    replications: int = 100
    methods: List[str] = field(default_factory=lambda: list(ALL_METHODS))
    seed: int = 20240101
    tol_ase: float = 1e-5
    tol_lse: float = 1e-6
    max_iter: int = 10000
    moments: str = "model"
    max_resamples: int = 20
    jobs: int = 1
    output_dir: str = "results"
    log_dir: str = "logs"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"Unknown family '{self.family}', expected one of {FAMILIES}")
        if self.replications < 1:
            raise ConfigError(f"replications must be at least 1, got {self.replications}")
        if not self.n_grid:
            raise ConfigError("n_grid is empty")
        self.n_grid = [int(n) for n in self.n_grid]
        if any(b < a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ConfigError(f"n_grid must be nondecreasing: {self.n_grid}")
        unknown = [m for m in self.methods if m not in ALL_METHODS]
        if unknown:
            raise ConfigError(f"Unknown methods {unknown}, expected a subset of {ALL_METHODS}")
        if not self.methods:
            raise ConfigError("methods is empty")
        if self.labels is not None and self.labels not in LABEL_MODES:
            raise ConfigError(f"labels must be one of {LABEL_MODES}, got '{self.labels}'")
        if self.moments not in ("model", "empirical"):
            raise ConfigError(f"moments must be 'model' or 'empirical', got '{self.moments}'")
        if not (self.tol_ase > 0 and self.tol_lse > 0) or self.max_iter < 1:
            raise ConfigError("tolerances must be positive and max_iter at least 1")
        if self.max_resamples < 0 or self.jobs < 1:
            raise ConfigError("max_resamples must be >= 0 and jobs >= 1")
        if self.model is None and self.pi is None:
            raise ConfigError("Either a preset 'model' or inline 'pi' with 'B' / 'x' is required")
        if self.model is not None:
            preset = get_preset(self.model)
            if preset.family != self.family:
                raise ConfigError(f"Preset '{self.model}' belongs to family '{preset.family}', not '{self.family}'")
        elif self.family == "sbm" and self.B is None:
            raise ConfigError("Inline sbm experiments need 'B'")
        elif self.family == "mixture_only" and self.x is None:
            raise ConfigError("Inline mixture_only experiments need 'x'")

    # ==================== Resolved model ====================

    def truth(self) -> LatentConfig:
        """Ground-truth latent positions and proportions"""
        try:
            if self.model is not None:
                return get_preset(self.model).latent_config()
            if self.family == "sbm":
                return LatentConfig(canonical_latent_positions(np.array(self.B)), np.array(self.pi))
            return LatentConfig(np.array(self.x), np.array(self.pi))
        except EsClustError as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"Experiment '{self.name}' does not describe a valid model: {e}") from e

    def block_model(self) -> BlockModel:
        if self.family != "sbm":
            raise ConfigError(f"Experiment '{self.name}' is not an sbm experiment")
        if self.model is not None:
            return get_preset(self.model).block_model()
        return BlockModel(np.array(self.B), np.array(self.pi))

    def label_mode(self) -> str:
        if self.labels is not None:
            return self.labels
        if self.model is not None:
            return get_preset(self.model).labels
        return "fixed"

    # ==================== Serialization ====================

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def config_hash(self) -> str:
        """sha256 over the result-determining fields"""
        payload = {k: v for k, v in self.to_dict().items() if k not in RUNTIME_KEYS}
        text = yaml.safe_dump(payload, sort_keys=True)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            yaml.safe_dump({"experiment": self.to_dict()}, f, sort_keys=False)
        return path

    def results_dir(self) -> Path:
        """<output_dir>/<name>; the output root is created on demand"""
        return Utils.get_results_dir(self.output_dir) / self.name


def parse_n_grid(value: Any) -> List[int]:
    """A list of sizes, or {start, stop, step} with stop included"""
    if isinstance(value, dict):
        try:
            start, stop = int(value["start"]), int(value["stop"])
        except KeyError as e:
            raise ConfigError(f"n_grid range is missing {e}") from e
        step = int(value.get("step", 100))
        if step <= 0:
            raise ConfigError(f"n_grid step must be positive, got {step}")
        return list(range(start, stop + 1, step))
    if isinstance(value, (int, float)):
        return [int(value)]
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    raise ConfigError(f"Cannot parse n_grid from {value!r}")


class ConfigLoader:
    def __init__(self, config_path: str | Path):
        self.config_path = Utils.resolve_path(config_path)
        self.config: Dict[str, Any] = {}

    def load(self) -> Dict[str, Any]:
        """Load and parse the configuration file"""
        try:
            with open(self.config_path, "r", encoding="utf-8") as f:
                self.config = yaml.safe_load(f) or {}
        except Exception as e:
            logger.error(f"Failed to load config from {self.config_path}: {e}")
            raise ConfigError(f"Failed to load config from {self.config_path}: {e}") from e
        if not isinstance(self.config, dict) or "experiment" not in self.config:
            raise ConfigError(f"{self.config_path} has no 'experiment' section")
        return self.config

    def get_global_settings(self) -> Dict[str, Any]:
        """The 'global' section, with ESBENCH_JOBS / ESBENCH_OUTPUT_DIR taking precedence"""
        if not self.config:
            self.load()
        settings = dict(self.config.get("global") or {})
        if os.getenv("ESBENCH_JOBS"):
            settings["jobs"] = int(os.environ["ESBENCH_JOBS"])
        if os.getenv("ESBENCH_OUTPUT_DIR"):
            settings["output_dir"] = os.environ["ESBENCH_OUTPUT_DIR"]
        return settings

    def get_experiment(self, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
        """
        Build the ExperimentConfig.

        Precedence: overrides (CLI flags) > environment > 'global' section > 'experiment' section.
        """
        if not self.config:
            self.load()
        data = dict(self.config["experiment"] or {})
        data.update({k: v for k, v in self.get_global_settings().items() if k in RUNTIME_KEYS})
        data.update({k: v for k, v in (overrides or {}).items() if v is not None})

        if "n_grid" not in data and data.get("model"):
            data["n_grid"] = list(get_preset(data["model"]).n_grid)
        if "n_grid" not in data:
            raise ConfigError(f"{self.config_path} does not define n_grid")
        data["n_grid"] = parse_n_grid(data["n_grid"])
        if data.get("methods") == "all":
            data["methods"] = list(ALL_METHODS)
        data.setdefault("name", self.config_path.stem)

        known = ExperimentConfig.__dataclass_fields__.keys()
        extra = sorted(set(data) - set(known))
        if extra:
            raise ConfigError(f"Unknown experiment keys: {extra}")
        try:
            experiment = ExperimentConfig(**data)
        except TypeError as e:
            raise ConfigError(f"Invalid experiment section in {self.config_path}: {e}") from e
        logger.info(f"Loaded experiment '{experiment.name}' ({experiment.family}, "
                    f"n_grid={experiment.n_grid}, reps={experiment.replications})")
        return experiment
