"""
Built-in model registry for the benchmark families.

Mixture presets carry printed latent positions x (rows are the K atoms).
SBM presets carry a block probability matrix B; their ground-truth latent
positions are the canonical ones, x = U_B D_B^{1/2} U_B^T.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from esclust.graph import BlockModel, LatentConfig, canonical_latent_positions
from esclust.utils.errors import ConfigError

FAMILIES = ("mixture_only", "sbm")
LABEL_MODES = ("fixed", "categorical")

Matrix = Tuple[Tuple[float, ...], ...]

DEFAULT_GRID = tuple(range(200, 1000, 100))


@dataclass(frozen=True)
class Preset:
    name: str
    family: str
    pi: Tuple[float, ...]
    x: Optional[Matrix] = None
    B: Optional[Matrix] = None
    labels: str = "fixed"
    n_grid: Tuple[int, ...] = field(default=DEFAULT_GRID)
    description: str = ""

    def latent_config(self) -> LatentConfig:
        """Ground-truth latent configuration for this preset"""
        if self.family == "mixture_only":
            return LatentConfig(np.array(self.x), np.array(self.pi))
        return LatentConfig(canonical_latent_positions(np.array(self.B)), np.array(self.pi))

    def block_model(self) -> BlockModel:
        if self.B is None:
            raise ConfigError(f"Preset {self.name} has no block matrix")
        return BlockModel(np.array(self.B), np.array(self.pi))

    def matrix(self) -> np.ndarray:
        return np.array(self.x if self.family == "mixture_only" else self.B)


def _affinity(a: float, b: float) -> Matrix:
    return ((a, b), (b, a))


def _core_periphery(a: float, b: float) -> Matrix:
    return ((a, b), (b, b))


HALF = (0.5, 0.5)

_PRESETS = (
    Preset("m1", "mixture_only", HALF, x=((0.6210, 0.3382), (0.3382, 0.6210)),
           description="two-point mixture, x_1"),
    Preset("m2", "mixture_only", HALF, x=((0.4076, 0.1840), (0.1840, 0.4076)),
           description="two-point mixture, x_2"),
    Preset("m3", "mixture_only", HALF, x=((0.6024, 0.3703), (0.3703, 0.5319)),
           description="two-point mixture, x_3"),
    Preset("m4", "mixture_only", HALF, x=((0.3962, 0.2074), (0.2074, 0.3721)),
           description="two-point mixture, x_4"),
    Preset("affinity1", "sbm", HALF, B=_affinity(0.5, 0.4),
           description="balanced affinity SBM (a, b) = (.5, .4)"),
    Preset("affinity2", "sbm", HALF, B=_affinity(0.2, 0.15),
           description="balanced affinity SBM (a, b) = (.2, .15)"),
    Preset("coreperiph3", "sbm", HALF, B=_core_periphery(0.2, 0.15),
           description="core-periphery SBM (a, b) = (.2, .15)"),
    Preset("coreperiph4", "sbm", HALF, B=_core_periphery(0.5, 0.42),
           n_grid=DEFAULT_GRID + tuple(range(1000, 1800, 100)),
           description="core-periphery SBM (a, b) = (.5, .42)"),
    Preset("connectome", "sbm", (0.28, 0.22, 0.28, 0.22),
           B=((0.020, 0.044, 0.002, 0.009),
              (0.044, 0.115, 0.010, 0.042),
              (0.002, 0.010, 0.020, 0.045),
              (0.009, 0.042, 0.045, 0.117)),
           x=((0.0915, 0.1076, 0.0057, 0.0034),
              (0.1076, 0.3149, 0.0056, 0.0649),
              (0.0057, 0.0056, 0.0886, 0.1099),
              (0.0034, 0.0649, 0.1099, 0.3173)),
           labels="categorical",
           n_grid=tuple(range(500, 1300, 100)),
           description="four-block brain connectome SBM (printed x kept for reference)"),
)


def builtin_presets() -> Dict[str, Preset]:
    """Registry of named models, in declaration order"""
    return {preset.name: preset for preset in _PRESETS}


def get_preset(name: str) -> Preset:
    presets = builtin_presets()
    if name not in presets:
        raise ConfigError(f"Unknown preset '{name}', available: {list(presets)}")
    return presets[name]
