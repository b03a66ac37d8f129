from .config_loader import ALL_METHODS, ConfigLoader, ExperimentConfig, parse_n_grid
from .presets import Preset, builtin_presets, get_preset
from .runner import run_experiment, run_replication, simulate_replication
from .tables import emit_tables, load_results, save_results
