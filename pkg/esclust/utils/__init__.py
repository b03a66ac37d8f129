from .utils import Utils
from .rng import derive_seed, make_rng
