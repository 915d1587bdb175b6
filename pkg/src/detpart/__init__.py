"""detpart: deterministic parallel multilevel hypergraph partitioning.

Minimizes the connectivity objective sum_e w(e) * (lambda(e) - 1) under a
balance constraint. Results are bitwise identical for any thread count,
any repetition, for a fixed (instance, k, epsilon, seed, config).
"""

from .config import Config, PRESETS, apply_overrides, preset_config
from .hypergraph import Hypergraph, PartitionState, max_block_weight
from .parallel import WorkerPool
from .pipeline import RunResult, partition

__all__ = [
    "Config",
    "Hypergraph",
    "PRESETS",
    "PartitionState",
    "RunResult",
    "WorkerPool",
    "apply_overrides",
    "max_block_weight",
    "partition",
    "preset_config",
    "__version__",
]

__version__ = "0.1.0"
