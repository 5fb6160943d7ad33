from .clusters import MicroCluster
from .common import (
    DELIMITER,
    LAYER1_ALPHABET_SIZE,
    Symbol,
    SymbolSequence,
    Timestamp,
    as_sequence,
    collapse_runs,
    decay_factor,
    decay_weight,
    drop_repeats,
)
from .geometry import GridSpec, ObjectObservation, Rect
from .params import DEFAULT_M_U, Hyperparams

__all__ = [
    "DEFAULT_M_U",
    "DELIMITER",
    "LAYER1_ALPHABET_SIZE",
    "GridSpec",
    "Hyperparams",
    "MicroCluster",
    "ObjectObservation",
    "Rect",
    "Symbol",
    "SymbolSequence",
    "Timestamp",
    "as_sequence",
    "collapse_runs",
    "decay_factor",
    "decay_weight",
    "drop_repeats",
]
