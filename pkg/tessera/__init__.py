import importlib.metadata

from .clustering import ClusterNode, Finalization, MatchEvent, NodeStats
from .config import RunConfig, load_config
from .encoding import GridEncoder, decode_output, encode_cell, encode_output, encode_step
from .evaluation import AssignmentLog, ccr, convergence_curve, sweep_epsilon, windowed_ccr
from .merging import align_merge, merge, merge_models
from .routing import Pipeline, PipelineSpec, TickResult
from .similarity import distance, lcs_brute, lcs_table, model_distance
from .structure import GridSpec, Hyperparams, MicroCluster, ObjectObservation, Rect
from .synthesis import gen_point_stream, gen_sequence_stream, standard_sequence_fixture

__version__ = importlib.metadata.version("tessera")
__all__ = [
    "AssignmentLog",
    "ClusterNode",
    "Finalization",
    "GridEncoder",
    "GridSpec",
    "Hyperparams",
    "MatchEvent",
    "MicroCluster",
    "NodeStats",
    "ObjectObservation",
    "Pipeline",
    "PipelineSpec",
    "Rect",
    "RunConfig",
    "TickResult",
    "align_merge",
    "ccr",
    "convergence_curve",
    "decode_output",
    "distance",
    "encode_cell",
    "encode_output",
    "encode_step",
    "gen_point_stream",
    "gen_sequence_stream",
    "lcs_brute",
    "lcs_table",
    "load_config",
    "merge",
    "merge_models",
    "model_distance",
    "standard_sequence_fixture",
    "sweep_epsilon",
    "windowed_ccr",
]
