"""graphpure: purify adversarially perturbed graphs with edge diffusion.

Train a discrete edge-removal diffusion model on a clean graph, then
denoise attacked graphs by guided reverse generation (structure-driven
refinement, feature/degree filtering, attack-specific start states) and
measure node-classification recovery with a GCN.
"""

from .attacks import AttackSpec, run_attack, select_target_nodes
from .denoiser import DenoiserConfig, DenoiserParams, init_denoiser
from .diffusion import Schedule, build_schedule
from .evaluator import GCNConfig, benchmark, evaluate, train_gcn
from .graphs import Graph, Split, degree_vector, load_graph, random_split
from .purifier import AttackedGraph, PurifyConfig, purify
from .synthetic import sbm_graph
from .trainer import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "AttackSpec",
    "AttackedGraph",
    "DenoiserConfig",
    "DenoiserParams",
    "GCNConfig",
    "Graph",
    "PurifyConfig",
    "Schedule",
    "Split",
    "TrainConfig",
    "benchmark",
    "build_schedule",
    "degree_vector",
    "evaluate",
    "init_denoiser",
    "load_graph",
    "purify",
    "random_split",
    "run_attack",
    "sbm_graph",
    "select_target_nodes",
    "train",
    "train_gcn",
    "__version__",
]
