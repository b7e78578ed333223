"""Multi-source diffusion localization from a single snapshot."""

from .diffusion import DiffusionConfig, estimate_tau, similarity, snapshot_of
from .graph import Graph, NodeSet, generate_erdos_renyi, generate_small_world, load_edge_list
from .localizer import BosoulConfig, LocalizationResult, bosoul_localize, jordan_localize, netsleuth_localize
from .metrics import source_distance
from .spectral import build_basis, fourier_transform, gsg_kernel

__all__ = [
    "BosoulConfig",
    "DiffusionConfig",
    "Graph",
    "LocalizationResult",
    "NodeSet",
    "bosoul_localize",
    "build_basis",
    "estimate_tau",
    "fourier_transform",
    "generate_erdos_renyi",
    "generate_small_world",
    "gsg_kernel",
    "jordan_localize",
    "load_edge_list",
    "netsleuth_localize",
    "similarity",
    "snapshot_of",
    "source_distance",
]
