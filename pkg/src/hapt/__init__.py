"""Hierarchical adaptive Pólya trees for collections of related samples."""

from .dispersion import cv_function, dispersion_grid, variance_function
from .dpm import ClusterModel, DpmConfig, cluster_log_ml, run_chain
from .node_posterior import NodeInput, local_evidence, node_table
from .partition import NodeId, bin_data, build_tree
from .simgen import Scenario, generate, l1_error
from .sis import SisConfig, build_transition, default_config
from .tree_hmm import HaptFit, fit

__all__ = [
    "ClusterModel", "DpmConfig", "HaptFit", "NodeId", "NodeInput", "Scenario", "SisConfig",
    "bin_data", "build_transition", "build_tree", "cluster_log_ml", "cv_function",
    "default_config", "dispersion_grid", "fit", "generate", "l1_error", "local_evidence",
    "node_table", "run_chain", "variance_function",
]
