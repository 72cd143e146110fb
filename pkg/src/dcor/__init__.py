"""Dual-autoencoder graph anomaly detection with contrastive learning on reconstructions."""

from .augment import AugmentConfig, AugmentedView, Injection, make_view
from .graphdata import AttributedGraph, SynthSpec, generate_synthetic, load_graph, load_graph_dir, normalize_features
from .model import forward, init_params, load_checkpoint, reconstruct, save_checkpoint
from .objective import ObjectiveConfig, anomaly_scores
from .trainer import EpochMetrics, TrainConfig, evaluate_auc, rank_nodes, score_graph, train

__version__ = "0.1.0"

__all__ = [
    "AttributedGraph",
    "AugmentConfig",
    "AugmentedView",
    "EpochMetrics",
    "Injection",
    "ObjectiveConfig",
    "SynthSpec",
    "TrainConfig",
    "anomaly_scores",
    "evaluate_auc",
    "forward",
    "generate_synthetic",
    "init_params",
    "load_checkpoint",
    "load_graph",
    "load_graph_dir",
    "make_view",
    "normalize_features",
    "rank_nodes",
    "reconstruct",
    "save_checkpoint",
    "score_graph",
    "train",
]
