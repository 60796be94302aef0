"""Entity alignment across two knowledge graphs from name, relation and attribute views."""

__version__ = "0.1.0"

from .combination import combine_wva, loss_itc, ssl_loss, train_shared_space
from .evaluation import compute_metrics, compute_prf, rank_candidates
from .kg import AlignmentDataset, KnowledgeGraph, load_dataset
from .synthetic import generate_synthetic_pair
from .training import TrainConfig, TrainResult, train_multike

__all__ = [
    "AlignmentDataset", "KnowledgeGraph", "TrainConfig", "TrainResult", "combine_wva",
    "compute_metrics", "compute_prf", "generate_synthetic_pair", "load_dataset", "loss_itc",
    "rank_candidates", "ssl_loss", "train_multike", "train_shared_space",
]
