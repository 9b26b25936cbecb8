"""Histogram gradient boosting: leaf-wise (GOSS, EFB) and oblivious
(ordered target statistics) tree growth."""

from .binning import BinMapper, compute_bin_edges
from .booster import BoostConfig, GbdtModel, fit_gbdt, predict_gbdt
from .efb import FeatureBundle, bundle_columns, efb_bundle
from .goss import GossConfig, goss_sample
from .histogram import Histogram, HistogramBuilder, build_histograms
from .ordered_ts import CategoryEncoder, ordered_target_stats
from .split import SplitCandidate, best_split
from .tree import LEAFWISE, OBLIVIOUS, Tree, TrainingView, grow_tree_leafwise, grow_tree_oblivious

__all__ = [
    "BinMapper", "BoostConfig", "CategoryEncoder", "FeatureBundle", "GbdtModel", "GossConfig",
    "Histogram", "HistogramBuilder", "LEAFWISE", "OBLIVIOUS", "SplitCandidate", "Tree",
    "TrainingView", "best_split", "build_histograms", "bundle_columns", "compute_bin_edges",
    "efb_bundle", "fit_gbdt", "goss_sample", "grow_tree_leafwise", "grow_tree_oblivious",
    "ordered_target_stats", "predict_gbdt",
]
