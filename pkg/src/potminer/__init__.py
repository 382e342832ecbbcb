"""Unsupervised discovery of articulated motion patterns from point trajectories.

Pairs of trajectories (PoTs) that move relative to each other are quantized
into a codebook, shots are cut into single-pattern intervals at pauses and
periodic stretches, and intervals are grouped by complete-linkage clustering
of their bag-of-words histograms.
"""

from .cluster import DistanceConfig, hierarchical_cluster, interval_distance, linkage
from .codebook import BoWHistogram, Codebook, build_codebook, bow, quantize
from .evaluate import ari, interval_uniformity, purity
from .ingest import Shot, Trajectory, compute_frame_motion_stats, load_dataset, save_dataset
from .partition import Interval, PeriodicityConfig, partition_shot
from .pipeline import PipelineConfig, load_config, run_pipeline
from .pot import PoT, SelectionConfig, extract_pots
from .synth import BehaviorScript, Segment, generate_dataset, generate_shot

__version__ = "0.1.0"
