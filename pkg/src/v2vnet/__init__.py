"""Coverage and shared-rate analysis of V2V relay clusters attached to roadside units."""

from .allocation import Allocation, SharingGraph, max_min_allocate, verify_bottleneck
from .clustering import ClusterSet, attach_rsus, form_clusters
from .model import (
    ConfigurationError,
    LanePreset,
    MultilaneSpec,
    SingleLaneSpec,
    Snapshot,
    sample_coupled_pair,
    sample_multilane,
    sample_single_lane,
)

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "ClusterSet",
    "ConfigurationError",
    "LanePreset",
    "MultilaneSpec",
    "SharingGraph",
    "SingleLaneSpec",
    "Snapshot",
    "attach_rsus",
    "form_clusters",
    "max_min_allocate",
    "sample_coupled_pair",
    "sample_multilane",
    "sample_single_lane",
    "verify_bottleneck",
]
