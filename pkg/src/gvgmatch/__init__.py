"""Elastic registration of attributed spatial (vascular) graphs."""

from ._accel import backend_name
from .affinity import AffinityFactors, AffinityWeights, build_affinity, qap_objective
from .graph import SpatialGraph, minimum_spanning_tree, over_connect, recompute_degrees
from .rigid import RigidConfig, RigidTransform, rigid_align

__version__ = "0.1.0"

__all__ = [
    "AffinityFactors", "AffinityWeights", "RigidConfig", "RigidTransform", "SpatialGraph", "backend_name",
    "build_affinity", "minimum_spanning_tree", "over_connect", "qap_objective", "recompute_degrees",
    "rigid_align", "__version__",
]
