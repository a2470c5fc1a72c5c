"""Octree-indexed point cloud down-sampling and voxel-expanded neighbor gathering."""

__version__ = "0.1.0"

from .core import Aabb, MortonCode, PcprepError, PointCloud, hamming_distance, morton_decode, morton_encode, normalize_bounds
from .gathering import FeatureMap, NeighborSet, assemble_feature_map, brute_ball, brute_knn, recall, veg_ball, veg_knn
from .instrumentation import AccessCounters, merge, savings_ratio
from .octree import OctreeConfig, OctreeIndex, build_index, farthest_leaf, load_index, locate_leaf, save_index, voxel_ring
from .sampling import SampledPointTable, SamplingConfig, coverage_radius, fps_exact, ois_sample, random_sample, virtual_seed

__all__ = [name for name in dir() if not name.startswith("_")]
