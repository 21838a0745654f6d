"""Delivery-time analysis for multi-antenna coded caching.

Coded-message delivery over a K-user MIMO broadcast channel is treated as
transmission of general message sets: one message per nonempty user subset.
The package builds the DoF regions of that channel, computes the minimum
normalized delivery time (NDT) of a message-length vector as a linear
program over their corner points, simulates cache placement and coded
message generation, and realizes the delivery with linear precoders and
combiners at finite SNR.
"""

__version__ = "0.1.0"

from .caching import (
    CacheState,
    DemandVector,
    centralized_place,
    decentralized_place,
    example1_lengths,
    generate_coded_messages,
    load_cache_fixture,
    table1_cache,
    worst_case_demand,
)
from .estimator import DeliveryTimeEstimator
from .model import ConfigError, GroupIndex, Regime, SystemConfig, canonical_groups
from .ndt import (
    DeliveryPlan,
    NdtBounds,
    benchmark_group_by_group,
    benchmark_time_sharing,
    centralized_worst_ndt,
    decentralized_worst_ndt,
    gap,
    lower_bound_ndt,
    solve_ndt,
    symmetric_group_dof,
    time_sharing_plan,
    upper_bound_ndt,
)
from .phy import design_scheme, phase_rates, sample_channels, simulate_delivery, verify_scheme
from .region import (
    CornerPointSet,
    Polytope,
    RegionSpec,
    brute_force_vertices,
    contains,
    corner_points,
    inner_bound,
    outer_bound,
)

__all__ = [
    "CacheState", "DemandVector", "centralized_place", "decentralized_place", "example1_lengths",
    "generate_coded_messages", "load_cache_fixture", "table1_cache", "worst_case_demand",
    "DeliveryTimeEstimator", "ConfigError", "GroupIndex", "Regime", "SystemConfig", "canonical_groups",
    "DeliveryPlan", "NdtBounds", "benchmark_group_by_group", "benchmark_time_sharing",
    "centralized_worst_ndt", "decentralized_worst_ndt", "gap", "lower_bound_ndt", "solve_ndt",
    "symmetric_group_dof", "time_sharing_plan", "upper_bound_ndt", "design_scheme", "phase_rates",
    "sample_channels", "simulate_delivery", "verify_scheme", "CornerPointSet", "Polytope", "RegionSpec",
    "brute_force_vertices", "contains", "corner_points", "inner_bound", "outer_bound",
]
