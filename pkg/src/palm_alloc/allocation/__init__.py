from palm_alloc.allocation.pattern import CellGrid, PointPattern, sample_poisson_pattern, torus_displacement
from palm_alloc.allocation.stable import (
    AllocationField,
    StageState,
    allocation_extra_head,
    blocking_pairs,
    cell_displacements,
    distance_ranks,
    max_displacement,
    quotas_for,
    shift_covariance_check,
    stable_allocate,
    stable_allocate_reference,
)

__all__ = [
    "AllocationField",
    "CellGrid",
    "PointPattern",
    "StageState",
    "allocation_extra_head",
    "blocking_pairs",
    "cell_displacements",
    "distance_ranks",
    "max_displacement",
    "quotas_for",
    "sample_poisson_pattern",
    "shift_covariance_check",
    "stable_allocate",
    "stable_allocate_reference",
    "torus_displacement",
]
