"""Invariant transports, stable allocations and extra head schemes on periodic windows."""

from palm_alloc.lattice import (
    Configuration,
    GroupOrdering,
    SeededRng,
    TorusLattice,
    enumerate_configurations,
    sample_bernoulli,
    sample_exact_count,
)
from palm_alloc.transport import (
    ExtraHeadKernel,
    GreedyTrace,
    TransportPlan,
    extra_head_kernel,
    greedy_transport,
    integrality_report,
    sample_extra_head,
)
from palm_alloc.walk import meshalkin_matching, walk_kernel, walk_scheme
from palm_alloc.measure import MeasureVector, measure_recursion

__all__ = [
    "Configuration",
    "ExtraHeadKernel",
    "GreedyTrace",
    "GroupOrdering",
    "MeasureVector",
    "SeededRng",
    "TorusLattice",
    "TransportPlan",
    "enumerate_configurations",
    "extra_head_kernel",
    "greedy_transport",
    "integrality_report",
    "measure_recursion",
    "meshalkin_matching",
    "sample_bernoulli",
    "sample_exact_count",
    "sample_extra_head",
    "walk_kernel",
    "walk_scheme",
]
