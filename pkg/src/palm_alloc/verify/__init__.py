from palm_alloc.verify.exact import (
    JointLawTable,
    equivalence_check,
    exact_grid,
    exact_palm_check,
    joint_law_table,
    mass_transport_identity,
    palm_law,
    perturbed_kernel_fn,
    reverse_bound_check,
)
from palm_alloc.verify.report import StatReport, reports_to_csv, reports_to_json
from palm_alloc.verify.statistical import statistical_palm_check_allocation
from palm_alloc.verify.tails import TailRow, relative_change, strictly_increasing, tail_diagnostics, tails_to_csv

__all__ = [
    "JointLawTable",
    "StatReport",
    "TailRow",
    "equivalence_check",
    "exact_grid",
    "exact_palm_check",
    "joint_law_table",
    "mass_transport_identity",
    "palm_law",
    "perturbed_kernel_fn",
    "relative_change",
    "reports_to_csv",
    "reports_to_json",
    "reverse_bound_check",
    "statistical_palm_check_allocation",
    "strictly_increasing",
    "tail_diagnostics",
    "tails_to_csv",
]
