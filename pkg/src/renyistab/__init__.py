"""Stability of Rényi minimal output entropy for the qudit depolarizing channel.

Submodules
----------
core        states, density matrices, fidelities, best product approximations
channel     the depolarizing channel on n qudits
entropy     Rényi / von Neumann entropies and minimal output entropies
perturb     divided differences and second-order entropy expansions
stability   bound functions, accept/reject thresholds and the gap
polygraph   simulation of the product-state test
verify      numerical check suite
cli         command-line front end
"""

from .channel import DepolarizingParams, apply_depolarizing, depolarize_operator, product_output_spectrum
from .core import (
    DensityMatrix,
    PreconditionError,
    PureState,
    fidelity_pure,
    max_product_fidelity,
    partial_trace,
    perturbed_product,
    sample_state,
    tensor,
    trace_distance,
    weight_decomposition,
)
from .entropy import min_output_renyi_closed, min_output_renyi_numeric, renyi_entropy
from .perturb import PerturbationFamily, random_family, renyi_second_order_coeff, stability_family
from .polygraph import TrialConfig, run_protocol
from .stability import StabilityThresholds, Verdict, accept_coeff, classify, f_p, f_vn, gap, gap_limit, reject_coeff

__version__ = "0.1.0"

__all__ = [
    "DensityMatrix",
    "DepolarizingParams",
    "PerturbationFamily",
    "PreconditionError",
    "PureState",
    "StabilityThresholds",
    "TrialConfig",
    "Verdict",
    "accept_coeff",
    "apply_depolarizing",
    "classify",
    "depolarize_operator",
    "f_p",
    "f_vn",
    "fidelity_pure",
    "gap",
    "gap_limit",
    "max_product_fidelity",
    "min_output_renyi_closed",
    "min_output_renyi_numeric",
    "partial_trace",
    "perturbed_product",
    "product_output_spectrum",
    "random_family",
    "reject_coeff",
    "renyi_entropy",
    "renyi_second_order_coeff",
    "run_protocol",
    "sample_state",
    "stability_family",
    "tensor",
    "trace_distance",
    "weight_decomposition",
]
