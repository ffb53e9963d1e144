"""Polynomial-chaos uncertainty quantification."""

from .quadrature import OrthoBasis, ParamSpec, QuadratureGrid, build_quadrature, golub_welsch, tridiag_eig
from .gpc import GpcExpansion, gpc_eval, gpc_moments, total_degree_indices, weight_tensor
from .oracles import SampleOracle, make_oracle
from .collocation import BudgetExceeded, collocate_full, collocate_tensor_recovery

__all__ = [
    "OrthoBasis",
    "ParamSpec",
    "QuadratureGrid",
    "build_quadrature",
    "golub_welsch",
    "tridiag_eig",
    "GpcExpansion",
    "gpc_eval",
    "gpc_moments",
    "total_degree_indices",
    "weight_tensor",
    "SampleOracle",
    "make_oracle",
    "BudgetExceeded",
    "collocate_full",
    "collocate_tensor_recovery",
]
