"""Latin hypercube sampling with dependence for copula-driven Monte Carlo."""
from .copula import ConditionReport, CopulaModel, Family, check_conditions
from .core import (
    EtaPolicy,
    LHSDTransformer,
    LHSTransformer,
    empirical_copulas,
    lhs_transform,
    lhsd_estimate,
    lhsd_transform,
    mc_estimate,
    rank_statistics,
)

__version__ = "0.1.0"

__all__ = [
    "ConditionReport",
    "CopulaModel",
    "Family",
    "check_conditions",
    "EtaPolicy",
    "LHSDTransformer",
    "LHSTransformer",
    "empirical_copulas",
    "lhs_transform",
    "lhsd_estimate",
    "lhsd_transform",
    "mc_estimate",
    "rank_statistics",
]
