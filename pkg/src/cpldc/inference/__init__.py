"""Variational EM inference for the popularity-driven link model."""

from cpldc.inference.bound import bound_terms, lower_bound
from cpldc.inference.fit import fit, initialize_state, update_q_y
from cpldc.inference.solvers import (
    mean_gradient,
    mean_objective,
    update_lambda,
    update_m,
    variance_objective,
)
from cpldc.inference.state import (
    FitConfig,
    FitResult,
    QGamma,
    QGaussian,
    QMultinomial,
    VariationalScalars,
    VariationalState,
    popularity_moments,
)
from cpldc.inference.updates import (
    compute_pqs,
    extract_memberships,
    hard_assignment,
    kappa,
    link_logits,
    update_eta_tau,
    update_q_t,
    update_q_z,
)

__all__ = [
    "FitConfig",
    "FitResult",
    "QGamma",
    "QGaussian",
    "QMultinomial",
    "VariationalScalars",
    "VariationalState",
    "bound_terms",
    "compute_pqs",
    "extract_memberships",
    "fit",
    "hard_assignment",
    "initialize_state",
    "kappa",
    "link_logits",
    "lower_bound",
    "mean_gradient",
    "mean_objective",
    "popularity_moments",
    "update_eta_tau",
    "update_lambda",
    "update_m",
    "update_q_t",
    "update_q_y",
    "update_q_z",
    "variance_objective",
]
