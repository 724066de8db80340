"""Bayesian community detection combining popularity-driven links and
Gaussian-process content models."""

from cpldc.errors import ConvergenceError, LinqsFormatError, LinqsParseError, NumericalError
from cpldc.inference import FitConfig, FitResult, fit, hard_assignment
from cpldc.kernel import KernelModel, KernelParams, build_covariance, diag_from_eigenbasis
from cpldc.metrics import Partition, modularity, nmi, pwf
from cpldc.network import ContentMatrix, Network, in_link_index, load_linqs, write_linqs
from cpldc.sampler import GenerativeConfig, LatentTruth, link_probability, make_separable_content, sample_network

__version__ = "0.1.0"

__all__ = [
    "ContentMatrix",
    "ConvergenceError",
    "FitConfig",
    "FitResult",
    "GenerativeConfig",
    "KernelModel",
    "KernelParams",
    "LatentTruth",
    "LinqsFormatError",
    "LinqsParseError",
    "Network",
    "NumericalError",
    "Partition",
    "build_covariance",
    "diag_from_eigenbasis",
    "fit",
    "hard_assignment",
    "in_link_index",
    "link_probability",
    "load_linqs",
    "make_separable_content",
    "modularity",
    "nmi",
    "pwf",
    "sample_network",
    "write_linqs",
]
