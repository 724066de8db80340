"""Variational factors and fit configuration."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma

# exp() arguments are clamped here; see guarded_exp
EXP_CLAMP = 700.0


def guarded_exp(x: np.ndarray) -> np.ndarray:
    return np.exp(np.minimum(x, EXP_CLAMP))


def guard_trips(x: np.ndarray) -> int:
    return int(np.count_nonzero(np.asarray(x) > EXP_CLAMP))


@dataclass(frozen=True)
class QGamma:
    """Independent Gamma(shape, rate) posteriors over node popularities."""

    a_tilde: np.ndarray
    b_tilde: np.ndarray

    @property
    def expected_t(self) -> np.ndarray:
        return self.a_tilde / self.b_tilde

    @property
    def expected_log_t(self) -> np.ndarray:
        return digamma(self.a_tilde) - np.log(self.b_tilde)


def popularity_moments(qt: QGamma | None, n: int) -> tuple[np.ndarray, np.ndarray]:
    """(E[t], E[log t]); ``qt=None`` means popularity is pinned at 1."""
    if qt is None:
        return np.ones(n), np.zeros(n)
    return qt.expected_t, qt.expected_log_t


@dataclass(frozen=True)
class QMultinomial:
    """Per-link community posteriors, one row per link (aligned with Network.src)."""

    psi: np.ndarray

    @property
    def community_mass(self) -> np.ndarray:
        """M_k: expected number of links assigned to each community."""
        return self.psi.sum(axis=0)


@dataclass(frozen=True)
class QGaussian:
    """Gaussian posteriors over activations sharing the prior's eigenbasis.

    ``Sigma_k = V diag(lam[k]) V^T``; ``s[k]`` is its diagonal and
    ``alpha[k] = C^{-1} m[k]`` is carried alongside the mean so the prior
    quadratic never needs an explicit inverse.
    """

    m: np.ndarray
    lam: np.ndarray
    s: np.ndarray
    alpha: np.ndarray

    @property
    def K(self) -> int:
        return self.m.shape[0]

    @property
    def expected_exp(self) -> np.ndarray:
        """E[exp(y_ik)] as a (K, n) array."""
        return guarded_exp(self.m + 0.5 * self.s)


@dataclass(frozen=True)
class VariationalScalars:
    eta: np.ndarray  # (K,)
    tau: np.ndarray  # (n,)


@dataclass(frozen=True)
class VariationalState:
    qt: QGamma | None
    qz: QMultinomial
    qy: QGaussian
    scalars: VariationalScalars


@dataclass(frozen=True)
class FitConfig:
    """Settings for :func:`cpldc.inference.fit`.

    ``fixed_popularity`` pins every popularity at 1 and skips the q(T)
    update.  ``qy_rounds`` is the number of alternating mean/variance passes
    per community inside one E-step.
    """

    K: int
    a: float = 1e-3
    b: float = 1e-3
    max_iters: int = 500
    tol: float = 1e-8
    seed: int = 0
    fixed_popularity: bool = False
    init: str = "kmeans"
    qy_rounds: int = 2
    m_max_iters: int = 50
    lambda_max_passes: int = 100

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not (self.a > 0 and self.b > 0):
            raise ValueError("a and b must be positive")
        if self.init not in ("kmeans", "random"):
            raise ValueError(f"unknown init scheme {self.init!r}")


@dataclass
class FitResult:
    gamma: np.ndarray
    state: VariationalState
    bound_trace: list[float]
    iterations: int
    converged: bool
    diagnostics: dict = field(default_factory=dict)

    @property
    def final_bound(self) -> float:
        return self.bound_trace[-1] if self.bound_trace else float("nan")
