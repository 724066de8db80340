"""Closed-form coordinate updates for q(T), q(Z) and the auxiliary scalars."""

from __future__ import annotations

import numpy as np

from cpldc.errors import NumericalError
from cpldc.inference.state import (
    FitConfig,
    QGamma,
    QGaussian,
    QMultinomial,
    VariationalScalars,
    popularity_moments,
)
from cpldc.metrics import Partition
from cpldc.network import Network


def update_q_t(
    network: Network,
    qz: QMultinomial,
    qy: QGaussian,
    scalars: VariationalScalars,
    cfg: FitConfig,
) -> QGamma:
    """Optimal Gamma posterior for every node popularity.

    The shape collects the expected number of links ending at j; the rate
    collects, over communities, the expected community link mass M_k times
    ``E[exp(y_jk)] / eta_k``.
    """
    indegree_mass = np.bincount(network.dst, weights=qz.psi.sum(axis=1), minlength=network.n)
    a_tilde = cfg.a + indegree_mass
    mass = qz.community_mass
    b_tilde = cfg.b + (mass / scalars.eta) @ qy.expected_exp
    return QGamma(a_tilde=a_tilde, b_tilde=b_tilde)


def link_logits(
    network: Network, qt: QGamma | None, qy: QGaussian, scalars: VariationalScalars
) -> np.ndarray:
    """Unnormalized log psi for every link (N, K)."""
    et, _ = popularity_moments(qt, network.n)
    pull = (qy.expected_exp @ et) / scalars.eta + np.log(scalars.eta)
    return qy.m[:, network.dst].T + qy.m[:, network.src].T - pull[None, :]


def update_q_z(
    network: Network, qt: QGamma | None, qy: QGaussian, scalars: VariationalScalars
) -> QMultinomial:
    """Optimal per-link community posteriors (softmax of :func:`link_logits`)."""
    logits = link_logits(network, qt, qy, scalars)
    if logits.size == 0:
        return QMultinomial(np.zeros((0, qy.K)))
    top = logits.max(axis=1, keepdims=True)
    if not np.all(np.isfinite(top)):
        bad = int(np.flatnonzero(~np.isfinite(top[:, 0]))[0])
        raise NumericalError(
            "non-finite link logits", link=bad, source=int(network.src[bad]), target=int(network.dst[bad])
        )
    psi = np.exp(logits - top)
    psi /= psi.sum(axis=1, keepdims=True)
    return QMultinomial(psi)


def compute_pqs(
    network: Network,
    qz: QMultinomial,
    qt: QGamma | None,
    scalars: VariationalScalars,
    qy: QGaussian,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sufficient statistics for the activation subproblem, each (K, n).

    p: expected community-k link endpoints at node i (as source or target);
    q: coefficient of ``E[exp(y_ik)]`` in the bound, ``M_k E[t_i] / eta_k +
    N_i / tau_i``; s: current posterior variances.
    """
    n, K = network.n, qy.K
    psi = qz.psi
    p = np.empty((K, n))
    for k in range(K):
        p[k] = np.bincount(network.dst, weights=psi[:, k], minlength=n) + np.bincount(
            network.src, weights=psi[:, k], minlength=n
        )
    et, _ = popularity_moments(qt, n)
    q = np.outer(qz.community_mass / scalars.eta, et) + (network.out_degree / scalars.tau)[None, :]
    return p, q, qy.s.copy()


def update_eta_tau(qt: QGamma | None, qy: QGaussian) -> VariationalScalars:
    """Tight values of the auxiliary scalars given q(T) and q(Y)."""
    expected_exp = qy.expected_exp
    et, _ = popularity_moments(qt, expected_exp.shape[1])
    return VariationalScalars(eta=expected_exp @ et, tau=expected_exp.sum(axis=0))


def kappa(x: np.ndarray) -> np.ndarray:
    return 1.0 / np.sqrt(1.0 + np.pi * np.asarray(x) / 8.0)


def extract_memberships(qy: QGaussian) -> np.ndarray:
    """Soft memberships (n, K) from the probit-style softmax approximation
    ``gamma_ik ∝ exp(kappa(s_ik) m_ik)``."""
    logits = (kappa(qy.s) * qy.m).T
    logits = logits - logits.max(axis=1, keepdims=True)
    gamma = np.exp(logits)
    gamma /= gamma.sum(axis=1, keepdims=True)
    return gamma


def hard_assignment(gamma: np.ndarray) -> Partition:
    """Most probable community per node; ties go to the lowest index."""
    gamma = np.asarray(gamma)
    return Partition(np.argmax(gamma, axis=1), gamma.shape[1])
