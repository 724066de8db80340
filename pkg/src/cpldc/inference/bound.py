"""Evidence lower bound for the variational posterior."""

from __future__ import annotations

import numpy as np
from scipy.special import digamma, gammaln

from cpldc.errors import NumericalError
from cpldc.inference.state import FitConfig, VariationalState, popularity_moments
from cpldc.kernel import KernelModel
from cpldc.network import Network


def bound_terms(
    network: Network, state: VariationalState, kernel: KernelModel, cfg: FitConfig
) -> dict[str, float]:
    """The lower bound split into its four additive pieces.

    ``links``
        Expected log link likelihood under the ``-log x >= 1 - x`` relaxation
        with the auxiliary scalars eta (per community) and tau (per node).
    ``popularity``
        ``E[log Gam(t | a, b)] + H[q(t)]``, i.e. minus the KL to the prior;
        zero when popularity is pinned at 1.
    ``activation``
        Minus the KL from each q(y_k) to N(0, C), computed in the eigenbasis.
    ``assignment_entropy``
        Entropy of the per-link community posteriors.
    """
    qt, qz, qy, sc = state.qt, state.qz, state.qy, state.scalars
    n = network.n
    et, elogt = popularity_moments(qt, n)
    psi = qz.psi
    expected_exp = qy.expected_exp
    mass = qz.community_mass

    endpoint = qy.m[:, network.dst].T + qy.m[:, network.src].T + elogt[network.dst][:, None]
    links = float(np.sum(psi * endpoint))
    links += float(np.sum(mass * (1.0 - (expected_exp @ et) / sc.eta - np.log(sc.eta))))
    links += float(np.sum(network.out_degree * (1.0 - expected_exp.sum(axis=0) / sc.tau - np.log(sc.tau))))

    if qt is None:
        popularity = 0.0
    else:
        a, b = cfg.a, cfg.b
        at, bt = qt.a_tilde, qt.b_tilde
        cross = n * (a * np.log(b) - gammaln(a)) + np.sum((a - 1.0) * elogt - b * et)
        entropy = np.sum(at - np.log(bt) + gammaln(at) + (1.0 - at) * digamma(at))
        popularity = float(cross + entropy)

    ratio = qy.lam / kernel.eigenvalues[None, :]
    quad = sum(kernel.quad_inv(qy.m[k]) for k in range(qy.K))
    activation = 0.5 * float(qy.K * n + np.sum(np.log(ratio)) - np.sum(ratio) - quad)

    positive = psi[psi > 0]
    assignment_entropy = float(-np.sum(positive * np.log(positive)))

    return {
        "links": links,
        "popularity": popularity,
        "activation": activation,
        "assignment_entropy": assignment_entropy,
    }


def lower_bound(
    network: Network, state: VariationalState, kernel: KernelModel, cfg: FitConfig
) -> float:
    terms = bound_terms(network, state, kernel, cfg)
    total = sum(terms.values())
    if not np.isfinite(total):
        raise NumericalError("lower bound is not finite", **terms)
    return float(total)
