"""Forward sampler for the popularity-driven link model.

Generative process, for n nodes and K communities:

1. popularity ``t_i ~ Gamma(shape=a, rate=b)``
2. activations ``y_k ~ N(mu_k, C)`` over all nodes, ``mu_k = 0`` unless a
   planted partition is requested
3. memberships ``gamma_i = softmax(y_i)``
4. for each out-link slot of node i: community ``z ~ Mult(gamma_i)`` and
   target ``j`` with probability proportional to ``t_j exp(y_jz)``
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp, softmax

from cpldc.kernel import KernelModel, KernelParams, build_covariance
from cpldc.network import ContentMatrix, Network


@dataclass(frozen=True)
class GenerativeConfig:
    n: int
    K: int
    a: float = 1.0
    b: float = 1.0
    out_degree: int | Sequence[int] = 5
    kernel: KernelParams = field(default_factory=KernelParams)
    seed: int = 0
    exclude_self_links: bool = False
    # planted partition: adds ``planted_shift`` to y_ik when planted_labels[i] == k
    planted_labels: Sequence[int] | None = None
    planted_shift: float = 0.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least two nodes")
        if self.K < 1:
            raise ValueError("need at least one community")
        if not (self.a > 0 and self.b > 0):
            raise ValueError("Gamma hyperparameters must be positive")
        if np.any(np.asarray(self.out_degree) < 0):
            raise ValueError("out-degrees must be non-negative")
        if np.ndim(self.out_degree) == 1 and len(self.out_degree) != self.n:
            raise ValueError("per-node out_degree must have n entries")
        if self.planted_labels is not None and len(self.planted_labels) != self.n:
            raise ValueError("planted_labels must have n entries")

    def degrees(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.out_degree, dtype=np.int64), (self.n,)).copy()


@dataclass(frozen=True)
class LatentTruth:
    t: np.ndarray      # (n,) popularities
    Y: np.ndarray      # (K, n) activations
    gamma: np.ndarray  # (n, K) memberships
    z: np.ndarray      # (N,) community of each link, aligned with Network.src/dst

    @property
    def labels(self) -> np.ndarray:
        """Hard community of each node under the sampled memberships."""
        return np.argmax(self.gamma, axis=1)


def target_distribution(k: int, t: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Probability of every node being the target of a link in community k."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or not np.any(t > 0):
        raise ValueError("popularities must be non-negative and not all zero")
    with np.errstate(divide="ignore"):
        logits = np.log(t) + np.asarray(Y, dtype=float)[k]
    return np.exp(logits - logsumexp(logits))


def link_probability(j: int, k: int, t: np.ndarray, Y: np.ndarray) -> float:
    """Probability that a community-k link ends at node j."""
    return float(target_distribution(k, t, Y)[j])


def _categorical(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    # one draw per row of probs via inverse CDF
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0]) * cdf[:, -1]
    return np.minimum((cdf < u[:, None]).sum(axis=1), probs.shape[1] - 1)


def sample_network(
    config: GenerativeConfig,
    X: ContentMatrix | np.ndarray,
    kernel: KernelModel | None = None,
) -> tuple[Network, LatentTruth]:
    """Draw a network and its latent variables.

    ``kernel`` may be passed to reuse a covariance already built on ``X``.
    The result is a deterministic function of ``config.seed``.
    """
    values = X.values if isinstance(X, ContentMatrix) else np.asarray(X, dtype=float)
    if values.shape[1] != config.n:
        raise ValueError(f"content has {values.shape[1]} columns, expected {config.n}")
    if kernel is None:
        kernel = build_covariance(values, config.kernel)
    rng = np.random.default_rng(config.seed)
    n, K = config.n, config.K

    t = rng.gamma(config.a, 1.0 / config.b, size=n)
    xi = rng.standard_normal((K, n))
    Y = (kernel.eigenvectors @ (np.sqrt(kernel.eigenvalues)[:, None] * xi.T)).T
    if config.planted_labels is not None:
        planted = np.asarray(config.planted_labels, dtype=np.int64)
        Y[planted, np.arange(n)] += config.planted_shift
    gamma = softmax(Y, axis=0).T

    degrees = config.degrees()
    src = np.repeat(np.arange(n), degrees)
    z = _categorical(rng, gamma[src]) if src.size else np.zeros(0, dtype=np.int64)
    dst = np.empty(src.size, dtype=np.int64)
    targets = np.stack([target_distribution(k, t, Y) for k in range(K)])
    if config.exclude_self_links:
        for e in range(src.size):
            p = targets[z[e]].copy()
            p[src[e]] = 0.0
            dst[e] = _categorical(rng, p[None, :])[0]
    else:
        # link order within a community group is preserved, so the draw is
        # reproducible from the seed alone
        u = rng.random(src.size)
        cdf = np.cumsum(targets, axis=1)
        for k in range(K):
            sel = z == k
            dst[sel] = np.minimum(np.searchsorted(cdf[k], u[sel] * cdf[k, -1], side="right"), n - 1)

    labels = config.planted_labels
    network = Network(n, src, dst, labels=None if labels is None else np.asarray(labels))
    return network, LatentTruth(t=t, Y=Y, gamma=gamma, z=z)


def make_separable_content(
    n: int, K: int, d: int, separation: float, seed: int = 0
) -> tuple[ContentMatrix, np.ndarray]:
    """Gaussian content clusters with unit within-cluster spread.

    Cluster c has mean ``separation / sqrt(2) * e_c`` so every pair of means is
    exactly ``separation`` apart.  Labels are balanced and shuffled.
    """
    if n < K:
        raise ValueError("need at least one node per class")
    if d < K:
        raise ValueError("need d >= K for orthogonal cluster means")
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n) % K)
    means = np.zeros((d, K))
    means[np.arange(K), np.arange(K)] = separation / np.sqrt(2.0)
    values = means[:, labels] + rng.standard_normal((d, n))
    return ContentMatrix(values), labels
