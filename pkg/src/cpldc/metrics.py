"""Partition quality: NMI, pairwise F-measure and Newman modularity."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from cpldc.network import Network


@dataclass(frozen=True)
class Partition:
    """Hard assignment of nodes to communities ``0..K-1`` (some may be empty)."""

    assignment: np.ndarray
    K: int | None = None

    def __post_init__(self):
        assignment = np.asarray(self.assignment, dtype=np.int64)
        if assignment.ndim != 1:
            raise ValueError("assignment must be 1-d")
        K = self.K
        if K is None:
            K = int(assignment.max()) + 1 if assignment.size else 0
        if assignment.size and (assignment.min() < 0 or assignment.max() >= K):
            raise ValueError("community index outside [0, K)")
        object.__setattr__(self, "assignment", assignment)
        object.__setattr__(self, "K", int(K))

    def __len__(self):
        return self.assignment.size


def _as_partition(x) -> Partition:
    return x if isinstance(x, Partition) else Partition(np.asarray(x))


def contingency(truth, predicted) -> np.ndarray:
    truth, predicted = _as_partition(truth), _as_partition(predicted)
    if len(truth) != len(predicted):
        raise ValueError("partitions cover different numbers of nodes")
    if len(truth) == 0:
        raise ValueError("partitions are empty")
    table = np.zeros((truth.K, predicted.K), dtype=np.int64)
    np.add.at(table, (truth.assignment, predicted.assignment), 1)
    return table


def _entropy(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def nmi(truth, predicted) -> float:
    """Mutual information normalized by the larger of the two entropies.

    Returns 0 (with a warning) when both partitions have a single nonempty
    community.
    """
    table = contingency(truth, predicted).astype(float)
    joint = table / table.sum()
    row, col = joint.sum(axis=1), joint.sum(axis=0)
    h = max(_entropy(row), _entropy(col))
    if h == 0.0:
        warnings.warn("both partitions are trivial; NMI defined as 0", RuntimeWarning, stacklevel=2)
        return 0.0
    nz = joint > 0
    mi = float(np.sum(joint[nz] * np.log(joint[nz] / np.outer(row, col)[nz])))
    return min(max(mi / h, 0.0), 1.0)


def _pairs(counts: np.ndarray) -> int:
    counts = counts.astype(np.int64)
    return int(np.sum(counts * (counts - 1) // 2))


def pwf(truth, predicted) -> float:
    """Pairwise F-measure over unordered node pairs.

    T are pairs sharing a true label, S pairs sharing a predicted community.
    An empty S or T makes precision or recall 0.
    """
    table = contingency(truth, predicted)
    both = _pairs(table)
    same_truth = _pairs(table.sum(axis=1))
    same_pred = _pairs(table.sum(axis=0))
    precision = both / same_pred if same_pred else 0.0
    recall = both / same_truth if same_truth else 0.0
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def symmetric_adjacency(network: Network) -> sp.csr_matrix:
    """0/1 adjacency with a link in either direction counted once."""
    n = network.n
    A = sp.coo_matrix((np.ones(network.num_links), (network.src, network.dst)), shape=(n, n)).tocsr()
    A = A + A.T
    A.data[:] = 1.0
    return A


def modularity(network: Network, predicted) -> float:
    """Newman modularity of ``predicted`` on the symmetrized simple graph."""
    predicted = _as_partition(predicted)
    if len(predicted) != network.n:
        raise ValueError("partition does not cover the network")
    if network.num_links == 0:
        raise ValueError("modularity is undefined for a network without links")
    A = symmetric_adjacency(network).tocoo()
    total = A.data.sum()
    comm = predicted.assignment
    K = predicted.K
    inside = np.bincount(comm[A.row], weights=A.data * (comm[A.row] == comm[A.col]), minlength=K)
    degree_mass = np.bincount(comm[A.row], weights=A.data, minlength=K)
    return float(np.sum(inside / total - (degree_mass / total) ** 2))
