"""Shared Gaussian-process covariance over node contents."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from cpldc.errors import NumericalError
from cpldc.network import ContentMatrix

logger = logging.getLogger(__name__)

KINDS = ("rbf", "linear")


@dataclass(frozen=True)
class KernelParams:
    """Covariance hyperparameters.

    ``theta`` scales the kernel, ``sigma2`` is the RBF bandwidth (unused for
    the linear kernel) and ``jitter`` is added to the diagonal.
    """

    kind: str = "rbf"
    theta: float = 1.0
    sigma2: float = 5.0
    jitter: float = 1e-5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kernel kind must be one of {KINDS}, got {self.kind!r}")
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        if not self.jitter >= 0:
            raise ValueError("jitter must be non-negative")


class KernelModel:
    """Covariance matrix C together with its eigendecomposition.

    Attributes
    ----------
    C : (n, n) ndarray
        Symmetric covariance including jitter.
    eigenvalues : (n,) ndarray
        Ascending eigenvalues, floored at the jitter level.
    eigenvectors : (n, n) ndarray
        Orthonormal eigenvectors as columns.
    eig_sq_norms : (n,) ndarray
        Squared column norms of ``eigenvectors`` (one up to round-off).
    floor_count : int
        Number of eigenvalues raised to the floor.
    """

    def __init__(self, C, params: KernelParams | None = None):
        C = np.array(C, dtype=float)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise ValueError("covariance must be square")
        if not np.all(np.isfinite(C)):
            raise NumericalError("covariance has non-finite entries")
        self.C = C
        self.params = params
        floor = params.jitter if params is not None else 0.0
        try:
            w, V = np.linalg.eigh(C)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("eigendecomposition failed", reason=str(exc)) from exc
        # without jitter still keep a tiny positive floor so C^{-1} exists
        floor = max(floor, np.finfo(float).tiny)
        low = w < floor
        self.floor_count = int(low.sum())
        if self.floor_count:
            logger.debug("floored %d eigenvalues at %g", self.floor_count, floor)
            w = np.where(low, floor, w)
        self.eigenvalues = w
        self.eigenvectors = V
        self.eig_sq_norms = np.einsum("ij,ij->j", V, V)

    @property
    def n(self) -> int:
        return self.C.shape[0]

    @cached_property
    def eigvecs_sq(self) -> np.ndarray:
        """Elementwise squares of the eigenvectors, ``V**2``."""
        return self.eigenvectors**2

    @cached_property
    def eigvecs_quart(self) -> np.ndarray:
        return self.eigvecs_sq**2

    def to_eigenbasis(self, x: np.ndarray) -> np.ndarray:
        return self.eigenvectors.T @ x

    def from_eigenbasis(self, c: np.ndarray) -> np.ndarray:
        return self.eigenvectors @ c

    def solve(self, x: np.ndarray) -> np.ndarray:
        """C^{-1} x through the eigendecomposition."""
        w = self.eigenvalues if np.ndim(x) == 1 else self.eigenvalues[:, None]
        return self.from_eigenbasis(self.to_eigenbasis(x) / w)

    def quad_inv(self, m: np.ndarray) -> float:
        """m^T C^{-1} m = sum_i (v_i^T m)^2 / sigma_i."""
        c = self.to_eigenbasis(m)
        return float(np.sum(c * c / self.eigenvalues))

    def logdet(self) -> float:
        return float(np.sum(np.log(self.eigenvalues)))


def _sq_distances(values: np.ndarray) -> np.ndarray:
    # columns are points; expanded form, clamped at zero
    sq = np.einsum("ij,ij->j", values, values)
    gram = values.T @ values
    d2 = sq[:, None] + sq[None, :] - 2.0 * gram
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def build_covariance(X: ContentMatrix | np.ndarray, params: KernelParams) -> KernelModel:
    """Build ``C(i, j) = k(x_i, x_j) + jitter * [i == j]`` and decompose it.

    RBF: ``theta * exp(-||x_i - x_j||^2 / (2 sigma2))``; linear:
    ``theta * x_i^T x_j``.
    """
    values = X.values if isinstance(X, ContentMatrix) else np.asarray(X, dtype=float)
    if values.ndim != 2 or values.shape[1] < 1:
        raise ValueError("content must be a d x n matrix with n >= 1")
    if not np.all(np.isfinite(values)):
        raise ValueError("content matrix has non-finite entries")
    if params.kind == "rbf":
        C = params.theta * np.exp(-_sq_distances(values) / (2.0 * params.sigma2))
    else:
        C = params.theta * (values.T @ values)
    # exact symmetry regardless of BLAS summation order
    C = np.triu(C) + np.triu(C, 1).T
    C[np.diag_indices_from(C)] += params.jitter
    return KernelModel(C, params)


def diag_from_eigenbasis(eigvecs: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Diagonal of ``V diag(lam) V^T`` without forming the matrix.

    Accepts a single weight vector or a (K, n) stack of them.
    """
    lam = np.asarray(lam, dtype=float)
    sq = eigvecs**2
    return lam @ sq.T if lam.ndim == 2 else sq @ lam
