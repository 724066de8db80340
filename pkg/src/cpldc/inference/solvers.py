"""Newton solvers for the per-community Gaussian posterior.

Both subproblems are concave.  The mean is found by full Newton steps using
the matrix inversion lemma (only ``I + W^1/2 C W^1/2`` is factorized, never
C itself).  The eigenbasis variances are found by diagonal Newton sweeps in
log space, so positivity is automatic.  Every accepted step increases the
objective; backtracking halves the step until it does.
"""

from __future__ import annotations

import logging
from typing import NamedTuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from cpldc.errors import ConvergenceError, NumericalError
from cpldc.inference.state import guarded_exp
from cpldc.kernel import KernelModel

logger = logging.getLogger(__name__)

MAX_HALVINGS = 30
# largest log-space move per variance coordinate in one sweep
MAX_LOG_STEP = 2.0


class MeanUpdate(NamedTuple):
    m: np.ndarray
    u: np.ndarray  # C^{-1} m, so m^T C^{-1} m == m @ u
    iterations: int
    grad_norm: float


def mean_objective(kernel: KernelModel, p, qhat, m) -> float:
    """``p^T m - qhat^T exp(m) - m^T C^{-1} m / 2`` evaluated in the eigenbasis."""
    return float(p @ m - qhat @ guarded_exp(m) - 0.5 * kernel.quad_inv(m))


def mean_gradient(kernel: KernelModel, p, qhat, m) -> np.ndarray:
    return p - qhat * guarded_exp(m) - kernel.solve(m)


def update_m(
    kernel: KernelModel,
    p: np.ndarray,
    q: np.ndarray,
    s: np.ndarray,
    m_init: np.ndarray,
    u_init: np.ndarray | None = None,
    max_iters: int = 50,
    gtol: float = 1e-6,
) -> MeanUpdate:
    """Maximize ``p^T m - (q * exp(s/2))^T exp(m) - m^T C^{-1} m / 2``.

    ``u_init`` is ``C^{-1} m_init`` if the caller already has it.  Raises
    :class:`ConvergenceError` if the gradient norm is still above
    ``gtol * max(1, ||p||)`` after ``max_iters`` Newton steps.
    """
    C = kernel.C
    p = np.asarray(p, dtype=float)
    qhat = np.asarray(q, dtype=float) * guarded_exp(0.5 * np.asarray(s, dtype=float))
    if np.any(qhat < 0):
        raise ValueError("q must be non-negative")
    m = np.array(m_init, dtype=float)
    u = kernel.solve(m) if u_init is None else np.array(u_init, dtype=float)
    target = gtol * max(1.0, float(np.linalg.norm(p)))

    def objective(m, u):
        return float(p @ m - qhat @ guarded_exp(m) - 0.5 * (m @ u))

    f = objective(m, u)
    grad_norm = np.inf
    for it in range(max_iters + 1):
        e = qhat * guarded_exp(m)
        grad_norm = float(np.linalg.norm(p - e - u))
        if grad_norm <= target:
            return MeanUpdate(m, u, it, grad_norm)
        if it == max_iters:
            break
        sw = np.sqrt(e)
        v = e * m + p - e
        B = sw[:, None] * C * sw[None, :]
        B[np.diag_indices_from(B)] += 1.0
        try:
            factor = cho_factor(B, lower=True, check_finite=True)
        except (LinAlgError, ValueError) as exc:
            raise NumericalError("Cholesky of I + W^1/2 C W^1/2 failed", iteration=it) from exc
        u_new = v - sw * cho_solve(factor, sw * (C @ v))
        du = u_new - u
        dm = C @ u_new - m
        step = 1.0
        for _ in range(MAX_HALVINGS):
            m_try, u_try = m + step * dm, u + step * du
            f_try = objective(m_try, u_try)
            if f_try >= f:
                break
            step *= 0.5
        else:
            # no ascent left at working precision
            logger.debug("update_m line search stalled at |g|=%.3e", grad_norm)
            return MeanUpdate(m, u, it, grad_norm)
        m, u, f = m_try, u_try, f_try
    raise ConvergenceError(
        "Newton iteration for the activation mean did not converge",
        iterations=max_iters,
        grad_norm=grad_norm,
        target=target,
    )


def variance_objective(kernel: KernelModel, q, m, lam) -> float:
    """``-qtilde^T exp(s/2) + (sum log(lam/sigma) - sum lam/sigma) / 2`` with
    ``qtilde = q * exp(m)`` and ``s = diag(V diag(lam) V^T)``."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        return -np.inf
    qt = np.asarray(q) * guarded_exp(np.asarray(m))
    s = kernel.eigvecs_sq @ lam
    ratio = lam / kernel.eigenvalues
    return float(-qt @ guarded_exp(0.5 * s) + 0.5 * (np.sum(np.log(ratio)) - np.sum(ratio)))


def update_lambda(
    kernel: KernelModel,
    q: np.ndarray,
    m: np.ndarray,
    lam_init: np.ndarray | None = None,
    max_passes: int = 100,
    gtol: float = 1e-9,
    loose_gtol: float = 1e-5,
) -> np.ndarray:
    """Maximize :func:`variance_objective` over the eigenbasis variances.

    Each pass takes a diagonal Newton step in ``log(lam)`` for all
    coordinates at once, using the variances from the start of the pass, and
    backtracks until the objective increases.  If the log-space gradient is
    still above ``loose_gtol`` after ``max_passes`` passes a
    :class:`ConvergenceError` names the worst coordinate.
    """
    sigma = kernel.eigenvalues
    V2, V4 = kernel.eigvecs_sq, kernel.eigvecs_quart
    qt = np.asarray(q, dtype=float) * guarded_exp(np.asarray(m, dtype=float))
    lam = np.array(sigma if lam_init is None else lam_init, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("initial variances must be positive")

    def objective(lam, s):
        ratio = lam / sigma
        return float(-qt @ guarded_exp(0.5 * s) + 0.5 * (np.sum(np.log(ratio)) - np.sum(ratio)))

    s = V2 @ lam
    f = objective(lam, s)
    worst = 0
    for _ in range(max_passes):
        c = qt * guarded_exp(0.5 * s)
        w = V2.T @ c
        grad = 0.5 * (1.0 - lam / sigma - lam * w)
        worst = int(np.argmax(np.abs(grad)))
        if abs(grad[worst]) <= gtol:
            return lam
        curv = 0.5 * lam * w + 0.5 * lam / sigma + 0.25 * lam**2 * (V4.T @ c)
        step = np.clip(grad / curv, -MAX_LOG_STEP, MAX_LOG_STEP)
        t = 1.0
        for _ in range(MAX_HALVINGS):
            lam_try = lam * np.exp(t * step)
            s_try = V2 @ lam_try
            f_try = objective(lam_try, s_try)
            if f_try >= f:
                break
            t *= 0.5
        else:
            return lam
        lam, s, f = lam_try, s_try, f_try

    c = qt * guarded_exp(0.5 * s)
    grad = 0.5 * (1.0 - lam / sigma - lam * (V2.T @ c))
    worst = int(np.argmax(np.abs(grad)))
    if abs(grad[worst]) > loose_gtol:
        raise ConvergenceError(
            "variance sweeps did not converge",
            coordinate=worst,
            gradient=float(grad[worst]),
            passes=max_passes,
        )
    return lam
