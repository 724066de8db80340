"""Variational EM driver."""

from __future__ import annotations

import logging
import warnings
from typing import Callable

import numpy as np
from scipy.cluster.vq import kmeans2

from cpldc.errors import NumericalError
from cpldc.inference.bound import lower_bound
from cpldc.inference.solvers import update_lambda, update_m
from cpldc.inference.state import (
    FitConfig,
    FitResult,
    QGaussian,
    QMultinomial,
    VariationalState,
    guard_trips,
)
from cpldc.inference.updates import (
    compute_pqs,
    extract_memberships,
    update_eta_tau,
    update_q_t,
    update_q_z,
)
from cpldc.kernel import KernelModel
from cpldc.network import ContentMatrix, Network

logger = logging.getLogger(__name__)

Callback = Callable[[str, VariationalState], None]

# consecutive iterations with clamped exp() arguments before giving up
MAX_GUARD_STREAK = 3


def _at_iteration(exc: NumericalError, iteration: int) -> NumericalError:
    """Same error type, tagged with the EM iteration; term diagnostics are kept."""
    tagged = type(exc)(f"fit aborted at iteration {iteration}: {exc}")
    tagged.details = {**exc.details, "iteration": iteration}
    return tagged


def _initial_directions(X: np.ndarray, K: int, init: str, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[1]
    r = np.zeros((K, n))
    if init == "kmeans" and K > 1 and X.shape[0] > 0:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            _, labels = kmeans2(X.T, K, minit="++", seed=rng)
        r[labels, np.arange(n)] = 1.0
        r -= 1.0 / K
    return r + 0.01 * rng.standard_normal((K, n))


def initialize_state(
    network: Network, X: ContentMatrix | np.ndarray, kernel: KernelModel, cfg: FitConfig
) -> VariationalState:
    """Starting point for EM.

    Means are ``C r_k`` for k-means indicator directions ``r_k`` with a
    little seeded noise, rescaled so ``max |m| = 1``; variances start at the
    prior; link posteriors start uniform.
    """
    values = X.values if isinstance(X, ContentMatrix) else np.asarray(X, dtype=float)
    rng = np.random.default_rng(cfg.seed)
    K, n = cfg.K, network.n
    r = _initial_directions(values, K, cfg.init, rng)
    m = r @ kernel.C
    scale = np.abs(m).max()
    if scale > 0:
        m /= scale
        r /= scale
    lam = np.tile(kernel.eigenvalues, (K, 1))
    s = lam @ kernel.eigvecs_sq.T
    qy = QGaussian(m=m, lam=lam, s=s, alpha=r)
    qz = QMultinomial(np.full((network.num_links, K), 1.0 / K))
    scalars = update_eta_tau(None, qy)
    qt = None if cfg.fixed_popularity else update_q_t(network, qz, qy, scalars, cfg)
    return VariationalState(qt=qt, qz=qz, qy=qy, scalars=scalars)


def update_q_y(
    network: Network,
    state: VariationalState,
    kernel: KernelModel,
    cfg: FitConfig,
    callback: Callback | None = None,
) -> QGaussian:
    """Alternate mean and variance solves for every community.

    The statistics p and q do not depend on q(Y), so they are computed once.
    """
    p, q, _ = compute_pqs(network, state.qz, state.qt, state.scalars, state.qy)
    qy = state.qy
    m, lam, s, alpha = qy.m.copy(), qy.lam.copy(), qy.s.copy(), qy.alpha.copy()

    def notify(stage):
        if callback is not None:
            snapshot = QGaussian(m=m.copy(), lam=lam.copy(), s=s.copy(), alpha=alpha.copy())
            callback(stage, VariationalState(state.qt, state.qz, snapshot, state.scalars))

    for k in range(qy.K):
        for _ in range(cfg.qy_rounds):
            res = update_m(kernel, p[k], q[k], s[k], m[k], alpha[k], max_iters=cfg.m_max_iters)
            m[k], alpha[k] = res.m, res.u
            notify(f"m[{k}]")
            lam[k] = update_lambda(kernel, q[k], m[k], lam[k], max_passes=cfg.lambda_max_passes)
            s[k] = kernel.eigvecs_sq @ lam[k]
            notify(f"lambda[{k}]")
    return QGaussian(m=m, lam=lam, s=s, alpha=alpha)


def fit(
    network: Network,
    X: ContentMatrix | np.ndarray,
    kernel: KernelModel,
    cfg: FitConfig,
    callback: Callback | None = None,
    init_state: VariationalState | None = None,
) -> FitResult:
    """Fit community memberships by variational EM.

    Each iteration runs, in order: the auxiliary scalars (eta, tau), q(Z),
    q(T) (skipped when ``cfg.fixed_popularity``), then q(Y).  Every step is
    an exact or ascent-guaranteed coordinate update, so the lower bound is
    non-decreasing.  Iteration stops once the bound changes by less than
    ``cfg.tol``.

    ``callback(stage, state)`` is invoked after every individual update.
    """
    if kernel.n != network.n:
        raise ValueError("kernel size does not match the network")
    state = init_state if init_state is not None else initialize_state(network, X, kernel, cfg)
    if cfg.fixed_popularity and state.qt is not None:
        state = VariationalState(None, state.qz, state.qy, state.scalars)

    def notify(stage):
        if callback is not None:
            callback(stage, state)

    try:
        previous = lower_bound(network, state, kernel, cfg)
    except NumericalError as exc:
        raise _at_iteration(exc, 0) from exc
    diagnostics = {"initial_bound": previous, "overflow_trips": 0, "kernel_floor_count": kernel.floor_count}
    trace: list[float] = []
    converged = False
    streak = 0
    iteration = 0
    for iteration in range(1, cfg.max_iters + 1):
        try:
            scalars = update_eta_tau(state.qt, state.qy)
            state = VariationalState(state.qt, state.qz, state.qy, scalars)
            notify("eta_tau")
            qz = update_q_z(network, state.qt, state.qy, state.scalars)
            state = VariationalState(state.qt, qz, state.qy, state.scalars)
            notify("q_z")
            if not cfg.fixed_popularity:
                qt = update_q_t(network, state.qz, state.qy, state.scalars, cfg)
                state = VariationalState(qt, state.qz, state.qy, state.scalars)
                notify("q_t")
            qy = update_q_y(network, state, kernel, cfg, callback)
            state = VariationalState(state.qt, state.qz, qy, state.scalars)
            bound = lower_bound(network, state, kernel, cfg)
        except NumericalError as exc:
            raise _at_iteration(exc, iteration) from exc

        trips = guard_trips(state.qy.m + 0.5 * state.qy.s)
        if trips:
            diagnostics["overflow_trips"] += trips
            streak += 1
            logger.warning("exp() argument clamped for %d entries at iteration %d", trips, iteration)
            if streak >= MAX_GUARD_STREAK:
                raise NumericalError("repeated exp() overflow", iteration=iteration, entries=trips)
        else:
            streak = 0

        trace.append(bound)
        logger.debug("iteration %d bound %.10g", iteration, bound)
        if abs(bound - previous) < cfg.tol:
            converged = True
            break
        previous = bound

    return FitResult(
        gamma=extract_memberships(state.qy),
        state=state,
        bound_trace=trace,
        iterations=iteration,
        converged=converged,
        diagnostics=diagnostics,
    )
