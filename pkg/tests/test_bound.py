import numpy as np
import pytest
from scipy import stats

from cpldc.errors import NumericalError
from cpldc.inference import (
    FitConfig,
    QGamma,
    QGaussian,
    QMultinomial,
    VariationalScalars,
    VariationalState,
    bound_terms,
    fit,
    lower_bound,
)
from cpldc.kernel import KernelModel, KernelParams, build_covariance
from cpldc.sampler import GenerativeConfig, make_separable_content, sample_network

from _states import random_state, small_network, with_


def test_prior_state_bound_is_zero():
    kernel = KernelModel(np.array([[2.0]]))
    cfg = FitConfig(K=1, a=2.0, b=1.5)
    state = VariationalState(
        qt=QGamma(np.array([2.0]), np.array([1.5])),
        qz=QMultinomial(np.zeros((0, 1))),
        qy=QGaussian(m=np.zeros((1, 1)), lam=np.array([[2.0]]), s=np.array([[2.0]]), alpha=np.zeros((1, 1))),
        scalars=VariationalScalars(eta=np.ones(1), tau=np.ones(1)),
    )
    net = small_network(1, [])
    terms = bound_terms(net, state, kernel, cfg)
    for value in terms.values():
        assert value == pytest.approx(0.0, abs=1e-12)
    assert lower_bound(net, state, kernel, cfg) == pytest.approx(0.0, abs=1e-12)


def monte_carlo_terms(net, state, kernel, cfg, samples, rng):
    """Per-sample values of each bound term, drawing T, Y and Z from q."""
    qt, qz, qy, sc = state.qt, state.qz, state.qy, state.scalars
    n, K = net.n, qy.K
    t = rng.gamma(qt.a_tilde, 1.0 / qt.b_tilde, size=(samples, n))
    V = kernel.eigenvectors
    y = np.stack(
        [qy.m[k] + (rng.standard_normal((samples, n)) * np.sqrt(qy.lam[k])) @ V.T for k in range(K)], axis=1
    )  # (samples, K, n)
    cum = np.cumsum(qz.psi, axis=1)
    z = (rng.random((samples, net.num_links, 1)) > cum[None]).sum(axis=2)  # (samples, links)
    z = np.minimum(z, K - 1)
    onehot = np.eye(K)[z]  # (samples, links, K)

    rows = np.arange(samples)[:, None]
    endpoint = y[rows, z, net.dst[None, :]] + y[rows, z, net.src[None, :]] + np.log(t[:, net.dst])
    links = endpoint.sum(axis=1)
    mass = onehot.sum(axis=1)  # (samples, K)
    pull = np.einsum("sn,skn->sk", t, np.exp(y))
    links += np.sum(mass * (1 - pull / sc.eta - np.log(sc.eta)), axis=1)
    out = net.out_degree
    links += np.sum(out * (1 - np.exp(y).sum(axis=1) / sc.tau - np.log(sc.tau)), axis=1)

    popularity = np.sum(
        stats.gamma.logpdf(t, cfg.a, scale=1 / cfg.b) - stats.gamma.logpdf(t, qt.a_tilde, scale=1 / qt.b_tilde),
        axis=1,
    )

    activation = np.zeros(samples)
    for k in range(K):
        Sigma = V @ np.diag(qy.lam[k]) @ V.T
        activation += stats.multivariate_normal(np.zeros(n), kernel.C).logpdf(y[:, k])
        activation -= stats.multivariate_normal(qy.m[k], Sigma).logpdf(y[:, k])

    entropy = -np.log(qz.psi[np.arange(net.num_links)[None, :], z]).sum(axis=1)
    return {"links": links, "popularity": popularity, "activation": activation, "assignment_entropy": entropy}


@pytest.mark.slow
def test_terms_match_monte_carlo():
    net = small_network(5, [(0, 1), (1, 2), (2, 0), (3, 1), (4, 1), (1, 3)])
    state, kernel, cfg = random_state(net, 2, seed=7, a=2.0, b=1.5)
    exact = bound_terms(net, state, kernel, cfg)
    rng = np.random.default_rng(2024)
    draws = {key: [] for key in exact}
    for _ in range(10):
        for key, values in monte_carlo_terms(net, state, kernel, cfg, 10**5, rng).items():
            draws[key].append(values)
    for key, value in exact.items():
        sample = np.concatenate(draws[key])
        se = sample.std(ddof=1) / np.sqrt(sample.size)
        assert abs(sample.mean() - value) <= 3 * se, (key, sample.mean(), value, se)


def test_fixed_popularity_has_no_popularity_term():
    net = small_network(4, [(0, 1), (1, 2), (3, 2)])
    state, kernel, cfg = random_state(net, 2, seed=8, fixed_popularity=True)
    assert bound_terms(net, state, kernel, cfg)["popularity"] == 0.0


def test_non_finite_bound_reports_terms():
    net = small_network(3, [(0, 1)])
    state, kernel, cfg = random_state(net, 2, seed=9)
    bad = VariationalScalars(eta=np.array([0.0, 1.0]), tau=state.scalars.tau)
    with pytest.raises(NumericalError) as info, np.errstate(all="ignore"):
        lower_bound(net, with_(state, scalars=bad), kernel, cfg)
    assert set(info.value.details) == {"links", "popularity", "activation", "assignment_entropy"}


def test_bound_non_decreasing_over_sweeps():
    X, labels = make_separable_content(40, 2, 3, 5.0, seed=1)
    net, _ = sample_network(GenerativeConfig(n=40, K=2, out_degree=3, seed=1, planted_labels=labels,
                                             planted_shift=2.0), X)
    kernel = build_covariance(X.values, KernelParams())
    cfg = FitConfig(K=2, max_iters=15, tol=1e-12)
    values = []
    fit(net, X, kernel, cfg, callback=lambda stage, st: values.append(lower_bound(net, st, kernel, cfg)))
    diffs = np.diff(values)
    assert np.all(diffs >= -1e-9 * np.abs(values[1:]))
