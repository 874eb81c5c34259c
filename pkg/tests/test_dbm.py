import math

import numpy as np
import pytest

from conftest import mc_ok
from rmtlab.dbm import (THETAS, FlowError, brownian_increment, entry_bound, gft_compare, gft_observable,
                        gft_statistic, integrate_eigenvalue_flow, integrate_matrix_flow, integrate_ou,
                        overlap_entry_bound_probe, theta_function)
from rmtlab.ensemble import EntryDistribution, build_observable, sample_wigner
from rmtlab.rng import derive_seed
from rmtlab.spectral import decompose, rigidity_gauge


def _offdiag(M):
    return M[np.triu_indices(M.shape[0], 1)]


def _var_ok(x, target, k=5.0):
    # standard error of the sample variance of (nearly) Gaussian data
    return mc_ok(np.var(x), target, target * math.sqrt(2.0 / x.size), k)


# matrix and OU flows ---------------------------------------------------------------

def test_zero_time_returns_start():
    W0 = sample_wigner(16, 1, seed=1)
    for flow in (integrate_matrix_flow, integrate_ou):
        path = flow(W0, 0.0, steps=3, seed=2)
        for snap in path.snapshots:
            np.testing.assert_array_equal(snap, W0.matrix)


def test_flow_argument_checks():
    W0 = sample_wigner(4, 1, seed=1)
    with pytest.raises(FlowError):
        integrate_matrix_flow(W0, 1.0, steps=0)
    with pytest.raises(FlowError):
        integrate_ou(W0, -1.0)


@pytest.mark.parametrize("beta", [1, 2])
def test_increment_covariance(beta):
    N, h = 150, 0.3
    dB = brownian_increment(N, beta, h, seed=5)
    np.testing.assert_array_equal(dB, dB.conj().T)
    off = _offdiag(dB)
    assert _var_ok(off.real, h / N * (1.0 if beta == 1 else 0.5))
    if beta == 2:
        assert _var_ok(off.imag, h / N * 0.5)
    diag = np.real(np.diagonal(dB))
    assert mc_ok(np.var(diag), h / N * (2.0 if beta == 1 else 1.0), h / N * 2 * math.sqrt(2.0 / N))


def test_matrix_flow_variance_growth():
    N, T = 150, 0.5
    W0 = sample_wigner(N, 1, seed=6)
    path = integrate_matrix_flow(W0, T, steps=4, seed=7)
    WT = path.snapshots[-1]
    np.testing.assert_array_equal(WT, WT.T)
    assert _var_ok(_offdiag(WT - W0.matrix), T / N)
    assert _var_ok(_offdiag(WT), (1 + T) / N)
    assert path.sample().matrix is WT


def test_matrix_flow_edge():
    N, T = 1024, 0.5
    path = integrate_matrix_flow(sample_wigner(N, 1, seed=8), T, seed=9)
    edge = np.linalg.eigvalsh(path.snapshots[-1])[-1]
    assert abs(edge - 2 * math.sqrt(1 + T)) <= 0.05


@pytest.mark.parametrize("beta", [1, 2])
def test_ou_gaussian_stationary(beta):
    N = 150
    path = integrate_ou(sample_wigner(N, beta, seed=10), 2.0, steps=4, seed=11)
    for W in path.snapshots:
        off = _offdiag(W)
        parts = off.real if beta == 1 else np.concatenate([off.real, off.imag])
        assert _var_ok(parts, 1.0 / (beta * N))
        assert mc_ok(np.mean(parts), 0.0, math.sqrt(1.0 / (beta * N) / parts.size))


def test_ou_forgets_non_gaussian_start():
    N = 150
    W0 = sample_wigner(N, 1, EntryDistribution("rademacher"), seed=12)
    WT = integrate_ou(W0, 20.0, steps=2, seed=13).snapshots[-1]
    x = math.sqrt(N) * _offdiag(WT)
    # Rademacher entries have fourth moment 1; after mixing the Gaussian value 3 returns
    assert abs(np.mean(x ** 4) - 3.0) <= 5 * math.sqrt(96.0 / x.size)
    x0 = math.sqrt(N) * _offdiag(W0.matrix)
    assert np.mean(x0 ** 4) == pytest.approx(1.0)


# eigenvalue flow ---------------------------------------------------------------------

@pytest.mark.parametrize("beta,factor", [(1, 2.0), (2, 1.0)])
def test_single_eigenvalue_is_brownian(beta, factor):
    T, runs = 1.0, 2000
    ends = np.array([integrate_eigenvalue_flow([0.0], T, steps=10, steps_per_unit=10, seed=derive_seed(3, k),
                                               beta=beta).values[-1, 0] for k in range(runs)])
    assert _var_ok(ends, factor * T)
    assert mc_ok(ends.mean(), 0.0, math.sqrt(factor * T / runs))


def test_eigenvalue_flow_preserves_order():
    lam0 = decompose(sample_wigner(50, 1, seed=14)).eigenvalues
    path = integrate_eigenvalue_flow(lam0, 0.2, seed=15, record_every=10)
    assert np.all(np.diff(path.values, axis=1) > 0)
    assert path.times[-1] == pytest.approx(0.2)
    assert path.values.shape == (path.times.size, 50)


def test_eigenvalue_flow_bad_start():
    with pytest.raises(FlowError):
        integrate_eigenvalue_flow([1.0, 0.0], 0.1)
    with pytest.raises(FlowError):
        integrate_eigenvalue_flow([0.0, 0.0], 0.1)


def test_eigenvalue_flow_persistent_crossing():
    lam0 = np.linspace(-1, 1, 20)
    with pytest.raises(FlowError, match="persistent crossing"):
        integrate_eigenvalue_flow(lam0, 1.0, steps=2, steps_per_unit=2, floor=0.1, max_depth=1, seed=0)


def test_coupling_with_matrix_flow():
    # lambda_{N/2}(T) from the matrix flow and from the eigenvalue SDE agree in law
    N, T, runs = 8, 0.5, 500
    W0 = sample_wigner(N, 1, seed=16)
    lam0 = decompose(W0).eigenvalues
    a = np.array([np.linalg.eigvalsh(integrate_matrix_flow(W0, T, seed=derive_seed(17, k)).snapshots[-1])[N // 2]
                  for k in range(runs)])
    b = np.array([integrate_eigenvalue_flow(lam0, T, steps=250, steps_per_unit=500, seed=derive_seed(18, k))
                  .values[-1, N // 2] for k in range(runs)])
    se_mean = math.sqrt(a.var(ddof=1) / runs + b.var(ddof=1) / runs)
    assert abs(a.mean() - b.mean()) <= 3 * se_mean
    va, vb = a.var(ddof=1), b.var(ddof=1)
    se_var = math.sqrt(2 * va ** 2 / (runs - 1) + 2 * vb ** 2 / (runs - 1))
    assert abs(va - vb) <= 3 * se_var


@pytest.mark.xfail(strict=True, reason="rigidity gauge along the path is 4.8-6.5 against N^0.15 = 2.55 at N=512; "
                                       "see the decisions ledger")
def test_rigidity_along_path():
    N, T, runs = 512, 0.05, 5
    ok = 0
    for k in range(runs):
        lam0 = decompose(sample_wigner(N, 1, seed=derive_seed(19, k))).eigenvalues
        path = integrate_eigenvalue_flow(lam0, T, seed=derive_seed(20, k), record_every=10)
        ok += all(rigidity_gauge(v, t) <= N ** 0.15 for t, v in zip(path.times, path.values))
    assert ok >= 0.95 * runs


# Green function comparison -------------------------------------------------------------

def test_theta_presets():
    x = np.array([-2.0, 0.5, 3.0])
    np.testing.assert_array_equal(THETAS["one"](x), 1.0)
    np.testing.assert_allclose(THETAS["x4"](x), x ** 4)
    assert theta_function(np.sin) is np.sin
    with pytest.raises(FlowError):
        theta_function("x5")


def test_gft_observable_dense_oracle():
    N = 64
    S = decompose(sample_wigner(N, 1, seed=21))
    A0 = build_observable(N, seed=21).centred
    z = 0.3 + 0.02j
    G = np.linalg.inv(S.dense_matrix() - z * np.eye(N))
    im_g = (G - G.conj().T) / 2j
    want = math.sqrt(N) * np.trace(im_g @ A0).real / N
    assert gft_observable(S, A0, z) == pytest.approx(want, rel=1e-10)
    assert gft_statistic(S, A0, z, "x2") == pytest.approx(want ** 2, rel=1e-10)


def test_gft_same_ensemble_gives_zero():
    N = 32
    A0 = build_observable(N, seed=1).centred
    z = 1j * N ** -1.05
    rep = gft_compare(N, 20, 0.0, z, A0, seed=3)
    assert rep.delta == 0.0
    np.testing.assert_array_equal(rep.values[0], rep.values[1])
    again = gft_compare(N, 20, 0.0, z, A0, seed=3)
    np.testing.assert_array_equal(rep.values, again.values)


def test_gft_constant_theta_gives_zero():
    N = 32
    rep = gft_compare(N, 20, N ** -0.8, 1j * N ** -1.05, build_observable(N, seed=1).centred, theta="one", seed=4)
    assert rep.delta == 0.0 and rep.stderr == 0.0 and rep.passed


def test_gft_small_run_passes():
    N = 64
    rep = gft_compare(N, 200, N ** -0.8, 1j * N ** -1.1, build_observable(N, seed=2).centred, seed=5)
    assert rep.passed
    assert rep.stderr > 0


def test_gft_eta_window():
    N = 64
    A0 = build_observable(N, seed=2).centred
    with pytest.raises(FlowError):
        gft_compare(N, 2, 0.1, 1j * N ** -1.3, A0)
    with pytest.raises(FlowError):
        gft_compare(N, 2, 0.1, 2j, A0)


# entry bound ---------------------------------------------------------------------------

def test_entry_probe_zero_observable():
    S = decompose(sample_wigner(32, 1, seed=22))
    assert overlap_entry_bound_probe(S, np.zeros((32, 32)), 0.01j, -0.01j) == 0.0


def test_entry_probe_dense_oracle():
    N = 32
    S = decompose(sample_wigner(N, 2, seed=23))
    A = build_observable(N, seed=3).matrix
    z = 0.1 + 0.05j
    G1 = np.linalg.inv(S.dense_matrix() - z * np.eye(N))
    G2 = np.linalg.inv(S.dense_matrix() - np.conj(z) * np.eye(N))
    want = np.max(np.abs(G1 @ A @ G2))
    assert overlap_entry_bound_probe(S, A, z, np.conj(z)) == pytest.approx(want, rel=1e-9)


def test_entry_bound_value():
    assert entry_bound(512) == pytest.approx(512 ** 0.9)


@pytest.mark.xfail(strict=True, reason="needs xi near 0.5 at N=512: 22/50 samples pass; see the decisions ledger")
def test_entry_bound_traceless():
    N = 512
    z = 1j * N ** -1.1
    A = build_observable(N, seed=0).centred
    ok = 0
    for k in range(50):
        S = decompose(sample_wigner(N, 1, seed=derive_seed(24, k)), validate=False)
        ok += overlap_entry_bound_probe(S, A, z, np.conj(z)) <= entry_bound(N)
    assert ok >= 48


def test_entry_bound_identity_control():
    N = 512
    z = 1j * N ** -1.1
    ratios = []
    for k in range(5):
        S = decompose(sample_wigner(N, 1, seed=derive_seed(25, k)), validate=False)
        ratios.append(overlap_entry_bound_probe(S, np.eye(N), z, np.conj(z)) / entry_bound(N))
    assert np.median(ratios) >= N ** 0.3
