import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import mc_ok
from rmtlab.ensemble import build_observable, make_observable, sample_wigner
from rmtlab.overlap import (OverlapError, clt_samples, clt_statistic, eth_max, eth_samples, gaussian_moment,
                            identity_one_index, identity_qGq, identity_two_index, identity_two_index_chain,
                            moment_report, overlaps, row_sum_check)
from rmtlab.spectral import decompose


def _spectrum(N, beta=1, seed=0):
    return decompose(sample_wigner(N, beta, seed=seed))


def _random_hermitian(rng, N, complex_=False):
    X = rng.standard_normal((N, N))
    if complex_:
        X = X + 1j * rng.standard_normal((N, N))
    return (X + X.conj().T) / 2


# overlap table -----------------------------------------------------------------

def test_zero_observable_gives_zero_table():
    S = _spectrum(16)
    T = overlaps(S, np.zeros((16, 16)))
    assert np.all(T.p == 0)


def test_identity_is_tracelessed_away():
    S = _spectrum(16)
    T = overlaps(S, 3.0 * np.eye(16))
    assert np.max(np.abs(T.p)) <= 1e-12


def test_eigenprojection_diagonal_entry():
    N = 12
    S = _spectrum(N, seed=4)
    u = S.eigenvectors[:, 0]
    T = overlaps(S, np.outer(u, u.conj()))
    assert T.p[0, 0] == pytest.approx(1 - 1 / N, abs=1e-12)
    assert T.p[3, 3] == pytest.approx(-1 / N, abs=1e-12)


@pytest.mark.parametrize("beta", [1, 2])
def test_frobenius_sum(beta, rng):
    N = 256
    S = _spectrum(N, beta, seed=7)
    A = make_observable(_random_hermitian(rng, N, complex_=beta == 2))
    T = overlaps(S, A, check=False)
    frob = np.sum(np.abs(T.p) ** 2)
    assert frob == pytest.approx(N * A.a2, rel=1e-8)


def test_overlap_table_is_hermitian_and_traceless(rng):
    S = _spectrum(32, 2, seed=1)
    T = overlaps(S, _random_hermitian(rng, 32, complex_=True))
    np.testing.assert_allclose(T.p, T.p.conj().T, atol=1e-14)
    assert abs(np.trace(T.p)) <= 1e-10


def test_dimension_mismatch():
    with pytest.raises(OverlapError):
        overlaps(_spectrum(8), np.eye(9))


# CLT statistic -----------------------------------------------------------------

@pytest.mark.parametrize("beta", [1, 2])
def test_clt_statistic_two_by_two(beta):
    from rmtlab.spectral import SpectralData

    S = SpectralData(np.array([-1.0, 1.0]), np.eye(2, dtype=complex if beta == 2 else float))
    T = overlaps(S, np.diag([1.0, -1.0]))
    assert clt_statistic(T, 0) == pytest.approx(math.sqrt(beta))
    assert clt_statistic(T, 1) == pytest.approx(-math.sqrt(beta))


def test_clt_statistic_rejects_degenerate_observable():
    S = _spectrum(8)
    T = overlaps(S, np.eye(8))
    with pytest.raises(OverlapError):
        clt_statistic(T, 3)


@given(c=st.floats(-5, 5), s=st.floats(0.1, 10), seed=st.integers(0, 2**16))
def test_clt_statistic_shift_and_scale_invariant(c, s, seed):
    N = 24
    S = _spectrum(N, seed=seed)
    A = build_observable(N, seed=seed).matrix
    x0 = clt_statistic(overlaps(S, A), N // 2)
    x1 = clt_statistic(overlaps(S, s * A + c * np.eye(N)), N // 2)
    assert x1 == pytest.approx(x0, abs=1e-12 * max(1.0, abs(x0)) * 10)


def test_clt_moments_bulk():
    # N=128 keeps this fast; the acceptance suite runs N=512
    N, M = 128, 2000
    A = build_observable(N, seed=1)
    x = clt_samples(N, 1, M, seed=11, observable=A)
    rep = moment_report(x, 4)
    assert abs(rep.row(2).moment - 1) <= 0.1
    assert abs(rep.row(4).moment - 3) <= 0.45
    assert mc_ok(rep.row(1).moment, 0.0, rep.row(1).stderr)


def test_gaussian_moments():
    assert [gaussian_moment(n) for n in range(1, 9)] == [0, 1, 0, 3, 0, 15, 0, 105]


def test_moment_report_needs_two_samples():
    with pytest.raises(OverlapError):
        moment_report([0.3])


def test_moment_report_stderr_positive():
    rep = moment_report(np.ones(10), 3)
    assert all(r.stderr > 0 for r in rep.rows)


# ETH ---------------------------------------------------------------------------

def test_eth_identity_offdiagonal_zero():
    S = _spectrum(32, seed=2)
    U = S.eigenvectors
    G = U.conj().T @ np.eye(32) @ U
    off = G - np.diag(np.diag(G))
    assert np.max(np.abs(off)) <= 1e-12
    assert eth_max(overlaps(S, np.eye(32))) <= 1e-12


def test_eth_window():
    S = _spectrum(16, seed=3)
    T = overlaps(S, build_observable(16, seed=3))
    assert eth_max(T, (4, 8)) <= eth_max(T)
    with pytest.raises(OverlapError):
        eth_max(T, (5, 5))
    with pytest.raises(OverlapError):
        eth_max(T, (0, 17))


def test_eth_scaling_probe():
    # median max overlap should fall roughly like N^{-1/2} under doubling
    meds = []
    for N in (128, 256):
        A = build_observable(N, seed=5)
        meds.append(np.median(eth_samples(N, 10, seed=N, observable=A)))
    ratio = meds[1] / meds[0]
    assert 0.5 <= ratio <= 1.3 / math.sqrt(2)


# exact identities -----------------------------------------------------------------

@pytest.mark.parametrize("beta", [1, 2])
def test_identity_qGq(beta, rng):
    S = _spectrum(8, beta, seed=8)
    for _ in range(10):
        q = rng.standard_normal(8) + (1j * rng.standard_normal(8) if beta == 2 else 0)
        q = q / np.linalg.norm(q)
        i = int(rng.integers(8))
        assert identity_qGq(S, q, i, 0.1).gap <= 1e-10


def test_identity_qGq_on_eigenvector():
    S = _spectrum(8, seed=9)
    for eta in (1e-3, 0.5, 7.0):
        chk = identity_qGq(S, S.eigenvectors[:, 2], 2, eta)
        assert chk.lhs == pytest.approx(1 / eta, rel=1e-12)
        assert chk.gap <= 1e-10 * max(1.0, 1 / eta)


def test_identity_qGq_flat_kernel():
    S = _spectrum(8, seed=9)
    q = np.ones(8) / math.sqrt(8)
    chk = identity_qGq(S, q, 0, 1e4)
    assert chk.rhs * 1e4 == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize("beta", [1, 2])
def test_identity_one_index(beta, rng):
    S = _spectrum(8, beta, seed=10)
    A = _random_hermitian(rng, 8, complex_=beta == 2)
    for i, j in [(0, 0), (3, 5), (7, 2)]:
        assert identity_one_index(S, make_observable(A), i, j, 0.1).gap <= 1e-10


def test_identity_one_index_zero_observable():
    S = _spectrum(8)
    chk = identity_one_index(S, np.zeros((8, 8)), 1, 2, 0.1)
    assert chk.lhs == 0 and chk.rhs == 0


def test_row_sum(rng):
    S = _spectrum(64, seed=12)
    A = _random_hermitian(rng, 64)
    for j in (0, 31, 63):
        lhs, rhs = row_sum_check(S, A, j)
        assert lhs == pytest.approx(rhs, rel=1e-8)


@pytest.mark.parametrize("beta", [1, 2])
def test_identity_two_index(beta, rng):
    S = _spectrum(8, beta, seed=13)
    A = make_observable(_random_hermitian(rng, 8, complex_=beta == 2))
    for i, j in [(0, 0), (2, 6), (4, 1)]:
        chk = identity_two_index(S, A, i, j, 0.1)
        assert chk.gap <= 1e-10
        alt = identity_two_index_chain(S, A, i, j, 0.1)
        assert abs(alt - chk.lhs) <= 1e-10


def test_identity_two_index_diagonal_positive(rng):
    S = _spectrum(8, seed=14)
    A = make_observable(_random_hermitian(rng, 8))
    for i in range(8):
        assert identity_two_index(S, A, i, i, 0.05).rhs >= 0


def test_identity_two_index_large_eta(rng):
    S = _spectrum(8, seed=15)
    A = make_observable(_random_hermitian(rng, 8))
    eta = 1e4
    chk = identity_two_index(S, A, 1, 5, eta)
    assert chk.rhs * eta ** 2 == pytest.approx(A.a2, rel=1e-6)


def test_identity_eta_must_be_positive():
    S = _spectrum(8)
    with pytest.raises(OverlapError):
        identity_qGq(S, np.ones(8), 0, 0.0)
    with pytest.raises(OverlapError):
        identity_two_index(S, np.eye(8), 0, 1, -1.0)


@given(seed=st.integers(0, 2**32), eta=st.floats(1e-3, 10.0), beta=st.sampled_from([1, 2]))
def test_identities_exact_property(seed, eta, beta):
    N = 8
    S = _spectrum(N, beta, seed=seed)
    r = np.random.default_rng(seed)
    A = make_observable(_random_hermitian(r, N, complex_=beta == 2))
    i, j = (int(v) for v in r.integers(N, size=2))
    tol = 1e-10 * max(1.0, 1 / eta ** 2)
    assert identity_one_index(S, A, i, j, eta).gap <= tol
    assert identity_two_index(S, A, i, j, eta).gap <= tol
