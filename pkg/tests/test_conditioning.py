import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from moorepp.conditioning import (accuracy, bundle_metrics, condition_2,
                                  condition_fro, eig_condition_numbers,
                                  match_eigenvalues, metrics_from_gain)
from moorepp.errors import SingularX
from moorepp.moore import RealizedCandidate
from moorepp.system_model import canonicalize_spectrum, validate_system

from conftest import random_pair
from oracles import brute_force_matching, kappa_fro_direct


def _random_unitary(rng, n):
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


# -- eig_condition_numbers ---------------------------------------------------

def test_symmetric_is_perfectly_conditioned(rng):
    S = rng.standard_normal((6, 6))
    c = eig_condition_numbers(S + S.T)
    assert np.allclose(c, 1.0, atol=1e-10)


def test_triangular_two_by_two_by_hand():
    # right vectors (1, 0) and (1000, 1); left vectors (1, -1000) and (0, 1)
    x1, x2 = np.array([1.0, 0.0]), np.array([1000.0, 1.0])
    y1, y2 = np.array([1.0, -1000.0]), np.array([0.0, 1.0])
    expect = {1.0: np.linalg.norm(x1) * np.linalg.norm(y1) / abs(y1 @ x1),
              2.0: np.linalg.norm(x2) * np.linalg.norm(y2) / abs(y2 @ x2)}
    A = np.array([[1.0, 1000.0], [0.0, 2.0]])
    mu = np.linalg.eigvals(A)
    c = eig_condition_numbers(A)
    for lam, ci in zip(mu, c):
        assert ci == pytest.approx(expect[round(lam.real)], rel=1e-9)
    assert c[0] == pytest.approx(np.sqrt(1 + 1000.0 ** 2), rel=1e-9)


def test_near_jordan_is_reported_defective():
    c = eig_condition_numbers([[0.0, 1.0], [0.0, 1e-14]])
    assert np.all(np.isinf(c))


# -- condition_fro / condition_2 ---------------------------------------------

@pytest.mark.parametrize("n", [1, 3, 7])
def test_identity(n):
    assert condition_fro(np.eye(n)) == pytest.approx(n, abs=1e-12)


def test_diag_one_two():
    assert condition_fro(np.diag([1.0, 2.0])) == pytest.approx(2.5, abs=1e-14)


def test_singular_raises():
    with pytest.raises(SingularX):
        condition_fro([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(SingularX):
        condition_2(np.zeros((2, 2)))


def test_matches_definition(rng):
    for _ in range(30):
        X = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        assert condition_fro(X) == pytest.approx(kappa_fro_direct(X), rel=1e-10)


def test_orthogonal_columns_give_n(rng):
    for n in (2, 5, 9):
        Q = _random_unitary(rng, n)
        assert condition_fro(Q) == pytest.approx(n, abs=1e-10)
        # equal column scaling keeps the optimum
        assert condition_fro(3.0 * Q) == pytest.approx(n, abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 7), st.integers(0, 2 ** 32 - 1))
def test_unitary_and_permutation_invariance(n, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    k = condition_fro(X)
    assert k >= n * (1 - 1e-12)
    assert condition_fro(_random_unitary(rng, n) @ X) == pytest.approx(k, rel=1e-9)
    assert condition_fro(X[:, rng.permutation(n)]) == pytest.approx(k, rel=1e-9)
    assert condition_2(X) <= k * (1 + 1e-12)


# -- accuracy ----------------------------------------------------------------

def test_exact_placement_has_zero_error():
    sys = validate_system(np.zeros((2, 2)), np.eye(2))
    spec = canonicalize_spectrum([-1, -2], n=2)
    assert accuracy(sys, np.diag([-1.0, -2.0]), spec) <= 1e-10


def test_accuracy_continuous_in_perturbation():
    sys = validate_system(np.zeros((2, 2)), np.eye(2))
    spec = canonicalize_spectrum([-1, -2], n=2)
    prev = 0.0
    for eps in (1e-6, 1e-5, 1e-4, 1e-3):
        F = np.diag([-1.0, -2.0])
        F[0, 1] = eps
        F[1, 0] = eps
        d = accuracy(sys, F, spec)
        assert prev <= d <= 2 * eps
        prev = d
    F = np.diag([-1.0 + 1e-3, -2.0])
    assert accuracy(sys, F, spec) == pytest.approx(1e-3, rel=1e-9)


def test_accuracy_rejects_wrong_shape():
    sys = validate_system(np.zeros((2, 2)), np.eye(2))
    with pytest.raises(ValueError):
        accuracy(sys, np.zeros((2, 3)), canonicalize_spectrum([-1, -2], n=2))


def test_nonfinite_gain_gives_infinite_error():
    sys = validate_system(np.zeros((2, 2)), np.eye(2))
    F = np.array([[np.nan, 0.0], [0.0, -1.0]])
    assert accuracy(sys, F, canonicalize_spectrum([-1, -2], n=2)) == np.inf


def test_matching_prefers_nearest_conjugate():
    targets = np.array([-1 + 1j, -1 - 1j])
    computed = np.array([-1 - 0.9j, -1 + 0.9j])
    d, cols = match_eigenvalues(computed, targets)
    assert list(cols) == [1, 0]
    assert np.allclose(d, 0.1)


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_assignment_matches_brute_force(n, seed):
    rng = np.random.default_rng(seed)
    targets = rng.uniform(-2, 2, n) + 1j * rng.uniform(-2, 2, n)
    computed = targets + 0.8 * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    d, _ = match_eigenvalues(computed, targets)
    assert d.max() == pytest.approx(brute_force_matching(computed, targets), abs=1e-12)


# -- bundles -----------------------------------------------------------------

def test_diag_bundle():
    sys = validate_system(np.zeros((2, 2)), np.eye(2))
    spec = canonicalize_spectrum([-1, -2], n=2)
    F = np.diag([-1.0, -2.0])
    cand = RealizedCandidate(np.eye(2), np.eye(2), F, F, np.diag([-1.0, -2.0]))
    b = bundle_metrics(sys, cand, spec)
    assert b.kappa_fro == pytest.approx(2.0, abs=1e-14)
    assert b.kappa_2 == pytest.approx(1.0, abs=1e-14)
    assert b.c_inf == pytest.approx(1.0, abs=1e-14)
    assert b.gain_fro == pytest.approx(np.sqrt(5), abs=1e-14)
    assert b.accuracy <= 1e-14
    assert b.flags == ()
    assert b.chain_ok()


def test_bundle_from_gain_random(rng):
    for _ in range(30):
        n = int(rng.integers(2, 7))
        m = int(rng.integers(1, n + 1))
        A, B = random_pair(rng, n, m)
        sys = validate_system(A, B)
        F = rng.standard_normal((m, n))
        mu = np.linalg.eigvals(A + B @ F)
        spec = canonicalize_spectrum(mu, n=n)
        b = metrics_from_gain(sys, F, spec)
        assert b.chain_ok()
        assert b.accuracy <= 1e-8 * max(1, np.abs(mu).max())
        assert len(b.c_per_eig) == n


def test_singular_candidate_is_flagged():
    sys = validate_system(np.zeros((2, 2)), np.eye(2))
    spec = canonicalize_spectrum([-1, -2], n=2)
    X = np.array([[1.0, 1.0], [0.0, 0.0]])
    cand = RealizedCandidate(X, X, np.zeros((2, 2)), np.zeros((2, 2)), np.eye(2))
    b = bundle_metrics(sys, cand, spec)
    assert b.kappa_fro == np.inf
    assert "singular_x" in b.flags


def test_repeated_eigenvalues_are_flagged():
    sys = validate_system(np.zeros((2, 2)), np.eye(2))
    spec = canonicalize_spectrum([-1], [2], n=2)
    b = metrics_from_gain(sys, -np.eye(2), spec)
    assert "repeated_eigenvalues" in b.flags
    assert b.kappa_fro == pytest.approx(2.0)


def test_nonfinite_gain_bundle():
    sys = validate_system(np.zeros((2, 2)), np.eye(2))
    spec = canonicalize_spectrum([-1, -2], n=2)
    b = metrics_from_gain(sys, np.full((2, 2), np.inf), spec)
    assert "nonfinite_gain" in b.flags and b.accuracy == np.inf
