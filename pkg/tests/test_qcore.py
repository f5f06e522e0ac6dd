import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from postmarkov import qcore
from postmarkov.errors import NumericalError, ValidationError

seeds = st.integers(min_value=0, max_value=2**32 - 1)
dims = st.integers(min_value=2, max_value=4)


def ket0():
    return qcore.projector([1, 0])


def ket1():
    return qcore.projector([0, 1])


# ---------------------------------------------------------------- vectorization


@given(seeds, dims)
def test_vec_unvec_round_trip(seed, d):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    np.testing.assert_array_equal(qcore.unvec(qcore.vec(X)), X)


def test_vec_is_column_stacking():
    X = np.array([[1, 2], [3, 4]])
    np.testing.assert_array_equal(qcore.vec(X), [1, 3, 2, 4])


@given(seeds)
def test_vec_of_product_uses_transpose_kron(seed):
    rng = np.random.default_rng(seed)
    A, X, B = (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(3))
    np.testing.assert_allclose(qcore.vec(A @ X @ B), np.kron(B.T, A) @ qcore.vec(X), atol=1e-12)


# ---------------------------------------------------------------- tensor product / partial trace


@pytest.mark.parametrize(
    "A, B, expected",
    [
        (np.eye(2), np.eye(2), np.eye(4)),
        (np.diag([1, 0]), np.diag([0, 1]), np.diag([0, 1, 0, 0])),
        (np.diag([0.6, 0.4]), np.diag([0.6, 0.4]), np.diag([9, 6, 6, 4]) / 25),
    ],
)
def test_tensor_product_examples(A, B, expected):
    np.testing.assert_allclose(qcore.tensor_product(A, B), expected, atol=1e-15)


def test_tensor_product_is_left_outer():
    A = np.array([[0, 1], [0, 0]])
    B = np.eye(2)
    # A's indices outer: block (0, 1) holds B
    np.testing.assert_array_equal(qcore.tensor_product(A, B)[0:2, 2:4], B)


def test_partial_trace_bell_state():
    phi = np.array([1, 0, 0, 1]) / math.sqrt(2)
    np.testing.assert_allclose(qcore.partial_trace(qcore.projector(phi), (2, 2), keep="A"), np.eye(2) / 2)


def test_partial_trace_of_swapped_product_gives_ancilla(rng):
    rho = qcore.random_density_matrix(2, rng)
    eta = np.diag([0.6, 0.4])
    S = qcore.swap_operator(2)
    out = qcore.partial_trace(S @ qcore.tensor_product(rho, eta) @ S.conj().T, (2, 2), keep="A")
    np.testing.assert_allclose(out, eta, atol=1e-14)


@given(seeds, dims, dims)
def test_partial_trace_of_product(seed, dA, dB):
    rng = np.random.default_rng(seed)
    rho = qcore.random_density_matrix(dA, rng)
    eta = qcore.random_density_matrix(dB, rng)
    M = qcore.tensor_product(rho, eta)
    np.testing.assert_allclose(qcore.partial_trace(M, (dA, dB), keep="A"), rho, atol=1e-12)
    np.testing.assert_allclose(qcore.partial_trace(M, (dA, dB), keep="B"), eta, atol=1e-12)


def test_partial_trace_dimension_mismatch():
    with pytest.raises(ValidationError):
        qcore.partial_trace(np.eye(4), (2, 3))


# ---------------------------------------------------------------- fidelity / trace distance


def test_fidelity_examples():
    rho = qcore.projector(np.array([1, 2]) / math.sqrt(5))
    eta = np.diag([0.6, 0.4])
    assert qcore.fidelity(rho, rho) == pytest.approx(1.0, abs=1e-12)
    assert qcore.fidelity(ket0(), ket1()) == pytest.approx(0.0, abs=1e-12)
    assert qcore.fidelity(rho, eta) == pytest.approx(11 / 25, abs=1e-12)


def test_fidelity_pure_state_formula_matches_matrix_route():
    psi = np.array([1, 2]) / math.sqrt(5)
    eta = np.diag([0.6, 0.4])
    assert qcore.fidelity(eta, qcore.projector(psi)) == pytest.approx(np.vdot(psi, eta @ psi).real, abs=1e-12)


@given(seeds, dims)
def test_fidelity_symmetric_and_bounded(seed, d):
    rng = np.random.default_rng(seed)
    rho = qcore.random_density_matrix(d, rng)
    sigma = qcore.random_density_matrix(d, rng, rank=1)
    f = qcore.fidelity(rho, sigma)
    assert 0.0 <= f <= 1.0
    assert abs(f - qcore.fidelity(sigma, rho)) <= 1e-10


@given(seeds, dims)
def test_fidelity_one_iff_trace_distance_zero(seed, d):
    rng = np.random.default_rng(seed)
    rho = qcore.random_density_matrix(d, rng)
    assert qcore.fidelity(rho, rho) == pytest.approx(1.0, abs=1e-8)
    assert qcore.trace_distance(rho, rho) <= 1e-8
    sigma = qcore.random_density_matrix(d, rng)
    if qcore.trace_distance(rho, sigma) > 1e-3:
        assert qcore.fidelity(rho, sigma) < 1 - 1e-8


def test_fidelity_clips_tiny_negative_eigenvalues():
    rho = np.diag([1 + 5e-11, -5e-11])
    assert qcore.fidelity(rho, ket0()) == pytest.approx(1.0, abs=1e-9)


def test_fidelity_rejects_negative_input():
    with pytest.raises(ValidationError):
        qcore.fidelity(np.diag([1.1, -0.1]), ket0())


@pytest.mark.parametrize(
    "rho, sigma, expected",
    [
        (np.diag([0.3, 0.7]), np.diag([0.3, 0.7]), 0.0),
        (np.diag([1.0, 0.0]), np.diag([0.0, 1.0]), 1.0),
        (np.eye(2) / 2, np.diag([0.6, 0.4]), 0.1),
    ],
)
def test_trace_distance_examples(rho, sigma, expected):
    assert qcore.trace_distance(rho, sigma) == pytest.approx(expected, abs=1e-14)


# ---------------------------------------------------------------- superoperators


def test_superop_from_kraus_identity():
    np.testing.assert_allclose(qcore.superop_from_kraus([np.eye(2)]), np.eye(4))


def test_superop_from_kraus_reset_to_ground(rng):
    K = [np.array([[1, 0], [0, 0]]), np.array([[0, 1], [0, 0]])]
    S = qcore.superop_from_kraus(K)
    for _ in range(5):
        rho = qcore.random_density_matrix(2, rng)
        np.testing.assert_allclose(qcore.apply_superop(S, rho), ket0(), atol=1e-14)


def test_superop_from_kraus_empty():
    with pytest.raises(ValidationError):
        qcore.superop_from_kraus([])


@given(seeds, dims)
def test_kraus_maps_preserve_trace(seed, d):
    rng = np.random.default_rng(seed)
    # Kraus set from a random isometry
    V = qcore.random_unitary(2 * d, rng)[:, :d]
    K = [V[i * d : (i + 1) * d] for i in range(2)]
    np.testing.assert_allclose(sum(k.conj().T @ k for k in K), np.eye(d), atol=1e-12)
    S = qcore.superop_from_kraus(K)
    assert qcore.is_trace_preserving(S)
    rho = qcore.random_density_matrix(d, rng)
    assert abs(np.trace(qcore.apply_superop(S, rho)) - 1) <= 1e-10
    assert qcore.min_eigenvalue_hermitian(qcore.choi_of(S)) >= -1e-9


def test_apply_superop_unitary(rng):
    U = qcore.random_unitary(3, rng)
    rho = qcore.random_density_matrix(3, rng)
    np.testing.assert_allclose(
        qcore.apply_superop(qcore.superop_from_unitary(U), rho), U @ rho @ U.conj().T, atol=1e-14
    )
    np.testing.assert_allclose(qcore.apply_superop(qcore.identity_superop(3), rho), rho)


def test_apply_superop_dimension_mismatch():
    with pytest.raises(ValidationError):
        qcore.apply_superop(np.eye(4), np.eye(3) / 3)


# ---------------------------------------------------------------- Choi matrix


def test_choi_of_identity_is_unnormalized_bell_projector():
    C = qcore.choi_of(np.eye(4))
    phi = np.array([1, 0, 0, 1]) / math.sqrt(2)
    np.testing.assert_allclose(C, 2 * qcore.projector(phi), atol=1e-15)
    np.testing.assert_allclose(np.linalg.eigvalsh(C), [0, 0, 0, 2], atol=1e-14)


def test_choi_of_depolarizing():
    # rho -> Tr(rho) I / 2
    S = qcore.vec(np.eye(2) / 2)[:, None] @ qcore.trace_functional(2)[None, :]
    np.testing.assert_allclose(qcore.choi_of(S), np.eye(4) / 2, atol=1e-15)


def test_choi_ancilla_factor_comes_first():
    # map X -> |0><0| Tr(X): Choi = sum_kl |k><l| (x) delta_kl |0><0| = I (x) |0><0|
    S = qcore.vec(ket0())[:, None] @ qcore.trace_functional(2)[None, :]
    np.testing.assert_allclose(qcore.choi_of(S), np.kron(np.eye(2), ket0()), atol=1e-15)


@given(seeds)
def test_choi_of_unitary_is_rank_one(seed):
    rng = np.random.default_rng(seed)
    C = qcore.choi_of(qcore.superop_from_unitary(qcore.random_unitary(2, rng)))
    w = np.linalg.eigvalsh(C)
    np.testing.assert_allclose(w, [0, 0, 0, 2], atol=1e-12)
    assert np.trace(C).real == pytest.approx(2)


@pytest.mark.parametrize(
    "M, expected",
    [(np.eye(4), 1.0), (np.diag([1.0, -0.25]), -0.25), (qcore.choi_of(np.eye(4)), 0.0)],
)
def test_min_eigenvalue_examples(M, expected):
    assert qcore.min_eigenvalue_hermitian(M) == pytest.approx(expected, abs=1e-14)


def test_min_eigenvalue_rejects_non_hermitian():
    with pytest.raises(ValidationError):
        qcore.min_eigenvalue_hermitian(np.array([[0, 1], [0, 0]]))


# ---------------------------------------------------------------- matrix functions


def test_matrix_exp_examples():
    np.testing.assert_allclose(qcore.matrix_function(np.zeros((3, 3)), "exp"), np.eye(3))
    np.testing.assert_allclose(
        qcore.matrix_function(np.diag([0.5, -2.0]), "exp"), np.diag(np.exp([0.5, -2.0])), rtol=1e-14
    )


@given(seeds)
def test_log_inverts_exp_for_small_hermitian(seed):
    rng = np.random.default_rng(seed)
    G = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    H = G + G.conj().T
    A = 0.1 * H / max(1.0, np.max(np.abs(np.linalg.eigvalsh(H))))
    back = qcore.matrix_function(qcore.matrix_function(A, "exp"), "log")
    np.testing.assert_allclose(back, A, atol=1e-12)


def test_sqrt_squares_back(rng):
    rho = qcore.random_density_matrix(3, rng)
    r = qcore.matrix_function(rho + 0.1 * np.eye(3), "sqrt")
    np.testing.assert_allclose(r @ r, rho + 0.1 * np.eye(3), atol=1e-12)


def test_log_rejects_branch_cut():
    with pytest.raises(NumericalError):
        qcore.matrix_function(np.diag([1.0, -1.0]), "log")


def test_log_rejects_defective_matrix():
    with pytest.raises(NumericalError):
        qcore.matrix_function(np.array([[1.0, 1.0], [0.0, 1.0]]), "log")


def test_matrix_function_unknown_name():
    with pytest.raises(ValidationError):
        qcore.matrix_function(np.eye(2), "sin")


# ---------------------------------------------------------------- validation


def test_check_density_matrix_rejects_bad_states():
    with pytest.raises(ValidationError):
        qcore.check_density_matrix(np.diag([0.5, 0.6]))
    with pytest.raises(ValidationError):
        qcore.check_density_matrix(np.array([[0.5, 0.5], [0, 0.5]]))
    with pytest.raises(ValidationError):
        qcore.check_density_matrix(np.diag([1.2, -0.2]))
