import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from postmarkov import collision, qcore
from postmarkov.collision import CollisionSpec, MeasurementSpec
from postmarkov.errors import ValidationError

seeds = st.integers(min_value=0, max_value=2**32 - 1)
angles = st.floats(min_value=-math.pi, max_value=math.pi, allow_nan=False)

ETA = np.diag([0.6, 0.4]).astype(complex)


def pswap_map_closed_form(a, rho, eta):
    """One partial-swap collision: c^2 rho + s^2 eta + i c s [eta, rho]."""
    c, s = math.cos(a), math.sin(a)
    return c * c * rho + s * s * eta + 1j * c * s * (eta @ rho - rho @ eta)


def valid_state(rho, tol=1e-10):
    assert qcore.is_hermitian(rho, tol)
    assert abs(np.trace(rho) - 1) <= tol
    assert np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0] >= -1e-9


# ---------------------------------------------------------------- unitaries


def test_zero_hamiltonians_give_identity():
    Z = np.zeros((2, 2))
    U = collision.collision_unitary_from_hamiltonians(Z, Z, np.zeros((4, 4)), 0.7)
    np.testing.assert_allclose(U, np.eye(4), atol=1e-15)


@pytest.mark.parametrize("alpha, tau", [(0.1, 1.0), (0.9, 0.3), (-0.4, 2.0)])
def test_swap_interaction_reproduces_pswap(alpha, tau):
    # exp(-i V tau) with V = -(alpha / tau) S equals cos(alpha) + i sin(alpha) S since S^2 = 1
    S = qcore.swap_operator(2)
    Z = np.zeros((2, 2))
    U = collision.collision_unitary_from_hamiltonians(Z, Z, -(alpha / tau) * S, tau)
    np.testing.assert_allclose(U, collision.pswap(alpha), atol=1e-14)


def test_doubling_tau_squares_unitary(rng):
    G = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    V = G + G.conj().T
    H_S, H_B = np.diag([0.0, 1.0]), np.diag([0.0, 0.5])
    U1 = collision.collision_unitary_from_hamiltonians(H_S, H_B, V, 0.2)
    U2 = collision.collision_unitary_from_hamiltonians(H_S, H_B, V, 0.4)
    np.testing.assert_allclose(U2, U1 @ U1, atol=1e-12)


def test_non_hermitian_hamiltonian_rejected():
    with pytest.raises(ValidationError):
        collision.collision_unitary_from_hamiltonians(np.array([[0, 1], [0, 0]]), np.zeros((2, 2)), np.zeros((4, 4)), 1.0)


def test_pswap_special_angles():
    np.testing.assert_allclose(collision.pswap(0.0), np.eye(4))
    np.testing.assert_allclose(collision.pswap(math.pi / 2), 1j * qcore.swap_operator(2), atol=1e-15)


@given(angles, st.integers(min_value=2, max_value=4))
def test_pswap_unitary_and_commutes_with_swap(alpha, d):
    U = collision.pswap(alpha, d)
    S = qcore.swap_operator(d)
    assert qcore.is_unitary(U)
    np.testing.assert_allclose(U @ S, S @ U, atol=1e-14)


@given(angles, angles)
def test_pswap_angles_add(a, b):
    np.testing.assert_allclose(collision.pswap(b) @ collision.pswap(a), collision.pswap(a + b), atol=1e-13)


def test_collision_spec_validation():
    with pytest.raises(ValidationError):
        CollisionSpec(2, 2, np.eye(3))
    with pytest.raises(ValidationError):
        CollisionSpec(2, 2, 2 * np.eye(4))
    with pytest.raises(ValidationError):
        CollisionSpec(2, 2, np.eye(4), tau=0.0)


def test_measurement_spec_rejects_bad_basis():
    with pytest.raises(ValidationError):
        MeasurementSpec(np.array([[1, 1], [0, 1]]), np.eye(4))
    with pytest.raises(ValidationError):
        MeasurementSpec(np.eye(2), np.ones((4, 4)))


# ---------------------------------------------------------------- Markov chain


@given(seeds, angles)
def test_one_step_matches_closed_form(seed, alpha):
    rng = np.random.default_rng(seed)
    rho = qcore.random_density_matrix(2, rng)
    eta = qcore.random_density_matrix(2, rng)
    spec = CollisionSpec.pswap(alpha)
    out = collision.markov_step(spec, eta, rho)
    np.testing.assert_allclose(out, pswap_map_closed_form(alpha, rho, eta), atol=1e-13)
    np.testing.assert_allclose(qcore.apply_superop(collision.collision_map(spec, eta), rho), out, atol=1e-13)
    valid_state(out)


def test_identity_collision_leaves_state(rho0, eta):
    spec = CollisionSpec(2, 2, np.eye(4))
    np.testing.assert_allclose(collision.markov_step(spec, eta, rho0), rho0, atol=1e-15)


def test_full_swap_installs_ancilla(rho0, eta):
    spec = CollisionSpec(2, 2, qcore.swap_operator(2))
    np.testing.assert_allclose(collision.markov_step(spec, eta, rho0), eta, atol=1e-15)


def test_first_step_raises_fidelity(rho0, eta):
    spec = CollisionSpec.pswap(0.1)
    assert qcore.fidelity(collision.markov_step(spec, eta, rho0), eta) > qcore.fidelity(rho0, eta)


def test_markov_evolve_edge_and_semigroup(rho0, eta):
    spec = CollisionSpec.pswap(0.1)
    traj = collision.markov_evolve(spec, eta, rho0, 0)
    assert traj.shape == (1, 2, 2)
    np.testing.assert_allclose(traj[0], rho0)
    N = 12
    full = collision.markov_evolve(spec, eta, rho0, N)
    for m in range(N + 1):
        tail = collision.markov_evolve(spec, eta, full[m], N - m)
        np.testing.assert_allclose(tail[-1], full[N], atol=1e-14)


def test_markov_chain_thermalizes_monotonically(rho0, eta):
    traj = collision.markov_evolve(CollisionSpec.pswap(0.1), eta, rho0, 600)
    f = np.array([qcore.fidelity(r, eta) for r in traj])
    assert np.all(np.diff(f) >= -1e-12)
    assert f[-1] > 0.9999


def test_markov_evolve_rejects_negative_n(rho0, eta):
    with pytest.raises(ValidationError):
        collision.markov_evolve(CollisionSpec.pswap(0.1), eta, rho0, -1)


def test_markov_step_dimension_mismatch(eta):
    with pytest.raises(ValidationError):
        collision.markov_step(CollisionSpec.pswap(0.1), eta, np.eye(3) / 3)


# ---------------------------------------------------------------- measurement channel


def test_trivial_measurement_is_identity_map():
    chi = np.array([1, 0], dtype=complex)
    spec = CollisionSpec(2, 2, np.eye(4))
    E = collision.measurement_channel(spec, MeasurementSpec(np.eye(2), np.eye(4)), chi)
    np.testing.assert_allclose(E, np.eye(4), atol=1e-15)


def test_swap_measurement_installs_ancilla_pure(rng):
    chi = np.array([0.6, 0.8j])
    spec = CollisionSpec(2, 2, qcore.swap_operator(2))
    E = collision.measurement_channel(spec, MeasurementSpec(collision.sigma_x_basis(), np.eye(4)), chi)
    assert qcore.is_trace_preserving(E)
    rho = qcore.random_density_matrix(2, rng)
    np.testing.assert_allclose(qcore.apply_superop(E, rho), qcore.projector(chi), atol=1e-14)


@pytest.mark.parametrize("basis", ["x", "z"])
def test_pswap_measurement_channel_is_cptp(basis):
    spec = CollisionSpec.pswap(0.1)
    mspec = MeasurementSpec.pswap(0.9, basis)
    ops = collision.ancilla_kraus(mspec.pre_measurement_unitary @ spec.unitary, ETA, mspec.basis, 2)
    np.testing.assert_allclose(sum(A.conj().T @ A for A in ops), np.eye(2), atol=1e-12)
    E = collision.measurement_channel(spec, mspec, ETA)
    assert qcore.is_trace_preserving(E, 1e-12)
    assert qcore.min_eigenvalue_hermitian(qcore.choi_of(E)) >= -1e-12


def test_measurement_channel_is_basis_independent():
    spec = CollisionSpec.pswap(0.1)
    Ex = collision.measurement_channel(spec, MeasurementSpec.pswap(0.9, "x"), ETA)
    Ez = collision.measurement_channel(spec, MeasurementSpec.pswap(0.9, "z"), ETA)
    np.testing.assert_allclose(Ex, Ez, atol=1e-10)


def test_pswap_measurement_channel_is_one_longer_collision():
    # U_M U = pswap(beta) pswap(alpha) = pswap(alpha + beta), and the measurement is traced out
    E = collision.measurement_channel(CollisionSpec.pswap(0.1), MeasurementSpec.pswap(0.9), ETA)
    np.testing.assert_allclose(E, collision.collision_map(CollisionSpec.pswap(1.0), ETA), atol=1e-13)


def test_mixed_ancilla_equals_average_over_pure_components():
    spec = CollisionSpec.pswap(0.3)
    mspec = MeasurementSpec.pswap(0.5)
    E = collision.measurement_channel(spec, mspec, ETA)
    E0 = collision.measurement_channel(spec, mspec, np.array([1, 0]))
    E1 = collision.measurement_channel(spec, mspec, np.array([0, 1]))
    np.testing.assert_allclose(E, 0.6 * E0 + 0.4 * E1, atol=1e-14)


def test_measurement_dimension_mismatch():
    spec = CollisionSpec.pswap(0.1, dim=3)
    with pytest.raises(ValidationError):
        collision.measurement_channel(spec, MeasurementSpec.pswap(0.9), np.eye(3) / 3)


# ---------------------------------------------------------------- deterministic and probabilistic runs


def test_deterministic_run_boundary_cases(pswap_setup, rho0, eta):
    spec, mspec = pswap_setup
    xi = collision.collision_map(spec, eta)
    E = collision.measurement_channel(spec, mspec, eta)
    N = 5
    last = collision.deterministic_run(spec, mspec, eta, rho0, N, N)
    before = collision.markov_evolve(spec, eta, rho0, N - 1)[-1]
    np.testing.assert_allclose(last, qcore.apply_superop(E, before), atol=1e-14)
    first = collision.deterministic_run(spec, mspec, eta, rho0, 1, N)
    expected = qcore.apply_superop(np.linalg.matrix_power(xi, N - 1) @ E, rho0)
    np.testing.assert_allclose(first, expected, atol=1e-14)


def test_deterministic_run_without_extra_interaction_is_plain_chain(rho0, eta):
    spec = CollisionSpec.pswap(0.1)
    mspec = MeasurementSpec(collision.sigma_x_basis(), np.eye(4))
    plain = collision.markov_evolve(spec, eta, rho0, 6)[-1]
    for m in range(1, 7):
        np.testing.assert_allclose(collision.deterministic_run(spec, mspec, eta, rho0, m, 6), plain, atol=1e-14)


@pytest.mark.parametrize("m", [0, 7])
def test_deterministic_run_rejects_out_of_range(pswap_setup, rho0, eta, m):
    spec, mspec = pswap_setup
    with pytest.raises(ValidationError):
        collision.deterministic_run(spec, mspec, eta, rho0, m, 6)


@pytest.mark.parametrize("basis", ["x", "z"])
@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_channel_composition_matches_full_tensor_simulation(basis, N, rho0, eta):
    spec = CollisionSpec.pswap(0.1)
    mspec = MeasurementSpec.pswap(0.9, basis)
    for m in range(1, N + 1):
        fast = collision.deterministic_run(spec, mspec, eta, rho0, m, N)
        slow = collision.brute_force_deterministic_run(spec, mspec, eta, rho0, m, N)
        np.testing.assert_allclose(fast, slow, atol=1e-10)


@given(seeds, st.integers(min_value=1, max_value=3))
def test_brute_force_oracle_random_unitaries(seed, N):
    rng = np.random.default_rng(seed)
    spec = CollisionSpec(2, 2, qcore.random_unitary(4, rng))
    mspec = MeasurementSpec(qcore.random_unitary(2, rng), qcore.random_unitary(4, rng))
    eta = qcore.random_density_matrix(2, rng)
    rho = qcore.random_density_matrix(2, rng)
    m = int(rng.integers(1, N + 1))
    np.testing.assert_allclose(
        collision.deterministic_run(spec, mspec, eta, rho, m, N),
        collision.brute_force_deterministic_run(spec, mspec, eta, rho, m, N),
        atol=1e-10,
    )


def test_probabilistic_run_single_weight(pswap_setup, rho0, eta):
    spec, mspec = pswap_setup
    N = 8
    w = np.zeros(N)
    w[2] = 1.0
    np.testing.assert_allclose(
        collision.probabilistic_run(spec, mspec, eta, rho0, w, N, orientation="ancilla"),
        collision.deterministic_run(spec, mspec, eta, rho0, 3, N),
        atol=1e-14,
    )
    # elapsed orientation: weights[2] means three collisions since (and including) the measured one
    np.testing.assert_allclose(
        collision.probabilistic_run(spec, mspec, eta, rho0, w, N),
        collision.deterministic_run(spec, mspec, eta, rho0, N - 2, N),
        atol=1e-14,
    )


@given(seeds)
def test_probabilistic_run_is_weighted_average(seed):
    rng = np.random.default_rng(seed)
    spec = CollisionSpec.pswap(float(rng.uniform(-1, 1)))
    mspec = MeasurementSpec.pswap(float(rng.uniform(-1, 1)))
    eta = qcore.random_density_matrix(2, rng)
    rho = qcore.random_density_matrix(2, rng)
    N = 6
    w = rng.dirichlet(np.ones(N))
    runs = [collision.deterministic_run(spec, mspec, eta, rho, m, N) for m in range(1, N + 1)]
    out = collision.probabilistic_run(spec, mspec, eta, rho, w, N, orientation="ancilla")
    np.testing.assert_allclose(out, sum(wm * r for wm, r in zip(w, runs)), atol=1e-13)
    valid_state(out)


def test_invisible_measurement_gives_markov_result(rho0, eta):
    spec = CollisionSpec.pswap(0.1)
    mspec = MeasurementSpec(collision.sigma_z_basis(), np.eye(4))
    N = 20
    w = collision.gaussian_weights(5, 2, N)
    np.testing.assert_allclose(
        collision.probabilistic_run(spec, mspec, eta, rho0, w, N),
        collision.markov_evolve(spec, eta, rho0, N)[-1],
        atol=1e-14,
    )


def test_uniform_and_gaussian_weights_differ(pswap_setup, rho0, eta):
    spec, mspec = pswap_setup
    N = 40
    tu = collision.probabilistic_trajectory(spec, mspec, eta, rho0, np.full(N, 1 / N), N)
    tg = collision.probabilistic_trajectory(spec, mspec, eta, rho0, collision.gaussian_weights(4, 2, N), N)
    fu = [qcore.fidelity(r, eta) for r in tu]
    fg = [qcore.fidelity(r, eta) for r in tg]
    assert max(abs(a - b) for a, b in zip(fu, fg)) > 1e-3
    for r in np.concatenate([tu, tg]):
        valid_state(r)


def test_trajectory_end_matches_probabilistic_run(pswap_setup, rho0, eta):
    spec, mspec = pswap_setup
    N = 30
    w = collision.gaussian_weights(10, 3, N)
    traj = collision.probabilistic_trajectory(spec, mspec, eta, rho0, w, N)
    np.testing.assert_allclose(traj[0], rho0)
    np.testing.assert_allclose(
        traj[-1], collision.probabilistic_run(spec, mspec, eta, rho0, w, N, orientation="ancilla"), atol=1e-14
    )


def test_trajectory_intermediate_step_definition(pswap_setup, rho0, eta):
    spec, mspec = pswap_setup
    N, n = 10, 4
    w = collision.gaussian_weights(3, 2, N)
    traj = collision.probabilistic_trajectory(spec, mspec, eta, rho0, w, N)
    plain = collision.markov_evolve(spec, eta, rho0, n)[-1]
    measured = sum(w[m - 1] * collision.deterministic_run(spec, mspec, eta, rho0, m, n) for m in range(1, n + 1))
    np.testing.assert_allclose(traj[n], measured + w[n:].sum() * plain, atol=1e-14)


def test_probabilistic_run_rejects_bad_weights(pswap_setup, rho0, eta):
    spec, mspec = pswap_setup
    with pytest.raises(ValidationError):
        collision.probabilistic_run(spec, mspec, eta, rho0, [0.5, 0.4], 2)
    with pytest.raises(ValidationError):
        collision.probabilistic_run(spec, mspec, eta, rho0, [1.5, -0.5], 2)
    with pytest.raises(ValidationError):
        collision.probabilistic_run(spec, mspec, eta, rho0, [1.0], 2)
    with pytest.raises(ValidationError):
        collision.probabilistic_run(spec, mspec, eta, rho0, [0.5, 0.5], 2, orientation="sideways")


# ---------------------------------------------------------------- Gaussian weights


@given(
    st.floats(min_value=-10, max_value=300, allow_nan=False),
    st.floats(min_value=1e-3, max_value=100, allow_nan=False),
    st.integers(min_value=1, max_value=300),
)
def test_gaussian_weights_normalized(center, width, N):
    w = collision.gaussian_weights(center, width, N)
    assert w.shape == (N,)
    assert np.all(w >= 0)
    assert abs(w.sum() - 1) <= 1e-12


def test_narrow_gaussian_concentrates_on_center():
    w = collision.gaussian_weights(7, 1e-3, 20)
    assert w[6] == pytest.approx(1.0, abs=1e-12)


def test_gaussian_weights_validation():
    with pytest.raises(ValidationError):
        collision.gaussian_weights(3, 0.0, 10)
    with pytest.raises(ValidationError):
        collision.gaussian_weights(3, 1.0, 0)
