import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qszilard import qcore


def _nested_kron(a, b):
    # loop oracle: (a x b)[i*p + k, j*q + l] = a[i, j] b[k, l]
    m, n = a.shape
    p, q = b.shape
    out = np.zeros((m * p, n * q), dtype=complex)
    for i, j, k, l in itertools.product(range(m), range(n), range(p), range(q)):
        out[i * p + k, j * q + l] = a[i, j] * b[k, l]
    return out


def _embed_by_statevector(op, targets, n):
    # apply op to every basis vector by explicit bit manipulation
    k = len(targets)
    dim = 2**n
    out = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        bits = [(col >> (n - 1 - q)) & 1 for q in range(n)]
        sub_in = 0
        for t in targets:
            sub_in = 2 * sub_in + bits[t]
        for sub_out in range(2**k):
            amp = op[sub_out, sub_in]
            if amp == 0:
                continue
            new = list(bits)
            for j, t in enumerate(targets):
                new[t] = (sub_out >> (k - 1 - j)) & 1
            row = int("".join(map(str, new)), 2)
            out[row, col] += amp
    return out


def _taylor_exp(a, terms=60):
    out = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ a / k
        out = out + term
    return out


def test_kron_matches_loop_oracle():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    b = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    assert np.allclose(qcore.kron(a, b), _nested_kron(a, b), atol=1e-14)


def test_kron_all_register_order():
    # qubit 0 is the most significant bit
    rho = qcore.kron_all([qcore.basis_state([1]), qcore.basis_state([0]), qcore.basis_state([1])])
    assert np.allclose(rho, qcore.basis_state([1, 0, 1]))
    assert rho[5, 5] == 1


def test_basis_state_rejects_bad_bits():
    with pytest.raises(ValueError):
        qcore.basis_state([0, 2])


@pytest.mark.parametrize("targets", [[0], [3], [1, 2], [2, 0], [3, 1], [0, 2, 3], [3, 0, 1]])
def test_embed_matches_statevector_oracle(targets):
    rng = np.random.default_rng(len(targets) * 10 + targets[0])
    op = qcore.random_unitary(len(targets), rng)
    assert np.allclose(qcore.embed(op, targets, 4), _embed_by_statevector(op, targets, 4), atol=1e-13)


def test_embed_validates_targets():
    with pytest.raises(ValueError):
        qcore.embed(qcore.SWAP, [1, 1], 3)
    with pytest.raises(ValueError):
        qcore.embed(qcore.SIGMA_X, [3], 3)
    with pytest.raises(ValueError):
        qcore.embed(qcore.SWAP, [0], 3)


def test_partial_trace_of_product_state():
    rng = np.random.default_rng(1)
    states = [qcore.random_density_matrix(1, rng) for _ in range(4)]
    rho = qcore.kron_all(states)
    for q in range(4):
        assert np.allclose(qcore.partial_trace(rho, [q]), states[q], atol=1e-14)
    assert np.allclose(qcore.partial_trace(rho, [0, 2]), qcore.kron(states[0], states[2]), atol=1e-14)


def test_partial_trace_composes():
    rng = np.random.default_rng(2)
    rho = qcore.random_density_matrix(4, rng)
    step = qcore.partial_trace(qcore.partial_trace(rho, [0, 1, 3]), [1])
    assert np.allclose(step, qcore.partial_trace(rho, [1]), atol=1e-14)


def test_partial_trace_preserves_trace_and_rejects_empty():
    rng = np.random.default_rng(3)
    rho = qcore.random_density_matrix(3, rng)
    assert np.trace(qcore.partial_trace(rho, [2])) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(ValueError):
        qcore.partial_trace(rho, [])


def test_bell_state_marginals_are_maximally_mixed():
    psi = np.array([1, 0, 0, 1]) / math.sqrt(2)
    rho = qcore.pure_state(psi)
    red = qcore.partial_trace(rho, [0])
    assert np.allclose(red, np.eye(2) / 2)
    assert qcore.von_neumann_entropy(red) == pytest.approx(math.log(2), abs=1e-12)


def test_expm_hermitian_matches_taylor():
    rng = np.random.default_rng(4)
    h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h = (h + h.conj().T) / 2
    u = qcore.expm_hermitian(h, -0.7j)
    assert np.allclose(u, _taylor_exp(-0.7j * h), atol=1e-12)
    qcore.check_unitary(u)


def test_matrix_function_rejects_non_hermitian():
    with pytest.raises(ValueError):
        qcore.matrix_function(np.array([[0, 1], [0, 0]], dtype=complex), np.exp)


def test_sqrtm_psd_squares_back():
    rho = qcore.random_density_matrix(2, np.random.default_rng(5))
    s = qcore.sqrtm_psd(rho)
    assert np.allclose(s @ s, rho, atol=1e-12)


def test_unitary_power():
    u = qcore.rx(0.8)
    assert np.allclose(qcore.unitary_power(u, 1.5), qcore.rx(1.2), atol=1e-12)
    rng = np.random.default_rng(6)
    v = qcore.random_unitary(2, rng)
    half = qcore.unitary_power(v, 0.5)
    assert np.allclose(half @ half, v, atol=1e-12)


def test_rx_pi_flips():
    rho = qcore.apply_unitary(qcore.basis_state([0]), qcore.rx(math.pi))
    assert np.allclose(rho, qcore.basis_state([1]), atol=1e-15)


def test_entropy_of_thermal_particle():
    rho = np.diag([0.87861, 0.12139])
    assert qcore.von_neumann_entropy(rho) == pytest.approx(0.3697, abs=1e-4)
    assert qcore.binary_entropy(0.87861) == pytest.approx(qcore.von_neumann_entropy(rho), abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 3))
def test_entropy_bounds_and_unitary_invariance(seed, n):
    rng = np.random.default_rng(seed)
    rho = qcore.random_density_matrix(n, rng)
    s = qcore.von_neumann_entropy(rho)
    assert -1e-12 <= s <= n * math.log(2) + 1e-12
    u = qcore.random_unitary(n, rng)
    assert qcore.von_neumann_entropy(qcore.apply_unitary(rho, u)) == pytest.approx(s, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_subadditivity(seed):
    rng = np.random.default_rng(seed)
    rho = qcore.random_density_matrix(2, rng)
    s_ab = qcore.von_neumann_entropy(rho)
    s_a = qcore.von_neumann_entropy(qcore.partial_trace(rho, [0]))
    s_b = qcore.von_neumann_entropy(qcore.partial_trace(rho, [1]))
    assert s_ab <= s_a + s_b + 1e-9


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 3))
def test_fidelity_symmetric_and_bounded(seed, n):
    rng = np.random.default_rng(seed)
    a = qcore.random_density_matrix(n, rng)
    b = qcore.random_density_matrix(n, rng)
    f = qcore.fidelity(a, b)
    assert 0.0 <= f <= 1.0
    assert f == pytest.approx(qcore.fidelity(b, a), abs=1e-7)
    assert qcore.fidelity(a, a) == pytest.approx(1.0, abs=1e-7)


def test_fidelity_pure_states_is_overlap():
    rng = np.random.default_rng(7)
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    phi = rng.normal(size=4) + 1j * rng.normal(size=4)
    psi /= np.linalg.norm(psi)
    phi /= np.linalg.norm(phi)
    f = qcore.fidelity(qcore.pure_state(psi), qcore.pure_state(phi))
    assert f == pytest.approx(abs(np.vdot(psi, phi)), abs=1e-6)


def test_fidelity_orthogonal_is_zero():
    assert qcore.fidelity(qcore.basis_state([0]), qcore.basis_state([1])) == pytest.approx(0.0, abs=1e-7)


def test_apply_kraus_amplitude_damping():
    g = 0.3
    kraus = [np.array([[1, 0], [0, math.sqrt(1 - g)]]), np.array([[0, math.sqrt(g)], [0, 0]])]
    out = qcore.apply_kraus(qcore.basis_state([1]), kraus)
    assert np.allclose(out, np.diag([g, 1 - g]))


def test_check_density_matrix_rejects():
    with pytest.raises(ValueError):
        qcore.check_density_matrix(np.diag([0.5, 0.6]))
    with pytest.raises(ValueError):
        qcore.check_density_matrix(np.diag([1.2, -0.2]))
    with pytest.raises(ValueError):
        qcore.check_density_matrix(np.array([[0.5, 0.1], [0.2, 0.5]]))
    with pytest.raises(ValueError):
        qcore.check_density_matrix(np.eye(3) / 3)


def test_purity():
    assert qcore.purity(np.eye(4) / 4) == pytest.approx(0.25)
    assert qcore.purity(qcore.basis_state([0, 1])) == pytest.approx(1.0)
