"""Dense linear algebra for small qubit registers.

Operators are plain ``numpy`` complex arrays. Qubit 0 is the most significant
bit of the basis index, so ``|b0 b1 ... b(n-1)>`` has index
``b0 * 2**(n-1) + ... + b(n-1)``.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
import scipy.linalg

ALGEBRA_TOL = 1e-10
SPECTRAL_TOL = 1e-8

I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)
PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}


def n_qubits_of(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 1 or 2**n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def _square(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    return m


def is_hermitian(m: np.ndarray, tol: float = ALGEBRA_TOL) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and np.max(np.abs(m - m.conj().T), initial=0.0) <= tol


def check_density_matrix(rho: np.ndarray, tol: float = ALGEBRA_TOL) -> np.ndarray:
    """Validate ``rho`` as a density matrix and return it as a complex array.

    Raises
    ------
    ValueError
        If ``rho`` is not Hermitian, not unit trace or has an eigenvalue
        below ``-tol``.
    """
    rho = _square(rho, "density matrix")
    n_qubits_of(rho.shape[0])
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > tol:
        raise ValueError(f"density matrix is not Hermitian (deviation {herm:.3g})")
    tr = np.trace(rho)
    if abs(tr - 1.0) > tol:
        raise ValueError(f"density matrix trace is {tr.real:.12g}, expected 1")
    lam_min = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if lam_min < -tol:
        raise ValueError(f"density matrix has negative eigenvalue {lam_min:.3g}")
    return rho


def check_unitary(u: np.ndarray, tol: float = ALGEBRA_TOL) -> np.ndarray:
    u = _square(u, "unitary")
    n_qubits_of(u.shape[0])
    err = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
    if err > tol:
        raise ValueError(f"operator is not unitary (max |U^dag U - I| = {err:.3g})")
    return u


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def kron_all(ops: Sequence[np.ndarray]) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for op in ops:
        out = kron(out, op)
    return out


def basis_state(bits: Sequence[int]) -> np.ndarray:
    """Density matrix of the computational basis state ``|bits>``."""
    idx = 0
    for b in bits:
        if b not in (0, 1):
            raise ValueError(f"basis bits must be 0 or 1, got {b}")
        idx = 2 * idx + b
    rho = np.zeros((2 ** len(bits),) * 2, dtype=complex)
    rho[idx, idx] = 1.0
    return rho


def pure_state(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).ravel()
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def _check_targets(targets: Sequence[int], n: int) -> list[int]:
    targets = [int(t) for t in targets]
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate target qubits {targets}")
    for t in targets:
        if not 0 <= t < n:
            raise ValueError(f"target qubit {t} out of range for {n} qubits")
    return targets


def embed(op: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Lift a ``k``-qubit operator onto ``targets`` of an ``n``-qubit register.

    The ``j``-th qubit of ``op`` (most significant first) acts on
    ``targets[j]``; every other qubit sees the identity.
    """
    op = _square(op, "operator")
    k = n_qubits_of(op.shape[0])
    targets = _check_targets(targets, n)
    if len(targets) != k:
        raise ValueError(f"operator acts on {k} qubits but {len(targets)} targets given")
    rest = [q for q in range(n) if q not in targets]
    full = kron(op, np.eye(2 ** len(rest)))
    # axes of ``full`` are ordered (targets..., rest...); permute into register order
    order = targets + rest
    perm = np.argsort(order)
    t = full.reshape([2] * (2 * n))
    t = t.transpose(list(perm) + [n + p for p in perm])
    return t.reshape(2**n, 2**n)


def apply_unitary(rho: np.ndarray, u: np.ndarray) -> np.ndarray:
    rho = _square(rho, "density matrix")
    u = _square(u, "unitary")
    if rho.shape != u.shape:
        raise ValueError(f"dimension mismatch: state {rho.shape} vs unitary {u.shape}")
    return u @ rho @ u.conj().T


def apply_kraus(rho: np.ndarray, kraus: Sequence[np.ndarray]) -> np.ndarray:
    out = np.zeros_like(rho, dtype=complex)
    for k in kraus:
        out += k @ rho @ k.conj().T
    return out


def partial_trace(rho: np.ndarray, keep: Sequence[int]) -> np.ndarray:
    """Reduced state on the qubits in ``keep`` (returned in register order)."""
    rho = _square(rho, "density matrix")
    n = n_qubits_of(rho.shape[0])
    if len(keep) == 0:
        raise ValueError("keep must name at least one qubit")
    keep = sorted(_check_targets(keep, n))
    drop = [q for q in range(n) if q not in keep]
    t = rho.reshape([2] * (2 * n))
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = list(letters[:n])
    col = list(letters[n : 2 * n])
    for q in drop:
        col[q] = row[q]
    out = "".join(row[q] for q in keep) + "".join(col[q] for q in keep)
    reduced = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    d = 2 ** len(keep)
    return reduced.reshape(d, d)


def matrix_function(h: np.ndarray, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Apply the scalar function ``f`` to a Hermitian matrix through its eigenbasis."""
    h = _square(h, "matrix")
    if not is_hermitian(h, SPECTRAL_TOL):
        raise ValueError("matrix_function requires a Hermitian input")
    lam, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    return (v * f(lam)) @ v.conj().T


def expm_hermitian(h: np.ndarray, scale: complex = 1.0) -> np.ndarray:
    """``exp(scale * h)`` for Hermitian ``h``."""
    return matrix_function(h, lambda lam: np.exp(scale * lam))


def sqrtm_psd(rho: np.ndarray) -> np.ndarray:
    return matrix_function(rho, lambda lam: np.sqrt(np.clip(lam, 0.0, None)))


def unitary_power(u: np.ndarray, t: float) -> np.ndarray:
    """Fractional power ``u**t`` using principal eigenphases in ``(-pi, pi]``.

    Unitaries are normal, so the complex Schur form is diagonal and the
    power is well defined even for degenerate spectra.
    """
    u = _square(u, "unitary")
    tri, z = scipy.linalg.schur(u, output="complex")
    phases = np.angle(np.diag(tri))
    phases[phases <= -np.pi + 1e-12] = np.pi
    return (z * np.exp(1j * t * phases)) @ z.conj().T


def rx(theta: float) -> np.ndarray:
    """Single-qubit rotation ``exp(-i theta sigma_x / 2)``."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def von_neumann_entropy(rho: np.ndarray) -> float:
    """Entropy ``-Tr rho ln rho`` in nats; eigenvalues below 1e-12 count as zero."""
    rho = _square(rho, "density matrix")
    lam = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    lam = lam[lam > 1e-12]
    return float(max(0.0, -np.sum(lam * np.log(lam))))


def binary_entropy(p: float) -> float:
    return von_neumann_entropy(np.diag([p, 1.0 - p]))


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """Uhlmann fidelity ``Tr sqrt(sqrt(a) b sqrt(a))`` (not squared)."""
    a = _square(a, "state")
    b = _square(b, "state")
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    sa = sqrtm_psd(a)
    inner = sa @ b @ sa
    lam = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    f = float(np.sum(np.sqrt(np.clip(lam, 0.0, None))))
    return min(1.0, max(0.0, f))


def expectation(rho: np.ndarray, op: np.ndarray) -> float:
    return float(np.real(np.trace(rho @ op)))


def purity(rho: np.ndarray) -> float:
    return float(np.real(np.trace(rho @ rho)))


def random_density_matrix(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random mixed state on ``n`` qubits (Ginibre ensemble)."""
    d = 2**n
    g = rng.normal(size=(d, rank or d)) + 1j * rng.normal(size=(d, rank or d))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    d = 2**n
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))
