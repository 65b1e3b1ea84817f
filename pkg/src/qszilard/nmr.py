"""Liquid-state NMR spin dynamics in the rotating frame.

Hamiltonians are returned in peV (``hbar`` times angular frequency).
Internally propagation works with generators in rad/s so that a segment
of length ``dt`` evolves as ``exp(-i (H0 + Hc) dt / hbar)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import qcore
from ._config import ConfigError, IniFile
from .engine import HBAR_PEV_S

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class MoleculeSpec:
    """Spin system parameters.

    ``offsets`` are the rotating-frame frequencies ``omega_k - omega_R``
    (rad/s); ``couplings`` is the symmetric scalar-coupling matrix in Hz.
    """

    offsets: np.ndarray
    couplings: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    rotating_frame: float = 0.0
    name: str = ""

    def __post_init__(self):
        offsets = np.asarray(self.offsets, dtype=float).ravel()
        n = offsets.size
        if n < 1:
            raise ValueError("molecule needs at least one spin")
        j = np.asarray(self.couplings, dtype=float)
        if j.shape != (n, n):
            raise ValueError(f"couplings must be {n}x{n}, got {j.shape}")
        if not np.allclose(j, j.T, atol=1e-12):
            raise ValueError("coupling matrix is not symmetric")
        if np.any(np.diag(j) != 0):
            raise ValueError("coupling matrix must have a zero diagonal")
        t1 = np.broadcast_to(np.asarray(self.t1, dtype=float), (n,)).copy()
        t2 = np.broadcast_to(np.asarray(self.t2, dtype=float), (n,)).copy()
        if np.any(t1 <= 0) or np.any(t2 <= 0):
            raise ValueError("relaxation times must be positive")
        if np.any(t2 > 2 * t1 + 1e-12):
            raise ValueError("T2 must not exceed 2*T1")
        for name, val in (("offsets", offsets), ("couplings", j), ("t1", t1), ("t2", t2)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n_spins(self) -> int:
        return self.offsets.size

    @property
    def dim(self) -> int:
        return 2**self.n_spins

    @property
    def frequencies(self) -> np.ndarray:
        """Absolute frequencies ``omega_k`` (rad/s)."""
        return self.offsets + self.rotating_frame

    @classmethod
    def from_frequencies(cls, frequencies, couplings, t1=10.0, t2=1.0, rotating_frame=None, name=""):
        """Build from absolute frequencies; the frame defaults to the midpoint
        of the first and last spin."""
        freqs = np.asarray(frequencies, dtype=float)
        if rotating_frame is None:
            rotating_frame = 0.5 * (freqs[0] + freqs[-1])
        return cls(freqs - rotating_frame, couplings, t1, t2, float(rotating_frame), name)


def couplings_from_upper(values: Sequence[float], n: int) -> np.ndarray:
    """Symmetric matrix from the row-major upper triangle ``J12, J13, ..., J(n-1)n``."""
    expected = n * (n - 1) // 2
    if len(values) != expected:
        raise ValueError(f"expected {expected} upper-triangular couplings for {n} spins, got {len(values)}")
    j = np.zeros((n, n))
    j[np.triu_indices(n, 1)] = values
    return j + j.T


# -- Hamiltonians --------------------------------------------------------


def _z_signs(n: int) -> np.ndarray:
    """``z[i, k]``: eigenvalue of sigma_z on spin ``k`` in basis state ``i``."""
    idx = np.arange(2**n)
    bits = (idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
    return 1.0 - 2.0 * bits


def drift_diagonal(m: MoleculeSpec) -> np.ndarray:
    """Diagonal of the drift Hamiltonian divided by hbar (rad/s)."""
    z = _z_signs(m.n_spins)
    zeeman = z @ m.offsets / 2.0
    # each unordered pair appears twice in the ordered sum: pi*J/4 * 2
    iu = np.triu_indices(m.n_spins, 1)
    jz = (z[:, iu[0]] * z[:, iu[1]]) @ m.couplings[iu]
    return zeeman + math.pi * jz / 2.0


def drift_hamiltonian(m: MoleculeSpec, hbar: float = HBAR_PEV_S) -> np.ndarray:
    return np.diag(hbar * drift_diagonal(m)).astype(complex)


def collective_operators(n: int) -> tuple[np.ndarray, np.ndarray]:
    """``(sum_k sigma_x_k / 2, sum_k sigma_y_k / 2)``."""
    x = sum(qcore.embed(qcore.SIGMA_X, [k], n) for k in range(n)) / 2.0
    y = sum(qcore.embed(qcore.SIGMA_Y, [k], n) for k in range(n)) / 2.0
    return x, y


def control_hamiltonian(m: MoleculeSpec, omega_amp: float, phi: float, hbar: float = HBAR_PEV_S) -> np.ndarray:
    if omega_amp < 0:
        raise ValueError(f"pulse amplitude must be non-negative, got {omega_amp}")
    x, y = collective_operators(m.n_spins)
    return hbar * omega_amp * (math.cos(phi) * x + math.sin(phi) * y)


def free_evolution(m: MoleculeSpec, t: float) -> np.ndarray:
    """``exp(-i H0 t / hbar)``; diagonal."""
    if t < 0:
        raise ValueError(f"evolution time must be non-negative, got {t}")
    return np.diag(np.exp(-1j * drift_diagonal(m) * t))


# -- pulses --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PulseSequence:
    """Piecewise-constant amplitude (rad/s) and phase (rad) schedule."""

    segment_duration: float
    amplitudes: np.ndarray
    phases: np.ndarray
    label: str = ""

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=float).ravel().copy()
        phases = np.asarray(self.phases, dtype=float).ravel().copy()
        if amps.shape != phases.shape:
            raise ValueError("amplitudes and phases must have equal length")
        if not self.segment_duration > 0:
            raise ValueError(f"segment_duration must be positive, got {self.segment_duration}")
        if np.any(amps < 0):
            raise ValueError("pulse amplitudes must be non-negative")
        amps.setflags(write=False)
        phases.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "phases", phases)

    @property
    def n_segments(self) -> int:
        return self.amplitudes.size

    @property
    def duration(self) -> float:
        return self.n_segments * self.segment_duration

    @property
    def segments(self) -> list[tuple[float, float]]:
        return list(zip(self.amplitudes.tolist(), self.phases.tolist()))

    def perturbed(self, amp_error: float = 0.0, phase_error: float = 0.0) -> "PulseSequence":
        """Copy with amplitudes scaled by ``1 + amp_error`` and phases shifted."""
        return PulseSequence(
            self.segment_duration,
            self.amplitudes * max(0.0, 1.0 + amp_error),
            self.phases + phase_error,
            self.label,
        )

    def __eq__(self, other):
        if not isinstance(other, PulseSequence):
            return NotImplemented
        return (
            self.segment_duration == other.segment_duration
            and np.array_equal(self.amplitudes, other.amplitudes)
            and np.array_equal(self.phases, other.phases)
        )


def sample_pulse(
    amplitude: Callable[[np.ndarray], np.ndarray],
    phase: Callable[[np.ndarray], np.ndarray],
    duration: float,
    n_segments: int,
) -> PulseSequence:
    """Midpoint sampling of smooth controls onto ``n_segments`` segments."""
    dt = duration / n_segments
    t = (np.arange(n_segments) + 0.5) * dt
    return PulseSequence(dt, amplitude(t), phase(t))


def segment_propagators(m: MoleculeSpec, pulse: PulseSequence, return_eig: bool = False):
    """Per-segment unitaries, shape ``(n_segments, d, d)``.

    With ``return_eig`` also returns the eigenvalues and eigenvectors of each
    segment generator (rad/s), which the gradient code reuses.
    """
    x, y = collective_operators(m.n_spins)
    h0 = np.diag(drift_diagonal(m)).astype(complex)
    amps = pulse.amplitudes[:, None, None]
    ph = pulse.phases[:, None, None]
    h = h0[None] + amps * (np.cos(ph) * x[None] + np.sin(ph) * y[None])
    lam, v = np.linalg.eigh(h)
    u = (v * np.exp(-1j * lam * pulse.segment_duration)[:, None, :]) @ v.conj().transpose(0, 2, 1)
    if return_eig:
        return u, lam, v
    return u


def pulse_unitary(m: MoleculeSpec, pulse: PulseSequence) -> np.ndarray:
    u_total = np.eye(m.dim, dtype=complex)
    if pulse.n_segments == 0:
        return u_total
    for u in segment_propagators(m, pulse):
        u_total = u @ u_total
    return u_total


def relax_spin(rho: np.ndarray, k: int, n: int, gamma: float, coherence: float) -> np.ndarray:
    """Amplitude damping toward ``|0>`` with probability ``gamma`` combined with
    a total coherence factor ``coherence`` on spin ``k``."""
    a, b = 2**k, 2 ** (n - k - 1)
    r = rho.reshape(a, 2, b, a, 2, b)
    out = np.empty_like(r)
    out[:, 0, :, :, 0, :] = r[:, 0, :, :, 0, :] + gamma * r[:, 1, :, :, 1, :]
    out[:, 1, :, :, 1, :] = (1.0 - gamma) * r[:, 1, :, :, 1, :]
    out[:, 0, :, :, 1, :] = coherence * r[:, 0, :, :, 1, :]
    out[:, 1, :, :, 0, :] = coherence * r[:, 1, :, :, 0, :]
    return out.reshape(rho.shape)


def relaxation_factors(m: MoleculeSpec, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-spin damping probability and coherence factor for an interval ``dt``.

    Coherences decay as ``exp(-dt/T2)`` overall; amplitude damping already
    supplies ``exp(-dt/(2 T1))`` of that.
    """
    gamma = -np.expm1(-dt / m.t1)
    coherence = np.exp(-dt / m.t2)
    return gamma, coherence


def relax(rho: np.ndarray, m: MoleculeSpec, dt: float) -> np.ndarray:
    gamma, coherence = relaxation_factors(m, dt)
    for k in range(m.n_spins):
        rho = relax_spin(rho, k, m.n_spins, gamma[k], coherence[k])
    return rho


def propagate(rho: np.ndarray, m: MoleculeSpec, pulse: PulseSequence, relaxation: bool = False) -> np.ndarray:
    """Evolve ``rho`` through every segment of ``pulse``.

    With ``relaxation`` each segment is followed by per-spin T1/T2 damping.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (m.dim, m.dim):
        raise ValueError(f"state dimension {rho.shape} does not match {m.n_spins} spins")
    if pulse.n_segments == 0:
        return rho.copy()
    if not relaxation:
        u = pulse_unitary(m, pulse)
        return u @ rho @ u.conj().T
    gamma, coherence = relaxation_factors(m, pulse.segment_duration)
    for u in segment_propagators(m, pulse):
        rho = u @ rho @ u.conj().T
        for k in range(m.n_spins):
            rho = relax_spin(rho, k, m.n_spins, gamma[k], coherence[k])
    return rho


def idle(rho: np.ndarray, m: MoleculeSpec, t: float, relaxation: bool = False, steps: int = 1) -> np.ndarray:
    """Free evolution for ``t`` seconds, optionally with relaxation in ``steps`` slices."""
    if not relaxation:
        return qcore.apply_unitary(rho, free_evolution(m, t))
    dt = t / steps
    u = free_evolution(m, dt)
    for _ in range(steps):
        rho = relax(qcore.apply_unitary(rho, u), m, dt)
    return rho


# -- molecule files ------------------------------------------------------

_FREQ_UNITS = {"rad/s": 1.0, "hz": TWO_PI}


def parse_molecule(text: str, source: str | None = None) -> MoleculeSpec:
    """Parse a molecule description (INI, section ``[molecule]``).

    Keys: ``n_spins``, ``frequencies``, ``frequency_form`` (``offset`` or
    ``absolute``), optional ``frequency_units`` (``rad/s`` default, or
    ``hz``), optional ``rotating_frame``, ``couplings`` in Hz (upper
    triangle, or a full ``n*n`` row-major matrix which must be symmetric),
    ``t1`` and ``t2`` in seconds (one value or one per spin).
    """
    ini = IniFile(text, source)
    sec = "molecule"
    if not ini.parser.has_section(sec):
        raise ConfigError("missing [molecule] section", None, source)
    n = ini.get_int(sec, "n_spins", required=True)
    if n < 1:
        raise ini.error(sec, "n_spins", "must be at least 1")
    units = (ini.get(sec, "frequency_units", "rad/s") or "rad/s").lower()
    if units not in _FREQ_UNITS:
        raise ini.error(sec, "frequency_units", f"must be one of {sorted(_FREQ_UNITS)}, got {units!r}")
    scale = _FREQ_UNITS[units]
    freqs = ini.get_floats(sec, "frequencies", required=True)
    if len(freqs) != n:
        raise ini.error(sec, "frequencies", f"expected {n} values, got {len(freqs)}")
    freqs = np.array(freqs) * scale
    form = ini.get(sec, "frequency_form", required=True).lower()
    if form not in ("offset", "absolute"):
        raise ini.error(sec, "frequency_form", f"must be 'offset' or 'absolute', got {form!r}")

    raw_j = ini.get_floats(sec, "couplings", required=True)
    if len(raw_j) == n * n:
        j = np.array(raw_j).reshape(n, n)
        if not np.array_equal(j, j.T):
            bad = np.argwhere(j != j.T)[0]
            raise ini.error(sec, "couplings", f"coupling matrix is asymmetric at ({bad[0] + 1},{bad[1] + 1})")
        if np.any(np.diag(j) != 0):
            raise ini.error(sec, "couplings", "coupling matrix diagonal must be zero")
    elif len(raw_j) == n * (n - 1) // 2:
        j = couplings_from_upper(raw_j, n)
    else:
        raise ini.error(
            sec, "couplings", f"expected {n * (n - 1) // 2} upper-triangular values or a {n}x{n} matrix, got {len(raw_j)}"
        )

    relax_times = {}
    for key in ("t1", "t2"):
        vals = ini.get_floats(sec, key, required=True)
        if len(vals) not in (1, n):
            raise ini.error(sec, key, f"expected 1 or {n} values, got {len(vals)}")
        if any(v <= 0 for v in vals):
            raise ini.error(sec, key, "relaxation times must be positive durations")
        relax_times[key] = np.broadcast_to(np.array(vals), (n,))
    if np.any(relax_times["t2"] > 2 * relax_times["t1"]):
        raise ini.error(sec, "t2", "T2 must not exceed 2*T1")

    frame = ini.get_float(sec, "rotating_frame")
    name = ini.get(sec, "name", "") or ""
    if form == "absolute":
        if frame is not None:
            frame *= scale
        return MoleculeSpec.from_frequencies(freqs, j, relax_times["t1"], relax_times["t2"], frame, name)
    if frame is not None and frame != 0:
        raise ini.error(sec, "rotating_frame", "offset-form frequencies are already relative to the frame")
    return MoleculeSpec(freqs, j, relax_times["t1"], relax_times["t2"], 0.0, name)


def load_molecule(path: str | Path) -> MoleculeSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read molecule file {path}: {exc.strerror}") from exc
    return parse_molecule(text, str(path))


def dump_molecule(m: MoleculeSpec) -> str:
    iu = np.triu_indices(m.n_spins, 1)
    lines = [
        "[molecule]",
        f"name = {m.name}",
        f"n_spins = {m.n_spins}",
        "frequency_form = absolute",
        "frequency_units = rad/s",
        f"frequencies = {', '.join(repr(float(f)) for f in m.frequencies)}",
        f"rotating_frame = {m.rotating_frame!r}",
        f"couplings = {', '.join(repr(float(v)) for v in m.couplings[iu])}",
        f"t1 = {', '.join(repr(float(v)) for v in m.t1)}",
        f"t2 = {', '.join(repr(float(v)) for v in m.t2)}",
    ]
    return "\n".join(lines) + "\n"


def synthetic_molecule_path() -> Path:
    return Path(str(resources.files("qszilard") / "data" / "synthetic4.ini"))


def synthetic_molecule() -> MoleculeSpec:
    """Shipped four-spin test molecule (not a real compound)."""
    return load_molecule(synthetic_molecule_path())
