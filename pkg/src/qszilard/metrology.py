"""Single-qubit tomography, energy readout and Monte Carlo error bars."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import engine, qcore
from .engine import QUBITS, STEPS, CycleConfig, EngineParams, GateNoise

EXACT = "exact"


@dataclass(frozen=True, eq=False)
class TomographyResult:
    qubit: int
    bloch: np.ndarray
    state: np.ndarray
    shots: int | str

    @property
    def label(self) -> str:
        return QUBITS[self.qubit] if self.qubit < len(QUBITS) else str(self.qubit)


def bloch_vector(rho_q: np.ndarray) -> np.ndarray:
    """``(<sigma_x>, <sigma_y>, <sigma_z>)`` with ``sigma_z |0> = +|0>``."""
    return np.array([qcore.expectation(rho_q, qcore.PAULI[b]) for b in "xyz"])


def state_from_bloch(r) -> np.ndarray:
    rx, ry, rz = r
    return 0.5 * (qcore.I2 + rx * qcore.SIGMA_X + ry * qcore.SIGMA_Y + rz * qcore.SIGMA_Z)


def project_to_state(rho: np.ndarray) -> np.ndarray:
    """Nearest valid state: clip negative eigenvalues and renormalize."""
    rho = 0.5 * (rho + rho.conj().T)
    lam, v = np.linalg.eigh(rho)
    if lam[0] >= 0:
        return rho / np.trace(rho).real
    lam = np.clip(lam, 0.0, None)
    lam /= lam.sum()
    return (v * lam) @ v.conj().T


def tomograph_qubit(rho: np.ndarray, q: int, shots: int | str = EXACT, seed=None) -> TomographyResult:
    """Reconstruct the reduced state of qubit ``q`` from its three Pauli
    expectations, exactly or from ``shots`` binomial samples per axis."""
    if shots != EXACT:
        if not isinstance(shots, (int, np.integer)) or shots < 1:
            raise ValueError(f"shots must be a positive integer or 'exact', got {shots!r}")
    reduced = qcore.partial_trace(rho, [q])
    r = bloch_vector(reduced)
    if shots != EXACT:
        rng = np.random.default_rng(seed)
        p_plus = np.clip((1.0 + r) / 2.0, 0.0, 1.0)
        r = 2.0 * rng.binomial(shots, p_plus) / shots - 1.0
    state = project_to_state(state_from_bloch(r))
    return TomographyResult(q, r, state, shots)


def energy_of(rho_q: np.ndarray, params: EngineParams) -> float:
    """Mean energy ``Tr[rho H]`` of a single qubit, ``H = diag(-hbar w, +hbar w)``."""
    rho_q = np.asarray(rho_q)
    if rho_q.shape != (2, 2):
        raise ValueError(f"energy_of expects a single-qubit state, got shape {rho_q.shape}")
    return qcore.expectation(rho_q, params.hamiltonian())


def energy_from_magnetization(rz: float, params: EngineParams) -> float:
    return -params.hbar_omega * rz


# -- Monte Carlo ---------------------------------------------------------


@dataclass(frozen=True)
class NoiseModel:
    """Gate jitter plus additive Gaussian noise on each measured magnetization."""

    amp_jitter: float = 0.0
    phase_jitter: float = 0.0
    dephasing_jitter: float = 0.0
    readout_std: float = 0.0

    @property
    def gate_noise(self) -> GateNoise:
        return GateNoise(self.amp_jitter, self.phase_jitter, self.dephasing_jitter)

    def as_dict(self) -> dict:
        return {
            "amp_jitter": self.amp_jitter,
            "phase_jitter": self.phase_jitter,
            "dephasing_jitter": self.dephasing_jitter,
            "readout_std": self.readout_std,
        }


# Energy bars of about 0.1 peV at omega = 2000 rad/s; readout dominates.
CALIBRATED_NOISE = NoiseModel(amp_jitter=0.01, phase_jitter=0.01, dephasing_jitter=0.01, readout_std=0.07)


@dataclass(frozen=True)
class ErrorBarReport:
    label: str
    mean: float
    std: float
    n_samples: int
    noise: NoiseModel


@dataclass
class MonteCarloResult:
    """Sampled energies ``(n, steps, qubits)`` in peV and weight entropy change."""

    config: CycleConfig
    params: EngineParams
    noise: NoiseModel
    energies: np.ndarray
    entropies: np.ndarray
    seed: int = 0
    extras: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return self.energies.shape[0]

    @property
    def mean(self) -> np.ndarray:
        return self.energies.mean(axis=0)

    @property
    def std(self) -> np.ndarray:
        # offsets from the first sample keep identical samples at exactly zero spread
        return (self.energies - self.energies[0]).std(axis=0, ddof=1)

    @property
    def weight_entropy_change(self) -> np.ndarray:
        """Per-sample ``S(W)`` after feedback minus before, in nats."""
        f, m = STEPS.index("feedback"), STEPS.index("measurement")
        w = QUBITS.index("W")
        return self.entropies[:, f, w] - self.entropies[:, m, w]

    def entropy_report(self) -> ErrorBarReport:
        ds = self.params.kT * self.weight_entropy_change
        spread = float((ds - ds[0]).std(ddof=1))
        return ErrorBarReport("kT*dS_W(feedback)", float(ds.mean()), spread, self.n_samples, self.noise)

    def reports(self) -> list[ErrorBarReport]:
        mean, std = self.mean, self.std
        out = []
        for s, step in enumerate(STEPS):
            for q, name in enumerate(QUBITS):
                out.append(ErrorBarReport(f"E_{name}@{step}", float(mean[s, q]), float(std[s, q]), self.n_samples, self.noise))
        return out


def measured_sample(ledger: engine.CycleLedger, noise: NoiseModel, rng: np.random.Generator):
    """Energies and entropies read out from a ledger with magnetization noise.

    Energies come straight from the noisy z magnetization; entropies from the
    reconstructed (projected) single-qubit states.
    """
    params = ledger.params
    energies = np.empty((len(STEPS), len(QUBITS)))
    entropies = np.empty_like(energies)
    for s in range(len(STEPS)):
        for q in range(len(QUBITS)):
            r = bloch_vector(qcore.partial_trace(ledger.states[s], [q]))
            if noise.readout_std:
                r = r + rng.normal(0.0, noise.readout_std, 3)
            energies[s, q] = energy_from_magnetization(r[2], params)
            entropies[s, q] = qcore.von_neumann_entropy(project_to_state(state_from_bloch(r)))
    return energies, entropies


def monte_carlo_errorbars(
    config: CycleConfig,
    params: EngineParams,
    noise: NoiseModel,
    n_samples: int,
    seed: int = 0,
    backend="ideal",
) -> MonteCarloResult:
    """Rerun the cycle ``n_samples`` times with jittered gates and noisy readout.

    Sample ``i`` draws from ``default_rng([seed, i])`` so the result does not
    depend on evaluation order.
    """
    if n_samples < 2:
        raise ValueError(f"n_samples must be at least 2, got {n_samples}")
    energies = np.empty((n_samples, len(STEPS), len(QUBITS)))
    entropies = np.empty_like(energies)
    gate_noise = noise.gate_noise
    clean = None
    if gate_noise.is_zero:
        clean = engine.run_cycle(config, params, backend)
    for i in range(n_samples):
        rng = np.random.default_rng([seed, i])
        ledger = clean if clean is not None else engine.run_cycle(config, params, backend, gate_noise, rng)
        energies[i], entropies[i] = measured_sample(ledger, noise, rng)
    return MonteCarloResult(config, params, noise, energies, entropies, seed)
