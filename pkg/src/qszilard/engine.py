"""Four-qubit Szilard engine: thermal preparation, gate set, cycle executor, ledger.

Register order is (W, P, M, A) = (weight, particle, memory, ancilla). Basis
bit 0 is the ground level with energy ``-hbar*omega`` and bit 1 the excited
level with ``+hbar*omega``. Temperatures are always given as ``k_B T`` in peV.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from . import qcore

HBAR_PEV_S = 6.582119569e-4
"""Reduced Planck constant in peV * s."""

W, P, M, A = 0, 1, 2, 3
QUBITS = ("W", "P", "M", "A")
N_QUBITS = 4
STEPS = ("init", "thermalization", "measurement", "feedback", "erasure")
VARIANTS = ("a", "b", "c", "d")
GROUND, EXCITED = "ground", "excited"


@dataclass(frozen=True)
class EngineParams:
    """Energy scale of the engine and the reservoir temperature ``kT`` (peV)."""

    omega: float = 2000.0
    kT: float = 1.33
    hbar: float = HBAR_PEV_S

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if not self.kT >= 0:
            raise ValueError(f"kT must be non-negative, got {self.kT}")

    @property
    def hbar_omega(self) -> float:
        return self.hbar * self.omega

    @property
    def gap(self) -> float:
        """Level spacing ``2*hbar*omega`` in peV."""
        return 2.0 * self.hbar * self.omega

    @property
    def p_ground(self) -> float:
        if self.kT == 0:
            return 1.0
        return 1.0 / (1.0 + math.exp(-self.gap / self.kT))

    def hamiltonian(self) -> np.ndarray:
        """Single-qubit Hamiltonian ``diag(-hbar*omega, +hbar*omega)`` in peV."""
        return np.diag([-self.hbar_omega, self.hbar_omega]).astype(complex)


def _check_kT(params: EngineParams) -> None:
    if params.kT < 0:
        raise ValueError(f"kT must be non-negative, got {params.kT}")


def thermal_state(params: EngineParams) -> np.ndarray:
    """Gibbs state of the particle Hamiltonian at temperature ``params.kT``."""
    _check_kT(params)
    p = params.p_ground
    return np.diag([p, 1.0 - p]).astype(complex)


def alpha_for_temperature(params: EngineParams) -> float:
    """Rotation angle that, followed by dephasing, turns ``|0>`` into the Gibbs state.

    Derived from the Gibbs ground population (gap ``2*hbar*omega``), so
    ``cos^2(alpha/2) = p_ground``.
    """
    _check_kT(params)
    return 2.0 * math.acos(math.sqrt(params.p_ground))


def gz_dephase(rho: np.ndarray, subset: Sequence[int] | None = None, residual: float = 0.0) -> np.ndarray:
    """Remove coherences of nonzero order counted over ``subset``.

    ``residual`` is the fraction of those coherences that survives (0 for a
    perfect gradient); diagonal and zero-order terms are untouched.
    """
    rho = np.asarray(rho, dtype=complex)
    n = qcore.n_qubits_of(rho.shape[0])
    subset = range(n) if subset is None else subset
    mask = 0
    for q in subset:
        mask |= 1 << (n - 1 - q)
    idx = np.arange(2**n)
    exc = np.array([bin(i & mask).count("1") for i in idx])
    order = exc[:, None] - exc[None, :]
    return np.where(order == 0, rho, residual * rho)


# -- gates ---------------------------------------------------------------


@dataclass(frozen=True)
class GateSpec:
    """One circuit element.

    ``kind`` is one of ``RX, GZ, CNOT, CSWAP, CROT_SWAP, SWAP``. ``targets``
    holds the acted-on qubits (for ``CROT_SWAP`` the rotation hits
    ``targets[1]`` before the swap). ``activate_on`` selects which control
    value triggers a controlled gate.
    """

    kind: str
    targets: tuple[int, ...]
    control: int | None = None
    activate_on: str = EXCITED
    theta: float = 0.0

    def label(self) -> str:
        names = ",".join(QUBITS[t] for t in self.targets)
        if self.kind == "RX":
            return f"RX({self.theta:.6g};{names})"
        if self.control is None:
            return f"{self.kind}({names})"
        return f"{self.kind}({QUBITS[self.control]}@{self.activate_on};{names})"


def rx_gate(theta: float, target: int) -> GateSpec:
    return GateSpec("RX", (target,), theta=theta)


def gz_gate(subset: Sequence[int] = (W, P, M, A)) -> GateSpec:
    return GateSpec("GZ", tuple(subset))


def cnot_gate(control: int, target: int, activate_on: str = EXCITED) -> GateSpec:
    return GateSpec("CNOT", (target,), control, activate_on)


def cswap_gate(control: int, t1: int, t2: int, activate_on: str = EXCITED) -> GateSpec:
    return GateSpec("CSWAP", (t1, t2), control, activate_on)


def crot_swap_gate(control: int, t1: int, t2: int, activate_on: str = EXCITED) -> GateSpec:
    return GateSpec("CROT_SWAP", (t1, t2), control, activate_on)


def swap_gate(t1: int, t2: int) -> GateSpec:
    return GateSpec("SWAP", (t1, t2))


@dataclass(frozen=True)
class GzChannel:
    """Gradient dephasing as a channel object (the only non-unitary gate)."""

    subset: tuple[int, ...]
    residual: float = 0.0

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return gz_dephase(rho, self.subset, self.residual)


def _controlled(op: np.ndarray, control: int, targets: Sequence[int], activate_on: str, n: int) -> np.ndarray:
    if activate_on not in (GROUND, EXCITED):
        raise ValueError(f"activate_on must be 'ground' or 'excited', got {activate_on!r}")
    bit = 1 if activate_on == EXCITED else 0
    proj = np.zeros((2, 2), dtype=complex)
    proj[bit, bit] = 1.0
    k = len(targets)
    local = qcore.kron(proj, op) + qcore.kron(np.eye(2) - proj, np.eye(2**k))
    return qcore.embed(local, [control, *targets], n)


def build_gate(spec: GateSpec, params: EngineParams | None = None, n: int = N_QUBITS):
    """Unitary matrix for ``spec`` on an ``n``-qubit register, or a
    :class:`GzChannel` for the gradient."""
    targets = list(spec.targets)
    if spec.control is not None and spec.control in targets:
        raise ValueError(f"control qubit {spec.control} overlaps targets {targets}")
    if spec.kind == "GZ":
        return GzChannel(tuple(targets))
    if spec.kind == "RX":
        return qcore.embed(qcore.rx(spec.theta), targets, n)
    if spec.kind == "SWAP":
        return qcore.embed(qcore.SWAP, targets, n)
    if spec.control is None:
        raise ValueError(f"{spec.kind} needs a control qubit")
    if spec.kind == "CNOT":
        local = qcore.SIGMA_X
    elif spec.kind == "CSWAP":
        local = qcore.SWAP
    elif spec.kind == "CROT_SWAP":
        local = qcore.SWAP @ qcore.kron(qcore.I2, qcore.rx(math.pi))
    else:
        raise ValueError(f"unknown gate kind {spec.kind!r}")
    return _controlled(local, spec.control, targets, spec.activate_on, n)


# -- cycle ---------------------------------------------------------------


@dataclass(frozen=True)
class CycleConfig:
    variant: str
    initial_bits: tuple[int, int, int, int]
    thermalize: bool

    @classmethod
    def for_variant(cls, variant: str) -> "CycleConfig":
        if variant in ("a", "b", "c"):
            # weight and particle in ground, memory and ancilla excited
            return cls(variant, (0, 0, 1, 1), True)
        if variant == "d":
            return cls(variant, (1, 1, 1, 1), False)
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")


# gate labels used as keys for compiled pulses
GATE_RX = "RX_ALPHA"
GATE_CNOT = "CNOT"
GATE_CSWAP = "CSWAP"
GATE_CROT_SWAP = "CROT_SWAP"
GATE_SWAP = "SWAP"
CYCLE_GATES = (GATE_RX, GATE_CNOT, GATE_CSWAP, GATE_CROT_SWAP, GATE_SWAP)


def cycle_circuit(config: CycleConfig, params: EngineParams) -> list[tuple[str, list[tuple[str, GateSpec]]]]:
    """The gates of each step after ``init``, as ``(step, [(label, spec), ...])``."""
    thermal = []
    if config.thermalize:
        thermal = [(GATE_RX, rx_gate(alpha_for_temperature(params), P)), ("GZ", gz_gate())]
    return [
        ("thermalization", thermal),
        ("measurement", [(GATE_CNOT, cnot_gate(P, M, GROUND))]),
        (
            "feedback",
            [
                (GATE_CSWAP, cswap_gate(M, W, P, EXCITED)),
                (GATE_CROT_SWAP, crot_swap_gate(M, W, P, GROUND)),
            ],
        ),
        ("erasure", [(GATE_SWAP, swap_gate(M, A))]),
    ]


def initial_state(config: CycleConfig) -> np.ndarray:
    return qcore.basis_state(config.initial_bits)


@dataclass(frozen=True)
class GateNoise:
    """Per-gate Gaussian jitter: fractional amplitude, phase (rad), and the
    surviving coherence fraction of an imperfect gradient."""

    amp_jitter: float = 0.0
    phase_jitter: float = 0.0
    dephasing_jitter: float = 0.0

    @property
    def is_zero(self) -> bool:
        return self.amp_jitter == 0 and self.phase_jitter == 0 and self.dephasing_jitter == 0


class Backend(Protocol):
    def apply(self, rho: np.ndarray, label: str, spec: GateSpec, params: EngineParams,
              amp_error: float = 0.0, phase_error: float = 0.0) -> np.ndarray: ...


def global_z_rotation(delta: float, n: int = N_QUBITS) -> np.ndarray:
    """``exp(-i delta sum_k sigma_z_k / 2)``: a common shift of every pulse phase."""
    diag = np.ones(1, dtype=complex)
    for _ in range(n):
        diag = np.kron(diag, np.array([np.exp(-0.5j * delta), np.exp(0.5j * delta)]))
    return np.diag(diag)


class IdealBackend:
    """Exact gate unitaries; jitter becomes an over-rotation ``U**(1+eps)``
    and a frame rotation about z."""

    def apply(self, rho, label, spec, params, amp_error=0.0, phase_error=0.0):
        u = build_gate(spec, params)
        if amp_error:
            u = qcore.unitary_power(u, 1.0 + amp_error)
        if phase_error:
            r = global_z_rotation(phase_error)
            u = r @ u @ r.conj().T
        return qcore.apply_unitary(rho, u)


@dataclass
class CycleLedger:
    """Energies (peV) and entropies (nats) per step and subsystem.

    ``energies[s, q]`` and ``entropies[s, q]`` are indexed by
    :data:`STEPS` and :data:`QUBITS`; ``states`` keeps the full register
    state after each step.
    """

    params: EngineParams
    config: CycleConfig
    energies: np.ndarray
    entropies: np.ndarray
    states: list[np.ndarray] = field(repr=False)

    def energy(self, step: str, qubit: str) -> float:
        return float(self.energies[STEPS.index(step), QUBITS.index(qubit)])

    def entropy(self, step: str, qubit: str) -> float:
        return float(self.entropies[STEPS.index(step), QUBITS.index(qubit)])

    def reduced_state(self, step: str, qubit: str) -> np.ndarray:
        return qcore.partial_trace(self.states[STEPS.index(step)], [QUBITS.index(qubit)])

    @property
    def heat_extracted(self) -> float:
        """Energy the particle takes from the reservoir during thermalization."""
        return self.energy("thermalization", "P") - self.energy("init", "P")

    @property
    def weight_work_gain(self) -> float:
        return self.energy("feedback", "W") - self.energy("measurement", "W")

    @property
    def measurement_memory_drop(self) -> float:
        return self.energy("thermalization", "M") - self.energy("measurement", "M")

    @property
    def erasure_cost(self) -> float:
        return self.energy("erasure", "M") - self.energy("feedback", "M")

    @property
    def entropy_variation_weight_feedback_nats(self) -> float:
        return self.entropy("feedback", "W") - self.entropy("measurement", "W")

    @property
    def entropy_variation_weight_feedback(self) -> float:
        """Weight entropy change across feedback expressed as ``kT * dS`` (peV)."""
        return self.params.kT * self.entropy_variation_weight_feedback_nats

    def summary(self) -> dict:
        return {
            "heat_extracted_peV": self.heat_extracted,
            "weight_work_gain_peV": self.weight_work_gain,
            "measurement_memory_drop_peV": self.measurement_memory_drop,
            "erasure_cost_peV": self.erasure_cost,
            "entropy_variation_weight_feedback_nats": self.entropy_variation_weight_feedback_nats,
            "entropy_variation_weight_feedback_peV": self.entropy_variation_weight_feedback,
        }


def _record(rho: np.ndarray, params: EngineParams) -> tuple[np.ndarray, np.ndarray]:
    h = params.hamiltonian()
    energies = np.empty(N_QUBITS)
    entropies = np.empty(N_QUBITS)
    for q in range(N_QUBITS):
        red = qcore.partial_trace(rho, [q])
        energies[q] = qcore.expectation(red, h)
        entropies[q] = qcore.von_neumann_entropy(red)
    return energies, entropies


def run_cycle(
    config: CycleConfig,
    params: EngineParams,
    backend: str | Backend = "ideal",
    noise: GateNoise | None = None,
    rng: np.random.Generator | None = None,
    observe: Callable[[str, np.ndarray], None] | None = None,
) -> CycleLedger:
    """Execute init, thermalization, measurement, feedback and erasure.

    ``backend`` is ``"ideal"`` or an object with an ``apply`` method such as
    a compiled-pulse backend. With ``noise``, each gate draws its own jitter
    from ``rng``.
    """
    if isinstance(backend, str):
        if backend == "ideal":
            backend = IdealBackend()
        elif backend == "pulse":
            raise ValueError("pulse backend requires compiled pulses; pass a PulseBackend instance")
        else:
            raise ValueError(f"unknown backend {backend!r}")
    noisy = noise is not None and not noise.is_zero
    if noisy and rng is None:
        raise ValueError("noise requires an rng")

    rho = initial_state(config)
    states = [rho]
    rows = [_record(rho, params)]
    for step, gates in cycle_circuit(config, params):
        for label, spec in gates:
            if spec.kind == "GZ":
                residual = abs(rng.normal(0.0, noise.dephasing_jitter)) if noisy else 0.0
                rho = gz_dephase(rho, spec.targets, residual)
            else:
                amp = rng.normal(0.0, noise.amp_jitter) if noisy else 0.0
                phase = rng.normal(0.0, noise.phase_jitter) if noisy else 0.0
                rho = backend.apply(rho, label, spec, params, amp, phase)
        if observe is not None:
            observe(step, rho)
        states.append(rho)
        rows.append(_record(rho, params))
    energies = np.array([r[0] for r in rows])
    entropies = np.array([r[1] for r in rows])
    return CycleLedger(params, config, energies, entropies, states)


def theoretical_energy_trace(config: CycleConfig, params: EngineParams) -> np.ndarray:
    """Closed-form energies (peV), shape ``(len(STEPS), len(QUBITS))``.

    Only defined for the thermalizing variants a-c.
    """
    if not config.thermalize:
        raise ValueError("theoretical trace is defined for variants a-c only")
    _check_kT(params)
    e = params.hbar_omega
    t = 1.0 if params.kT == 0 else math.tanh(e / params.kT)
    init = [-e, -e, e, e]
    therm = [-e, -e * t, e, e]
    meas = [-e, -e * t, -e * t, e]
    feed = [e, -e, -e * t, e]
    erase = [e, -e, e, -e * t]
    return np.array([init, therm, meas, feed, erase])


def constant_energy_trace(config: CycleConfig, params: EngineParams) -> np.ndarray:
    """Energies of a cycle whose state never changes (variant d)."""
    row = [params.hbar_omega * (2 * b - 1) for b in config.initial_bits]
    return np.array([row] * len(STEPS), dtype=float)


def expected_energy_trace(config: CycleConfig, params: EngineParams) -> np.ndarray:
    if config.thermalize:
        return theoretical_energy_trace(config, params)
    return constant_energy_trace(config, params)


def erasure_cost_closed_form(params: EngineParams) -> float:
    """Memory energy restored by the erasure swap: ``2*hbar*omega*p_ground``."""
    _check_kT(params)
    return params.gap * params.p_ground
