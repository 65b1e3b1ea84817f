import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qszilard import engine, qcore
from qszilard.engine import A, M, P, W, CycleConfig, EngineParams

# frozen from the closed form 2*hbar*omega / (1 + exp(-2*hbar*omega/kT)),
# hbar = 6.582119569e-4 peV s, omega = 2000 rad/s
ERASURE_FROZEN = {1.33: 2.3133172483715, 2.51: 1.9498132319009, 10.91: 1.4745000180822}
HBAR_OMEGA = 1.3164239138

temperatures = st.floats(0.1, 100.0, allow_nan=False)


def test_units():
    p = EngineParams()
    assert p.hbar_omega == pytest.approx(HBAR_OMEGA, abs=1e-10)
    assert p.gap == pytest.approx(2 * HBAR_OMEGA, abs=1e-10)
    assert np.allclose(p.hamiltonian(), np.diag([-HBAR_OMEGA, HBAR_OMEGA]), atol=1e-10)


def test_params_validation():
    with pytest.raises(ValueError):
        EngineParams(kT=-1.0)
    with pytest.raises(ValueError):
        EngineParams(omega=0.0)
    assert EngineParams(kT=0.0).p_ground == 1.0


@pytest.mark.parametrize("kT,expected", sorted(ERASURE_FROZEN.items()))
def test_erasure_cost_frozen_values(kT, expected):
    led = engine.run_cycle(CycleConfig.for_variant("a"), EngineParams(kT=kT))
    assert led.erasure_cost == pytest.approx(expected, abs=1e-9)


def test_thermal_particle_at_t1():
    p = EngineParams(kT=1.33)
    assert p.p_ground == pytest.approx(0.8786368981, abs=1e-9)
    assert engine.alpha_for_temperature(p) == pytest.approx(0.7116676427, abs=1e-9)
    led = engine.run_cycle(CycleConfig.for_variant("a"), p)
    assert led.energy("thermalization", "P") == pytest.approx(-0.99689, abs=1e-5)
    assert led.entropy("thermalization", "P") == pytest.approx(0.36963, abs=1e-5)


def test_rx_then_dephase_gives_gibbs():
    p = EngineParams(kT=2.51)
    rho = qcore.apply_unitary(qcore.basis_state([0]), qcore.rx(engine.alpha_for_temperature(p)))
    assert np.allclose(engine.gz_dephase(rho), engine.thermal_state(p), atol=1e-14)


def test_gz_dephase_keeps_zero_order_coherence():
    # |01><10| has coherence order 0 and survives the gradient
    rho = qcore.pure_state(np.array([0, 1, 1, 0]) / math.sqrt(2))
    assert np.allclose(engine.gz_dephase(rho), rho)
    plus = qcore.pure_state(np.array([1, 1]) / math.sqrt(2))
    assert np.allclose(engine.gz_dephase(plus), np.eye(2) / 2)
    assert np.allclose(engine.gz_dephase(plus, residual=0.2), [[0.5, 0.1], [0.1, 0.5]])


def _basis_action(spec, bits):
    rho = engine.build_gate(spec) @ qcore.basis_state(bits) @ engine.build_gate(spec).conj().T
    idx = int(np.argmax(np.diag(rho).real))
    assert rho[idx, idx].real == pytest.approx(1.0)
    return tuple(int(b) for b in format(idx, "04b"))


def test_cnot_activates_on_ground_control():
    spec = engine.cnot_gate(P, M, activate_on=engine.GROUND)
    assert _basis_action(spec, (0, 0, 1, 1)) == (0, 0, 0, 1)
    assert _basis_action(spec, (0, 1, 1, 1)) == (0, 1, 1, 1)


def test_cswap_and_crot_swap():
    cswap = engine.cswap_gate(M, W, P, activate_on=engine.EXCITED)
    assert _basis_action(cswap, (0, 1, 1, 0)) == (1, 0, 1, 0)
    assert _basis_action(cswap, (0, 1, 0, 0)) == (0, 1, 0, 0)
    crot = engine.crot_swap_gate(M, W, P, activate_on=engine.GROUND)
    # Rx(pi) on P then swap: (W, P) = (0, 0) -> (1, 0)
    assert _basis_action(crot, (0, 0, 0, 1)) == (1, 0, 0, 1)
    assert _basis_action(crot, (0, 0, 1, 1)) == (0, 0, 1, 1)


def test_build_gate_rejects_overlap():
    with pytest.raises(ValueError):
        engine.build_gate(engine.cnot_gate(P, P))


def test_gates_are_unitary():
    p = EngineParams(kT=1.33)
    for step, gates in engine.cycle_circuit(CycleConfig.for_variant("a"), p):
        for label, spec in gates:
            if spec.kind != "GZ":
                qcore.check_unitary(engine.build_gate(spec, p))


def test_variant_d_has_no_thermalization_and_constant_energies():
    cfg = CycleConfig.for_variant("d")
    assert not cfg.thermalize
    led = engine.run_cycle(cfg, EngineParams(kT=1.33))
    assert np.ptp(led.energies, axis=0).max() < 1e-12
    assert np.allclose(led.energies, engine.constant_energy_trace(cfg, EngineParams()), atol=1e-12)
    with pytest.raises(ValueError):
        engine.theoretical_energy_trace(cfg, EngineParams())


def test_variant_d_ignores_temperature():
    cfg = CycleConfig.for_variant("d")
    a = engine.run_cycle(cfg, EngineParams(kT=1.33)).energies
    b = engine.run_cycle(cfg, EngineParams(kT=50.0)).energies
    assert np.array_equal(a, b)


def test_zero_temperature_limit():
    led = engine.run_cycle(CycleConfig.for_variant("a"), EngineParams(kT=0.0))
    assert led.erasure_cost == pytest.approx(2 * HBAR_OMEGA, abs=1e-9)
    assert np.allclose(led.entropies, 0.0, atol=1e-9)


def test_unknown_backend():
    with pytest.raises(ValueError):
        engine.run_cycle(CycleConfig.for_variant("a"), EngineParams(), backend="pulse")
    with pytest.raises(ValueError):
        engine.run_cycle(CycleConfig.for_variant("a"), EngineParams(), backend="magic")


def test_noise_requires_rng():
    with pytest.raises(ValueError):
        engine.run_cycle(CycleConfig.for_variant("a"), EngineParams(), noise=engine.GateNoise(0.01, 0, 0))


def test_observe_hook_sees_every_step():
    seen = []
    engine.run_cycle(CycleConfig.for_variant("b"), EngineParams(kT=2.51), observe=lambda s, r: seen.append(s))
    assert tuple(seen) == engine.STEPS[1:]


@settings(max_examples=30, deadline=None)
@given(kT=temperatures)
def test_trace_matches_theory(kT):
    p = EngineParams(kT=kT)
    cfg = CycleConfig.for_variant("a")
    led = engine.run_cycle(cfg, p)
    assert np.abs(led.energies - engine.theoretical_energy_trace(cfg, p)).max() < 1e-9


@settings(max_examples=30, deadline=None)
@given(kT=temperatures)
def test_ledger_identities(kT):
    p = EngineParams(kT=kT)
    led = engine.run_cycle(CycleConfig.for_variant("a"), p)
    closed = engine.erasure_cost_closed_form(p)
    assert abs(led.erasure_cost - closed) < 1e-9
    assert abs(led.measurement_memory_drop - closed) < 1e-9
    assert abs(led.weight_work_gain - p.gap) < 1e-9
    assert abs(led.entropy_variation_weight_feedback_nats) < 1e-9
    # heat the particle takes from the reservoir
    assert led.heat_extracted == pytest.approx(p.hbar_omega * (1 - math.tanh(p.hbar_omega / kT)), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(kT=temperatures)
def test_erasure_cost_between_limits(kT):
    # at least hbar*omega (infinite T), at most 2*hbar*omega (T = 0); decreasing in T
    p = EngineParams(kT=kT)
    cost = engine.erasure_cost_closed_form(p)
    assert p.hbar_omega - 1e-12 <= cost <= p.gap + 1e-12
    assert engine.erasure_cost_closed_form(EngineParams(kT=kT * 1.5)) <= cost + 1e-12


@settings(max_examples=20, deadline=None)
@given(kT=temperatures, variant=st.sampled_from("abc"))
def test_states_stay_valid(kT, variant):
    led = engine.run_cycle(CycleConfig.for_variant(variant), EngineParams(kT=kT))
    for rho in led.states:
        qcore.check_density_matrix(rho, 1e-10)
    # unitary steps preserve total entropy after thermalization
    s = [qcore.von_neumann_entropy(r) for r in led.states[1:]]
    assert np.ptp(s) < 1e-8


def test_variants_b_c_match_a():
    p = EngineParams(kT=10.91)
    ref = engine.run_cycle(CycleConfig.for_variant("a"), p).energies
    for v in "bc":
        assert np.allclose(engine.run_cycle(CycleConfig.for_variant(v), p).energies, ref, atol=1e-12)


def test_ideal_jitter_is_seeded():
    noise = engine.GateNoise(0.05, 0.05, 0.05)
    cfg, p = CycleConfig.for_variant("a"), EngineParams(kT=1.33)
    a = engine.run_cycle(cfg, p, noise=noise, rng=np.random.default_rng(3)).energies
    b = engine.run_cycle(cfg, p, noise=noise, rng=np.random.default_rng(3)).energies
    assert np.array_equal(a, b)
    assert not np.allclose(a, engine.run_cycle(cfg, p).energies)


def test_register_constants():
    assert (W, P, M, A) == (0, 1, 2, 3)
    assert engine.STEPS == ("init", "thermalization", "measurement", "feedback", "erasure")
