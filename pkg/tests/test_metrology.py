import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qszilard import engine, metrology, qcore
from qszilard.engine import CycleConfig, EngineParams
from qszilard.metrology import NoiseModel


def test_exact_tomography_recovers_reduced_state():
    rng = np.random.default_rng(0)
    rho = qcore.random_density_matrix(4, rng)
    for q in range(4):
        res = metrology.tomograph_qubit(rho, q)
        assert np.allclose(res.state, qcore.partial_trace(rho, [q]), atol=1e-12)
    assert res.label == "A"


def test_tomography_examples():
    res = metrology.tomograph_qubit(qcore.basis_state([0]), 0)
    assert np.allclose(res.bloch, [0, 0, 1])
    assert qcore.fidelity(res.state, qcore.basis_state([0])) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(metrology.tomograph_qubit(np.eye(2) / 2, 0).bloch, 0)


def test_exact_tomography_of_ideal_cycle():
    led = engine.run_cycle(CycleConfig.for_variant("a"), EngineParams(kT=1.33))
    p = led.params
    for s, step in enumerate(engine.STEPS):
        for q, name in enumerate(engine.QUBITS):
            res = metrology.tomograph_qubit(led.states[s], q)
            assert qcore.fidelity(res.state, led.reduced_state(step, name)) >= 0.999999
            full = qcore.expectation(led.states[s], qcore.embed(p.hamiltonian(), [q], 4))
            assert metrology.energy_of(res.state, p) == pytest.approx(full, abs=1e-10)


def test_bloch_round_trip():
    rho = qcore.random_density_matrix(1, np.random.default_rng(1))
    assert np.allclose(metrology.state_from_bloch(metrology.bloch_vector(rho)), rho, atol=1e-14)
    assert np.allclose(metrology.bloch_vector(qcore.basis_state([0])), [0, 0, 1])


def test_shot_noise_scales_as_inverse_root():
    rho = qcore.pure_state(np.array([1, 1]) / math.sqrt(2))
    spreads = []
    for shots in (100, 10000):
        rz = [metrology.tomograph_qubit(rho, 0, shots, seed=[7, i]).bloch[2] for i in range(400)]
        spreads.append(np.std(rz))
    # sigma(r_z) = 1 / sqrt(shots) for an equal superposition
    assert spreads[0] == pytest.approx(0.1, rel=0.15)
    assert spreads[0] / spreads[1] == pytest.approx(10.0, rel=0.2)


def test_shots_validation():
    with pytest.raises(ValueError):
        metrology.tomograph_qubit(np.eye(2) / 2, 0, 0)
    with pytest.raises(ValueError):
        metrology.tomograph_qubit(np.eye(2) / 2, 0, "many")


@settings(max_examples=50, deadline=None)
@given(r=st.lists(st.floats(-1.5, 1.5), min_size=3, max_size=3))
def test_projection_is_idempotent_and_valid(r):
    proj = metrology.project_to_state(metrology.state_from_bloch(r))
    qcore.check_density_matrix(proj, 1e-10)
    assert np.allclose(metrology.project_to_state(proj), proj, atol=1e-12)


def test_projection_leaves_valid_state_alone():
    rho = qcore.random_density_matrix(1, np.random.default_rng(2))
    assert np.allclose(metrology.project_to_state(rho), rho, atol=1e-14)


def test_energy_readout():
    p = EngineParams()
    assert metrology.energy_of(qcore.basis_state([0]), p) == pytest.approx(-1.3164, abs=1e-4)
    assert metrology.energy_of(np.eye(2) / 2, p) == 0.0
    assert metrology.energy_of(engine.thermal_state(EngineParams(kT=1.33)), p) == pytest.approx(-0.997, abs=1e-3)
    assert metrology.energy_of(qcore.basis_state([1]), p) == pytest.approx(p.hbar_omega)
    rho = np.diag([0.8, 0.2])
    assert metrology.energy_of(rho, p) == pytest.approx(metrology.energy_from_magnetization(0.6, p))
    with pytest.raises(ValueError):
        metrology.energy_of(np.eye(4) / 4, p)


def _mc(noise, n=50, seed=0, kT=1.33, variant="a"):
    return metrology.monte_carlo_errorbars(CycleConfig.for_variant(variant), EngineParams(kT=kT), noise, n, seed)


def test_zero_noise_gives_zero_bars():
    res = _mc(NoiseModel(), n=5)
    assert np.all(res.std == 0)
    assert np.allclose(res.mean, engine.run_cycle(CycleConfig.for_variant("a"), EngineParams(kT=1.33)).energies)


def test_readout_noise_doubling_doubles_bars():
    a = _mc(NoiseModel(readout_std=0.05))
    b = _mc(NoiseModel(readout_std=0.10))
    assert np.allclose(b.std, 2 * a.std, rtol=1e-12)


def test_readout_bar_matches_analytic():
    res = _mc(NoiseModel(readout_std=0.07), n=2000)
    assert res.std.mean() == pytest.approx(0.07 * EngineParams().hbar_omega, rel=0.05)


def test_same_seed_same_samples():
    a = _mc(metrology.CALIBRATED_NOISE, n=20, seed=5)
    b = _mc(metrology.CALIBRATED_NOISE, n=20, seed=5)
    assert np.array_equal(a.energies, b.energies)
    # sample i does not depend on how many samples are drawn
    c = _mc(metrology.CALIBRATED_NOISE, n=10, seed=5)
    assert np.array_equal(a.energies[:10], c.energies)


def test_bars_insensitive_to_seed_at_1000_samples():
    a = _mc(metrology.CALIBRATED_NOISE, n=1000, seed=1)
    b = _mc(metrology.CALIBRATED_NOISE, n=1000, seed=2)
    assert np.allclose(a.std, b.std, rtol=0.15)
    assert a.std.mean() == pytest.approx(b.std.mean(), rel=0.05)


def test_gate_jitter_alone_spreads_energies():
    res = _mc(NoiseModel(amp_jitter=0.05), n=30)
    assert res.std[3:].max() > 0
    # init energies never see a gate
    assert np.all(res.std[0] == 0)


def test_entropy_report_and_reports():
    res = _mc(metrology.CALIBRATED_NOISE, n=30)
    rep = res.entropy_report()
    assert rep.n_samples == 30
    assert abs(rep.mean) < 0.2
    labels = [r.label for r in res.reports()]
    assert len(labels) == 20 and labels[0] == "E_W@init"


def test_needs_two_samples():
    with pytest.raises(ValueError):
        _mc(NoiseModel(), n=1)
