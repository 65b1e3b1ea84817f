"""Fast analytic-oracle checks behind ``qszilard selftest``."""

from __future__ import annotations

import numpy as np

from . import engine, metrology, nmr, pulseopt, qcore
from .engine import CycleConfig, EngineParams

REFERENCE_TEMPERATURES = (1.33, 2.51, 10.91)
# Target energy error bar and its tolerance, in peV.
ERRBAR_TARGET = 0.1
ERRBAR_TOL = 0.05
MC_SAMPLES = 200


def _closed_form_erasure():
    worst = 0.0
    for kT in REFERENCE_TEMPERATURES:
        p = EngineParams(kT=kT)
        cost = engine.run_cycle(CycleConfig.for_variant("a"), p).erasure_cost
        worst = max(worst, abs(cost - 2 * p.hbar_omega / (1 + np.exp(-p.gap / kT))))
    return worst < 1e-9, f"max |erasure - closed form| = {worst:.2e} peV"


def _weight_gain():
    p = EngineParams(kT=1.33)
    led = engine.run_cycle(CycleConfig.for_variant("a"), p)
    err = abs(led.weight_work_gain - p.gap)
    return err < 1e-9, f"gain {led.weight_work_gain:.6f} peV vs 2*hbar*omega {p.gap:.6f}"


def _weight_entropy():
    worst = max(
        abs(engine.run_cycle(CycleConfig.for_variant("a"), EngineParams(kT=kT)).entropy_variation_weight_feedback_nats)
        for kT in REFERENCE_TEMPERATURES
    )
    return worst < 1e-9, f"max |dS_W| = {worst:.2e} nats"


def _theory_trace():
    rng = np.random.default_rng(0)
    worst = 0.0
    for kT in rng.uniform(0.1, 100.0, 10):
        p = EngineParams(kT=kT)
        cfg = CycleConfig.for_variant("a")
        worst = max(worst, np.abs(engine.run_cycle(cfg, p).energies - engine.theoretical_energy_trace(cfg, p)).max())
    return worst < 1e-9, f"max deviation {worst:.2e} peV"


def _isolation():
    led = engine.run_cycle(CycleConfig.for_variant("d"), EngineParams(kT=1.33))
    spread = np.ptp(led.energies, axis=0).max()
    return spread < 1e-9, f"max energy spread {spread:.2e} peV"


def _free_evolution():
    # uncoupled single spin: free precession is a z rotation by offset * t
    m = nmr.MoleculeSpec(np.array([300.0]), np.zeros((1, 1)), 10.0, 1.0)
    t = 1.7e-3
    u = nmr.free_evolution(m, t)
    ref = np.diag(np.exp([-0.5j * 300.0 * t, 0.5j * 300.0 * t]))
    err = np.abs(u - ref).max()
    return err < 1e-12, f"max deviation {err:.2e}"


def _gradient():
    rng = np.random.default_rng(1)
    m = nmr.MoleculeSpec(np.array([-800.0, 900.0]), np.array([[0, 50.0], [50.0, 0]]), 10.0, 1.0)
    target = qcore.random_unitary(2, rng)
    prob = pulseopt.OptimizationProblem(m, target, 4e-3, 12, 2 * np.pi * 500)
    amps = rng.uniform(0.2, 0.8, 12) * prob.amp_limit
    phases = rng.uniform(-np.pi, np.pi, 12)
    _, ga, gp = pulseopt.fidelity_and_gradient(prob, amps, phases)
    h = 1e-6
    fd_a, fd_p = np.empty(12), np.empty(12)
    for k in range(12):
        e = np.zeros(12)
        e[k] = h * prob.amp_limit
        fd_a[k] = (pulseopt.fidelity_and_gradient(prob, amps + e, phases)[0]
                   - pulseopt.fidelity_and_gradient(prob, amps - e, phases)[0]) / (2 * h * prob.amp_limit)
        e = np.zeros(12)
        e[k] = h
        fd_p[k] = (pulseopt.fidelity_and_gradient(prob, amps, phases + e)[0]
                   - pulseopt.fidelity_and_gradient(prob, amps, phases - e)[0]) / (2 * h)
    an = np.concatenate([ga * prob.amp_limit, gp])
    fd = np.concatenate([fd_a * prob.amp_limit, fd_p])
    rel = np.linalg.norm(an - fd) / np.linalg.norm(fd)
    return rel < 1e-4, f"relative error {rel:.2e}"


def _mc_calibration():
    bars = []
    for kT in REFERENCE_TEMPERATURES:
        mc = metrology.monte_carlo_errorbars(
            CycleConfig.for_variant("a"), EngineParams(kT=kT), metrology.CALIBRATED_NOISE, MC_SAMPLES, seed=0
        )
        bars.append(float(mc.std.mean()))
    lo, hi = min(bars), max(bars)
    ok = abs(lo - ERRBAR_TARGET) <= ERRBAR_TOL and abs(hi - ERRBAR_TARGET) <= ERRBAR_TOL
    return ok, f"mean energy bars {', '.join(f'{b:.3f}' for b in bars)} peV with {metrology.CALIBRATED_NOISE}"


CHECKS = {
    "erasure cost closed form": _closed_form_erasure,
    "weight work gain": _weight_gain,
    "weight entropy unchanged": _weight_entropy,
    "theory energy trace": _theory_trace,
    "isolation (variant d)": _isolation,
    "free precession": _free_evolution,
    "optimizer gradient": _gradient,
    "Monte Carlo calibration": _mc_calibration,
}


def run_selftest(echo=print) -> bool:
    all_ok = True
    for name, check in CHECKS.items():
        ok, detail = check()
        all_ok &= bool(ok)
        echo(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return all_ok
