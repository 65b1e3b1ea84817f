"""Simulation of a four-qubit quantum Szilard engine in liquid-state NMR."""

from .engine import CycleConfig, CycleLedger, EngineParams, run_cycle
from .metrology import CALIBRATED_NOISE, NoiseModel, monte_carlo_errorbars
from .nmr import MoleculeSpec, PulseSequence, synthetic_molecule
from .pulseopt import OptimizationProblem, compile_cycle, optimize

__all__ = [
    "CALIBRATED_NOISE",
    "CycleConfig",
    "CycleLedger",
    "EngineParams",
    "MoleculeSpec",
    "NoiseModel",
    "OptimizationProblem",
    "PulseSequence",
    "compile_cycle",
    "monte_carlo_errorbars",
    "optimize",
    "run_cycle",
    "synthetic_molecule",
]

__version__ = "0.1.0"
