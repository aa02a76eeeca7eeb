"""Depolarization-based error mitigation on a small noisy density-matrix simulator."""
from .circuit import (Circuit, Gate, GateClassification, Pauli, build_efficient_su2, classify_gates,
                      decompose_one_qubit, fold, invert, observable_circuit, pauli_basis_change,
                      rida_generate)
from .errors import DegenerateCircuitError, QubitLimitError, SingularityError
from .execution import Executor, split_shots
from .noise import NoiseModel, kingston_default, scale
from .simulator import Counts, DensityMatrix, ShotRecord, exact_expectation, run_density

__version__ = "0.1.0"

__all__ = [
    "Circuit", "Gate", "GateClassification", "Pauli", "build_efficient_su2", "classify_gates",
    "decompose_one_qubit", "fold", "invert", "observable_circuit", "pauli_basis_change",
    "rida_generate", "DegenerateCircuitError", "QubitLimitError", "SingularityError", "Executor",
    "split_shots", "NoiseModel", "kingston_default", "scale", "Counts", "DensityMatrix",
    "ShotRecord", "exact_expectation", "run_density",
]
