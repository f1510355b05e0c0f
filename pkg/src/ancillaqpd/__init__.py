"""Multi-time correlation functions and quasi-probability distributions from
ancilla-assisted sequential measurements."""

from .estimate import (
    Estimate,
    QpdTable,
    correlation_from_qpd,
    estimate_correlation,
    estimate_qpd,
    exact_correlation,
    exact_qpd,
    lgi_k,
    marginal,
)
from .povm import MeasurementSet, builtin_set, build_povm, is_informationally_complete
from .protocol import NoiseModel, Protocol, Step, exact_distribution, explicit_circuit_distribution, sample
from .qmodel import Channel, DensityMatrix, Observable, named_observable
from .weights import WeightVector, build_system, hoeffding_n, solve_weights, weights_for

__version__ = "0.1.0"

__all__ = [
    "Channel", "DensityMatrix", "Estimate", "MeasurementSet", "NoiseModel", "Observable", "Protocol",
    "QpdTable", "Step", "WeightVector", "build_povm", "build_system", "builtin_set",
    "correlation_from_qpd", "estimate_correlation", "estimate_qpd", "exact_correlation",
    "exact_distribution", "exact_qpd", "explicit_circuit_distribution", "hoeffding_n",
    "is_informationally_complete", "lgi_k", "marginal", "named_observable", "sample",
    "solve_weights", "weights_for",
]
