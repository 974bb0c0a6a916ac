"""Quantum gambling payoffs, generalized overlaps, and epistemic-model bounds."""

from qgamble.quantum import (
    DensityMatrix,
    Povm,
    PureState,
    WeightedState,
    bloch_state,
    mix,
    positive_part_trace,
    random_density,
    random_pure,
    validate_povm,
)
from qgamble.sdp import SdpProblem, SdpSolution, SolverError, assemble, solve

__version__ = "0.1.0"
