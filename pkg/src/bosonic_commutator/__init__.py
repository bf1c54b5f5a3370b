"""Simulation of heralded superpositions of ladder-operator sequences on thermal light."""

from .config import ConfigError, ExperimentConfig
from .estimation import KFitResult, fit_k, fringe_rate, model_pdf
from .fock import (
    DensityMatrix,
    DiagonalState,
    SubtractionModel,
    SuperpositionSpec,
    apply_conditional,
    apply_partially_coherent,
    bs_subtraction,
    fidelity,
    ladder_matrices,
    loss_channel,
    mean_photon,
    polynomial_operator,
    superposition_operator,
    thermal_state,
)
from .quadrature import QuadratureGrid, QuadratureHistogram, make_histogram, quadrature_pdf, sample_quadratures
from .tomography import build_povm, inverse_loss, mle_reconstruct, wigner_diagonal

__version__ = "0.1.0"
