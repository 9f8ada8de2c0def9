"""Rank trajectories of multi-layer linear networks trained under noise."""

from .datagen import (
    AssumptionCertificate,
    load_dataset,
    low_rank_init,
    save_dataset,
    synth_dataset,
    verify_assumptions,
)
from .errors import (
    AssumptionViolated,
    DegenerateInput,
    DivergenceError,
    FullRankError,
    GenerationFailed,
    InvalidInput,
    PerturbationTooLarge,
    UnsupportedActivation,
    UnsupportedDepth,
)
from .estimator import NoisyLinearNetworkRegressor
from .linalg import RankTolerance, SvdFactors, matrix_cosine, numerical_rank, rank_bump, svd
from .netcore import (
    Activation,
    Dataset,
    NetworkWeights,
    backprop_gradients,
    closed_form_gradient,
    finite_difference_gradient,
    forward,
    optimal_loss,
    product_matrix,
    squared_loss,
)
from .noisekit import (
    NoiseSpec,
    RngStream,
    dropout_forward,
    gaussian_dropout_expected_loss,
    input_noise_expected_loss,
    input_noise_phi,
    output_noise_gradient,
    perturb_gradient,
)
from .trainer import RankTrajectory, TrainConfig, sgd_gradient_stats, train

__version__ = "0.1.0"
