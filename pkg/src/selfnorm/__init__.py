"""Self-normalising networks: the SELU moment map, its contraction analysis,
grid verification of the stability inequalities, and empirical checks."""
from .jacobian import (
    Jacobian2x2,
    SingularPair,
    jacobian_H,
    jacobian_J,
    singular_values_2x2,
    spectral_norm_S,
)
from .moments import (
    ALPHA_01,
    LAMBDA_01,
    SELU_01,
    ConvergenceError,
    DivergenceError,
    MapResult,
    MomentPair,
    NoSolutionError,
    SeluParams,
    WeightMoments,
    iterate_map,
    map_moments,
    quadrature_oracle,
    solve_selu_params,
)
from .primitives import (
    DropoutConfig,
    LayerSpec,
    ShapeError,
    alpha_dropout,
    forward,
    lecun_init,
    make_dropout_config,
    selu,
    selu_derivative,
)
from .simulation import (
    NetSpec,
    PropagationTrace,
    TrainHistory,
    TrainingDivergedError,
    normality_check,
    propagate_moments_mc,
    train_sgd,
)
from .special import BoundPair, DomainError, abramowitz_bounds, erfc, erfc_scaled, ren_scaled_erfc
from .verify import (
    ConfigError,
    DomainBox,
    GridSpec,
    VerificationReport,
    error_budget,
    mvt_slack,
    verify_contraction,
    verify_domain_mapping,
    verify_mu_squared_bound,
    verify_variance_decrease,
    verify_variance_increase,
)

__version__ = "0.1.0"
