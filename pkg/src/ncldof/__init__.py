"""Negative correlation learning ensembles over fixed random Fourier bases.

Closed-form fits for any diversity ``lam`` in [0, 1], their effective
degrees of freedom, SURE and cross-validation tuning of ``lam``, a
Monte-Carlo df estimator for black-box models, and the ridge-regression
view of the same ensembles.
"""

from .basis import BasisEnsemble, evaluate, frequency_heuristic, sample_rff
from .data import (
    ConstantColumnError,
    Dataset,
    StandardizationParams,
    SynthDataset,
    SynthSpec,
    kfold,
    load_csv,
    split,
    standardize,
    synthesize,
)
from .dof import DfCurve, SureReport, df_analytic, df_curve, df_derivative, df_spectral, noise_variance, sure
from .gram import GramBundle, RankDeficientError, WhitenedGram, compute_gram, whiten
from .mcdof import EstimatorOracle, McDfEstimate, OracleError, estimate_df, ncl_oracle
from .ncl import (
    DecompositionReport,
    FittedEnsemble,
    LambdaPath,
    ModelBundle,
    SmootherMatrix,
    ambiguity,
    emp_error,
    fit,
    ncl_loss,
    predict,
    smoother_matrix,
    true_error,
)
from .theorem6 import Theorem6Report, derivative_at_one, run_theorem6
from .tikhonov import RidgeFit, equivalence_check, fit_ridge, gamma_for_lambda, whitened_features
from .tuning import (
    BenchProtocol,
    BenchRow,
    TuneConfig,
    TuneResult,
    benchmark,
    brent_minimize,
    tune_cv,
    tune_sure,
)

__version__ = "0.1.0"
