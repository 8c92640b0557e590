"""Error rates and predictivity of discrete explanatory variables in case-control data.

Submodules: ``exact_binomial`` (bias functionals of binomial pairs),
``disease_model`` (SNP disease models and their exact error and I targets),
``estimators`` (sample estimates from cell tables), ``partition_retention``
(variable selection), ``simulator`` (seeded sampling and bias studies),
``fileio`` and ``cli``.
"""

__version__ = "0.1.0"

from .errors import ContractError, DataError, DegenerateModelError, DomainError, PredictivityError
from .exact_binomial import BinomialPair, bias_grid, expected_min, neg_rel_bias, prob_less_half_ties, tie_half_prob
from .disease_model import DiseaseModel, error_bound, oracle_params, theta_e, theta_I_family
from .estimators import CellCounts, LabeledSample, cell_counts, estimate, i_score, j_score
from .simulator import SimConfig, draw_case_control, replicate_bias_study
from .partition_retention import RetentionConfig, backward_drop, retention_scores, staged_selection

__all__ = [
    "ContractError", "DataError", "DegenerateModelError", "DomainError", "PredictivityError",
    "BinomialPair", "bias_grid", "expected_min", "neg_rel_bias", "prob_less_half_ties", "tie_half_prob",
    "DiseaseModel", "error_bound", "oracle_params", "theta_e", "theta_I_family",
    "CellCounts", "LabeledSample", "cell_counts", "estimate", "i_score", "j_score",
    "SimConfig", "draw_case_control", "replicate_bias_study",
    "RetentionConfig", "backward_drop", "retention_scores", "staged_selection",
]
