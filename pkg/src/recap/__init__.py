"""Behavioural capture-recapture models for closed populations.

Partial capture histories are turned into numeric covariates, models are
fitted by unconditional maximum likelihood profiled over the population size,
and candidate behavioural patterns are compared by AIC.
"""

from .glm import Design, DegenerateDesignError, GlmFit, GroupedData, build_grouped, irls_fit, loglik
from .histories import (
    CaptureDataError,
    CaptureMatrix,
    CovariateMatrix,
    Quantifier,
    covariate_matrix,
    parse_quantifier,
    quantify_f,
    quantify_g,
    quantify_gaug,
    quantify_gn,
    quantify_gtilde,
    read_capture_csv,
)
from .likelihood import FitResult, ProfilePoint, fit_model, maximize, p0, profile, profile_ci
from .models import ModelSpec, parse_model, parse_models
from .partitions import CutRecipe, Partition, cut_partition, markov_correspondence_check, named_partition
from .selection import RankingReport, cut_search, rank_models
from .simulation import GeneratorSpec, TrialReport, expected_m, generate, run_trial

__version__ = "0.1.0"
