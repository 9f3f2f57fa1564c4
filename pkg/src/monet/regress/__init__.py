"""Regression tools: transforms, Bayesian GLMs, direction tests and RESET."""
from .direction import DirectionVerdict, compare_directions
from .glm import (BglmFit, GlmPosterior, IrlsFit, ObjectivePriors, fit_bayes_lm, fit_bglm,
                  irls, seed_for)
from .reset import ResetReport, reset_bayes_bootstrap
from .splines import SplineBasis, natural_spline_basis
from .terms import Design, GlmSpec, Term, build_design, parse_terms, weibull_quantile, weibull_transform

__all__ = [
    "BglmFit", "Design", "DirectionVerdict", "GlmPosterior", "GlmSpec", "IrlsFit",
    "ObjectivePriors", "ResetReport", "SplineBasis", "Term", "build_design",
    "compare_directions", "fit_bayes_lm", "fit_bglm", "irls", "natural_spline_basis",
    "parse_terms", "reset_bayes_bootstrap", "seed_for", "weibull_quantile", "weibull_transform",
]
