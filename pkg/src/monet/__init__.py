"""Quantity-of-prices analysis toolkit: data handling, distribution fitting,
HMC-based Bayesian regression, model evaluation, ML baselines and the
per-country pipeline.
"""
from .errors import MonetError

__version__ = "0.1.0"

__all__ = ["MonetError", "__version__"]
