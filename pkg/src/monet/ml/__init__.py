"""Machine-learning regressors, repeated cross-validation and stacking."""
from .models import (BayesRegNet, ConditionalForest, ConditionalTree, ModelKind, QuantileForest,
                     RadialSvm, default_grid, exact_permutation_pvalue, linear_statistic_pvalue,
                     make_model)
from .stacking import (EnsembleFit, GateDecision, ensemble_gate, ensemble_report, stack_members,
                       stack_predictions)
from .training import CvPlan, CvReport, TrainedModel, train_model

__all__ = [
    "BayesRegNet", "ConditionalForest", "ConditionalTree", "CvPlan", "CvReport", "EnsembleFit",
    "GateDecision", "ModelKind", "QuantileForest", "RadialSvm", "TrainedModel", "default_grid",
    "ensemble_gate", "ensemble_report", "exact_permutation_pvalue", "linear_statistic_pvalue",
    "make_model", "stack_members", "stack_predictions", "train_model",
]
