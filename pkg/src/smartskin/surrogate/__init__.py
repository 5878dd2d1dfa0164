"""Small-scale surrogate: synthetic oracle, training sets and Ordinary Kriging."""
from .kriging import KrigingConfig, KrigingModel, fit_ok, predict, predict_outputs
from .oracle import OracleParams, SmallScaleLayout, synthetic_oracle
from .training import TrainingSet, build_training_set, lhs_sampler

__all__ = [
    "KrigingConfig", "KrigingModel", "fit_ok", "predict", "predict_outputs",
    "OracleParams", "SmallScaleLayout", "synthetic_oracle",
    "TrainingSet", "build_training_set", "lhs_sampler",
]
