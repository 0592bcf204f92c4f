"""Exogenous predictors ŷ: oracle, in-sample OLS and cross-fitted OLS."""

from peergeo.predictor.predict import (
    DEFAULT_FOLDS,
    PredictorKind,
    PredictorSpec,
    assign_folds,
    predict,
    predictor_design,
)

__all__ = ["DEFAULT_FOLDS", "PredictorKind", "PredictorSpec", "assign_folds", "predict", "predictor_design"]
