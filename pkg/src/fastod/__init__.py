"""fastod: fast training and scoring for large outlier-detector ensembles.

Three independent accelerators that mix and match freely:

* random subspace projection that preserves pairwise distances while
  inducing diversity across ensemble members;
* cost-forecast-driven balanced scheduling of heterogeneous fit tasks
  over a worker pool;
* pseudo-supervised approximation, replacing expensive fitted detectors
  with regression forests for fast prediction on unseen data.
"""

__version__ = "0.1.0"

from ._validation import ConfigError, DataError
from .approx import (Approximator, approximate, predict_approx,
                     pseudo_targets, should_approximate, surface_grid)
from .bundle import (EnsembleBundle, add_approximators, load_cost_model,
                     load_ensemble, save_cost_model, save_ensemble)
from .costmodel import (CostModel, CostRecord, CVReport, collect_timings,
                        featurize, forecast_ranks, load_timings,
                        make_timing_datasets, ranks_from_predictions,
                        save_timings, train_cost_model)
from .data import (DataMatrix, FeatureStats, SplitPair, load_csv,
                   standardize, synth_blob, train_test_split)
from .detectors import (ALGORITHMS, AvgKNN, BaseDetector, DetectorSpec,
                        FastABOD, FeatureBagging, FittedDetector, HBOS,
                        IForest, KNN, LOF, fit_detector, make_estimator,
                        restore_detector)
from .forest import ForestParams, ForestRegressor, fit_forest, predict_forest
from .metrics import EvalResult, evaluate, precision_at_n, roc_auc, spearman
from .pipeline import (PipelineConfig, config_from_dict, config_to_dict,
                       default_cost_model, default_detectors, fit_ensemble,
                       member_plan, predict_scores)
from .projection import (DistortionReport, JL_METHODS, METHODS,
                         ProjectionPlan, apply_plan, decide_k, distortion,
                         make_plan)
from .scheduler import (ExecutionResult, SchedulePlan, execute, imbalance,
                        makespan, plan_bps, plan_simple)

__all__ = [
    "ALGORITHMS", "Approximator", "AvgKNN", "BaseDetector", "ConfigError",
    "CostModel", "CostRecord", "CVReport", "DataError", "DataMatrix",
    "DetectorSpec", "DistortionReport", "EnsembleBundle", "EvalResult",
    "ExecutionResult", "FastABOD", "FeatureBagging", "FeatureStats",
    "FittedDetector", "ForestParams", "ForestRegressor", "HBOS", "IForest",
    "JL_METHODS", "KNN", "LOF", "METHODS", "PipelineConfig",
    "ProjectionPlan", "SchedulePlan", "SplitPair", "add_approximators",
    "apply_plan", "approximate", "collect_timings", "config_from_dict",
    "config_to_dict", "decide_k", "default_cost_model", "default_detectors",
    "distortion", "evaluate", "execute", "featurize", "fit_detector",
    "fit_ensemble", "fit_forest", "forecast_ranks", "imbalance", "load_csv",
    "load_cost_model", "load_ensemble", "load_timings", "make_estimator",
    "make_plan", "make_timing_datasets", "makespan", "member_plan",
    "plan_bps", "plan_simple", "precision_at_n", "predict_approx",
    "predict_forest", "predict_scores", "pseudo_targets",
    "ranks_from_predictions", "restore_detector", "roc_auc",
    "save_cost_model", "save_ensemble", "save_timings", "should_approximate",
    "spearman", "standardize", "surface_grid", "synth_blob",
    "train_cost_model", "train_test_split",
]
