"""Debiased post-click conversion-rate estimation under MNAR feedback."""

from .datasets import (ConversionDataset, EventTable, SplitSpec,
                       filter_test_users, load_dataset_from_manifest,
                       load_ratings, split_mnar, to_conversion_setting)
from .errors import (ConfigError, CvrDebiasError, EstimatorError,
                     EvaluationError, GenerationError, ParseError,
                     TrainingError, ValidationError)
from .estimators import (EstimateReport, LossInputs, dr_bias, dr_loss,
                         dr_variance, eib_loss, ideal_loss, ips_loss,
                         ips_variance, naive_loss, relative_error)
from .metrics import dcg_at_k, evaluate, recall_at_k
from .models import (AdamState, FMGradients, FMParams, adam_update,
                     cross_entropy, fm_gradients, fm_predict)
from .propensity import PropensityConfig, PropensityModel, propensity_of, train_ctr
from .synthetic import (BenchmarkConfig, GroundTruth, PredictedMatrixKind,
                        SampledWorld, SimulationSpec, build_ground_truth,
                        complete_ratings, heuristic_imputed_errors,
                        make_predicted_matrix, match_marginals,
                        noisy_inverse_propensity, ratings_to_ctr,
                        ratings_to_cvr, run_estimator_benchmark, sample_world,
                        synthesize_events, write_simulated_dataset)
from .training import (DoubleLearner, TrainConfig, early_stopping_check,
                       generate_pseudo_labels, imputation_batch_loss,
                       prediction_batch_loss, run_method, sample_batch,
                       sync_imputation)

__version__ = "0.1.0"
