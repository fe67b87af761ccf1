"""Exact auditing of swap multicalibration, omniprediction and outcome indistinguishability on finite distributions."""

from .audit import (AuditReport, LevelSetAudit, audit, bad_intervals, conditional_means, improvement_witness,
                    loss_oi_violation, loss_oi_violations, omniprediction_regret, squared_error,
                    swap_agnostic_regret, swap_loss_oi_violation, swap_omni_regret)
from .boost import BoostConfig, BoostTrace, SwapAgnosticResult, bucketize, mcboost, swap_agnostic_learn
from .distributions import (DiscreteJoint, Predictor, conditional_label_mean, from_samples, image, level_set,
                            prediction_marginal)
from .errors import *  # noqa: F401,F403
from .hypotheses import (Hypothesis, HypothesisClass, LinCombination, LinGrid, compose_partial_class, eval_lin,
                         lin_grid, validate_class, weak_agnostic_learn)
from .losses import (LossFamily, LossSpec, builtin, check_nice, eval_extended, glm_loss, optimal_action, partial,
                     project)
from .separations import build_glm_instance, build_parity_instance, verify_separations

__version__ = "0.1.0"
