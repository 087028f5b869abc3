"""Black-box safety-risk quantification for feedforward networks.

Estimates a Lipschitzian metric over user-selected property expressions with
a batched mesh adaptive direct search optimizer and converts it into
conservative safe-norm-ball radii; also searches for uncertainty and
reachability examples.
"""

from .auglag import (AugLagConfig, ConstrainedResult, ConstraintFn,
                     InfeasibleStartError, merit, minimize_constrained)
from .mads import (BoxBounds, MadsConfig, MadsResult, MadsState,
                   StartPointError, minimize)
from .network import (Batch, Conv2D, Dense, Flatten, Identity, InputError,
                      MaxPool, Network, ReLU, ShapeError, Sigmoid, Softmax,
                      Tanh, forward, forward_single)
from .properties import (ConfidenceInterval, ConfigError, ContractError,
                         LabelDecision, Reachability, RiskCategory, RiskClass,
                         UncertaintyReference, UncertaintyUniform,
                         classify_risk, eval_ci, eval_reachability,
                         eval_uncertainty, eval_uncertainty_ref, label,
                         make_ci_case)
from .modelio import (ModelFormatError, ReportFormatError, RunConfig,
                      RunConfigError, load_config, load_model, load_report,
                      save_model, save_report)
from .quantify import (CenterAtRiskError, Certificate, GridSizeError, NormBall,
                       QuantReport, ReachResult, RiskWitness, certify_radius,
                       grid_oracle, lipschitz_metric, random_sampling_baseline,
                       reach_range, targeted_robustness, uncertainty_search)

__version__ = "0.1.0"
