"""Labelling, safety-property expressions, and the risk taxonomy.

A property expression maps a network output vector to a scalar; a negative
value signals a safety risk.  Three families are provided: confidence-interval
gaps (robustness), KL-divergence-from-a-reference (uncertainty), and
per-label probability thresholds (reachability).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "ConfigError",
    "ContractError",
    "PROB_FLOOR",
    "LabelDecision",
    "label",
    "ConfidenceInterval",
    "UncertaintyUniform",
    "UncertaintyReference",
    "Reachability",
    "PropertyExpr",
    "eval_ci",
    "make_ci_case",
    "eval_uncertainty",
    "eval_uncertainty_ref",
    "eval_reachability",
    "kl_from_uniform",
    "RiskCategory",
    "RiskClass",
    "classify_risk",
]


class ConfigError(ValueError):
    """Invalid property/label configuration."""


class ContractError(ValueError):
    """A documented precondition was violated by the caller."""


# Softmax outputs can underflow to exactly 0; clamp before any log.
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class LabelDecision:
    """Outcome of the labelling rule: argmax label if its margin over the
    runner-up exceeds the threshold, else 0 (network not confident)."""

    label: int
    top_label: int
    margin: float
    epsilon_label: float


def label(out, epsilon_label: float) -> LabelDecision:
    """Label an output vector.  Labels are 1-based; 0 means undecided.

    Ties in the argmax break to the lowest index; a tie forces margin 0 and
    hence label 0.  The margin comparison is strict.
    """
    out = np.asarray(out, dtype=np.float64)
    if out.ndim != 1 or out.shape[0] < 2:
        raise ConfigError("output must be a vector with at least 2 labels")
    if not 0.0 <= epsilon_label < 1.0:
        raise ConfigError("epsilon_label must be in [0, 1)")
    k = int(np.argmax(out))
    rest = np.delete(out, k)
    margin = float(out[k] - rest.max())
    lab = k + 1 if margin > epsilon_label else 0
    return LabelDecision(label=lab, top_label=k + 1, margin=margin,
                         epsilon_label=epsilon_label)


@dataclass(frozen=True)
class ConfidenceInterval:
    """s(out) = out[l1] - out[l2] - epsilon; labels are 1-based."""

    l1: int
    l2: int
    epsilon: float = 0.0

    def __post_init__(self):
        if self.l1 == self.l2:
            raise ConfigError("confidence interval needs two distinct labels")
        if self.l1 < 1 or self.l2 < 1:
            raise ConfigError("labels are 1-based positive integers")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError("epsilon must be in [0, 1]")

    def evaluate(self, out) -> float:
        out = np.asarray(out, dtype=np.float64)
        return float(out[self.l1 - 1] - out[self.l2 - 1] - self.epsilon)

    def evaluate_many(self, outs: np.ndarray) -> np.ndarray:
        return outs[:, self.l1 - 1] - outs[:, self.l2 - 1] - self.epsilon


@dataclass(frozen=True)
class UncertaintyUniform:
    """s(out) = -epsilon - sum_l (1/m) log(m * out_l), i.e. KL(uniform || out)
    minus epsilon.  Negative when the output is within epsilon of uniform."""

    epsilon: float

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ConfigError("uncertainty epsilon must be > 0")

    def evaluate(self, out) -> float:
        return float(kl_from_uniform(np.asarray(out, dtype=np.float64)) - self.epsilon)

    def evaluate_many(self, outs: np.ndarray) -> np.ndarray:
        m = outs.shape[1]
        clamped = np.maximum(outs, PROB_FLOOR)
        return -self.epsilon - np.log(m * clamped).sum(axis=1) / m


@dataclass(frozen=True)
class UncertaintyReference:
    """KL-style distance of the output from a user-supplied reference
    distribution (a known bad behaviour to stay away from)."""

    reference: np.ndarray
    epsilon: float

    def __post_init__(self):
        ref = np.asarray(self.reference, dtype=np.float64)
        if ref.ndim != 1 or ref.shape[0] < 2:
            raise ConfigError("reference must be a probability vector, m >= 2")
        if np.any(ref <= 0):
            raise ConfigError("reference entries must be strictly positive")
        if abs(ref.sum() - 1.0) > 1e-6:
            raise ConfigError("reference must sum to 1 within 1e-6")
        if self.epsilon <= 0:
            raise ConfigError("uncertainty epsilon must be > 0")
        object.__setattr__(self, "reference", ref)

    def evaluate(self, out) -> float:
        return float(self.evaluate_many(np.asarray(out, dtype=np.float64)[None, :])[0])

    def evaluate_many(self, outs: np.ndarray) -> np.ndarray:
        m = outs.shape[1]
        clamped = np.maximum(outs, PROB_FLOOR)
        return -self.epsilon - np.log(clamped / self.reference).sum(axis=1) / m


@dataclass(frozen=True)
class Reachability:
    """s(out) = out[l] - epsilon: how far label l's probability sits above a
    rigidity threshold.  The quantifier composes this into the reachability
    check f_l(x_hat) >= f_l(x) + epsilon."""

    label: int
    epsilon: float

    def __post_init__(self):
        if self.label < 1:
            raise ConfigError("labels are 1-based positive integers")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError("reachability epsilon must be in (0, 1)")

    def evaluate(self, out) -> float:
        return float(np.asarray(out, dtype=np.float64)[self.label - 1] - self.epsilon)

    def evaluate_many(self, outs: np.ndarray) -> np.ndarray:
        return outs[:, self.label - 1] - self.epsilon


PropertyExpr = ConfidenceInterval | UncertaintyUniform | UncertaintyReference | Reachability


def eval_ci(expr: ConfidenceInterval, out) -> float:
    return expr.evaluate(out)


def make_ci_case(case: int, out_at_x0, epsilon: float = 0.0,
                 target_l: int | None = None) -> ConfidenceInterval:
    """Instantiate the confidence-interval labels from an output at a base
    point: case 1 pairs top with runner-up, case 2 top with a given target,
    case 3 top with the least-confident label."""
    out = np.asarray(out_at_x0, dtype=np.float64)
    j1 = int(np.argmax(out)) + 1
    if case == 1:
        rest = out.copy()
        rest[j1 - 1] = -np.inf
        j2 = int(np.argmax(rest)) + 1
    elif case == 2:
        if target_l is None:
            raise ConfigError("case 2 requires a target label")
        if target_l == j1:
            raise ConfigError("case 2 target must differ from the top label")
        j2 = int(target_l)
    elif case == 3:
        j2 = int(np.argmin(out)) + 1
        if j2 == j1:
            # All entries equal; any other label is equally minimal.
            j2 = 1 if j1 != 1 else 2
    else:
        raise ConfigError("case must be 1, 2, or 3")
    return ConfidenceInterval(l1=j1, l2=j2, epsilon=epsilon)


def kl_from_uniform(out: np.ndarray) -> float:
    """KL divergence from the uniform distribution to the output vector."""
    m = out.shape[0]
    clamped = np.maximum(out, PROB_FLOOR)
    return float(-np.log(m * clamped).sum() / m)


def eval_uncertainty(expr: UncertaintyUniform, out) -> float:
    return expr.evaluate(out)


def eval_uncertainty_ref(expr: UncertaintyReference, out) -> float:
    return expr.evaluate(out)


def eval_reachability(expr: Reachability, out) -> float:
    return expr.evaluate(out)


class RiskCategory(Enum):
    NO_ERROR = "no_error"
    ADVERSARIAL_EXAMPLE = "adversarial_example"
    UNCERTAINTY_EXAMPLE = "uncertainty_example"
    INVARIANT_EXAMPLE = "invariant_example"


@dataclass(frozen=True)
class RiskClass:
    category: RiskCategory
    network_labels: tuple[int, int]  # (l(x), l(x_hat))
    oracle_labels: tuple[int, int]   # (O(x), O(x_hat)), user-supplied


def classify_risk(lx: LabelDecision, lxhat: LabelDecision,
                  ox: int, oxhat: int) -> RiskClass:
    """Place a perturbed input into the risk taxonomy.

    Requires a legitimate center: the network and oracle agree on x with a
    non-zero label.  Rows are indexed by the network's decision on x_hat,
    columns by the oracle's.
    """
    if lx.label == 0 or ox != lx.label:
        raise ContractError(
            "legitimate input required: network and oracle must agree on x "
            f"with a non-zero label (got l(x)={lx.label}, O(x)={ox})")
    lh, oh = lxhat.label, oxhat
    if lh == 0:
        cat = (RiskCategory.NO_ERROR if oh == 0
               else RiskCategory.UNCERTAINTY_EXAMPLE)
    elif lh == lx.label:
        if oh == 0:
            cat = RiskCategory.ADVERSARIAL_EXAMPLE
        elif oh == ox:
            cat = RiskCategory.NO_ERROR
        else:
            cat = RiskCategory.INVARIANT_EXAMPLE
    else:
        cat = (RiskCategory.NO_ERROR if (oh != 0 and oh != ox)
               else RiskCategory.ADVERSARIAL_EXAMPLE)
    return RiskClass(category=cat,
                     network_labels=(lx.label, lh),
                     oracle_labels=(ox, oh))
