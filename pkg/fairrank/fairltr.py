"""Fairness-aware training: ListNet plus a disparate-exposure penalty.

The penalty is the squared one-sided gap between the mean top-one
probability of the advantaged group and that of the disadvantaged group,

    U = max(0, mean_adv P - mean_dis P) ** 2,

so only under-exposure of the disadvantaged group is penalized. Its
gradient with respect to the scores is 2 * gap * P * (a - gap), where a is
1 / |adv| on advantaged items and -1 / |dis| on disadvantaged ones.

"""

from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace
import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from .domain import Dataset
from .domain import GroupLabel
from .ingest import NormalizationStats
from .listwise import LinearRanker
from .listwise import TrainingConfig
from .listwise import check_dimensions
from .listwise import feature_names_for
from .listwise import gradient_descent
from .listwise import listnet_gradient
from .listwise import listnet_loss
from .listwise import top_one
from .listwise import train
from .listwise import training_arrays
from .utils import DataError

logger = logging.getLogger(__name__)

# Below this baseline penalty, fairness is considered already met.
_MIN_PENALTY = 1e-12


@dataclass(frozen=True)
class FairTrainingConfig:
    """Settings of fairness-aware training.

    Parameters
    ----------
    - gamma: penalty weight, None to select it automatically.
    - base: the gradient-descent settings shared with ListNet.
    - gamma_threshold: automatic selection doubles gamma while the trained
        penalty exceeds this fraction of the baseline penalty.
    - max_doublings: bound on the number of doublings.

    """

    gamma: Optional[float] = None
    base: TrainingConfig = TrainingConfig()
    gamma_threshold: float = 0.05
    max_doublings: int = 3

    def __post_init__(self):
        if self.gamma is not None and not self.gamma >= 0.0:
            raise ValueError(f'gamma must be nonnegative, got {self.gamma}')
        if not self.gamma_threshold >= 0.0:
            raise ValueError('gamma_threshold must be nonnegative')
        if self.max_doublings < 0:
            raise ValueError('max_doublings must be nonnegative')


@dataclass(frozen=True)
class GammaAttempt:
    gamma: float
    exposure_penalty: float
    loss: float

    def to_dict(self) -> dict:
        return {'gamma': self.gamma,
                'exposure_penalty': self.exposure_penalty,
                'loss': self.loss}


@dataclass(frozen=True)
class GammaSelection:
    """Trace of the automatic gamma search."""

    baseline_loss: float
    baseline_penalty: float
    attempts: Tuple[GammaAttempt, ...] = field(default_factory=tuple)

    @property
    def gamma(self) -> float:
        return self.attempts[-1].gamma if self.attempts else 0.0

    @property
    def doublings(self) -> int:
        return max(len(self.attempts) - 1, 0)

    def to_dict(self) -> dict:
        return {'baseline_loss': self.baseline_loss,
                'baseline_penalty': self.baseline_penalty,
                'gamma': self.gamma,
                'attempts': [a.to_dict() for a in self.attempts]}


def _signed_weights(groups: Sequence[GroupLabel]) -> np.ndarray:
    """1 / |adv| on advantaged items, -1 / |dis| on disadvantaged ones."""
    groups = list(groups)
    if any(g is None for g in groups):
        raise DataError('Exposure needs resolved group labels')
    dis = np.array([g is GroupLabel.DISADVANTAGED for g in groups], dtype=bool)
    n_dis = int(dis.sum())
    n_adv = len(dis) - n_dis
    if n_dis == 0 or n_adv == 0:
        raise DataError('Disparate exposure needs both groups present')
    return np.where(dis, -1.0 / n_dis, 1.0 / n_adv)


def exposure_gap(scores: np.ndarray, groups: Sequence[GroupLabel]) -> float:
    """Mean top-one probability of advantaged minus disadvantaged items."""
    return float(np.dot(_signed_weights(groups), top_one(scores)))


def disparate_exposure(scores: np.ndarray, groups: Sequence[GroupLabel]) -> float:
    """One-sided squared exposure gap, zero when g_dis is not under-exposed."""
    return max(0.0, exposure_gap(scores, groups)) ** 2


def deltr_loss(
        weights: np.ndarray,
        features: np.ndarray,
        judgments: np.ndarray,
        groups: Sequence[GroupLabel],
        gamma: float,
        ) -> float:
    """listnet_loss + gamma * disparate_exposure of the linear scores."""
    scores = np.asarray(features) @ np.asarray(weights)
    loss = listnet_loss(scores, judgments)
    if gamma == 0.0:
        return loss
    return loss + gamma * disparate_exposure(scores, groups)


def deltr_gradient(
        weights: np.ndarray,
        features: np.ndarray,
        judgments: np.ndarray,
        groups: Sequence[GroupLabel],
        gamma: float,
        ) -> np.ndarray:
    """Analytic gradient of deltr_loss; the kink takes the ListNet part."""
    gradient = listnet_gradient(weights, features, judgments)
    if gamma == 0.0:
        return gradient
    weights = np.asarray(weights, dtype=np.float64)
    features = np.asarray(features, dtype=np.float64)
    check_dimensions(weights, features, np.asarray(judgments))
    signed = _signed_weights(groups)
    probabilities = top_one(features @ weights)
    gap = float(np.dot(signed, probabilities))
    if gap <= 0.0:
        return gradient
    score_gradient = 2.0 * gap * probabilities * (signed - gap)
    return gradient + gamma * (features.T @ score_gradient)


def _true_groups(train_set: Dataset) -> list:
    return [c.true_group for c in train_set.candidates]


def baseline_values(train_set: Dataset, baseline: LinearRanker) -> Tuple[float, float]:
    """ListNet loss and exposure penalty of a gamma = 0 model."""
    features, targets = training_arrays(train_set, baseline.uses_attribute)
    scores = features @ baseline.weights
    return (listnet_loss(scores, targets),
            disparate_exposure(scores, _true_groups(train_set)))


def select_gamma(
        train_set: Dataset,
        config: FairTrainingConfig = FairTrainingConfig(),
        baseline: Optional[LinearRanker] = None,
        ) -> float:
    """Return config.gamma, or L0 / U0 at the ListNet optimum.

    Returns 0 when the baseline penalty is negligible.

    """
    if config.gamma is not None:
        return config.gamma
    if baseline is None:
        baseline = train(train_set, config.base, use_attribute=True)
    loss, penalty = baseline_values(train_set, baseline)
    if penalty < _MIN_PENALTY:
        return 0.0
    return loss / penalty


def train_fair(
        train_set: Dataset,
        config: FairTrainingConfig = FairTrainingConfig(),
        normalization: Optional[NormalizationStats] = None,
        ) -> LinearRanker:
    """Gradient descent on deltr_loss with ground-truth groups.

    A None gamma is resolved with `select_gamma` first.

    """
    gamma = select_gamma(train_set, config)
    features, targets = training_arrays(train_set, use_attribute=True)
    groups = _true_groups(train_set)
    logger.info(f'Training fair ListNet on {len(train_set)} candidates,'
                f' gamma {gamma:.6g}')
    weights, trace = gradient_descent(
        lambda w: deltr_loss(w, features, targets, groups, gamma),
        lambda w: deltr_gradient(w, features, targets, groups, gamma),
        features.shape[1], len(train_set), config.base)
    logger.info(f'Fair loss {trace[0]:.6g} -> {trace[-1]:.6g}')
    return LinearRanker(
        feature_names=feature_names_for(train_set, True),
        weights=weights,
        uses_attribute=True,
        config=config.base,
        loss_trace=tuple(trace),
        normalization=normalization,
        gamma=gamma,
    )


def fit_fair(
        train_set: Dataset,
        config: FairTrainingConfig = FairTrainingConfig(),
        baseline: Optional[LinearRanker] = None,
        normalization: Optional[NormalizationStats] = None,
        ) -> Tuple[LinearRanker, GammaSelection]:
    """Train with automatic gamma, doubling it while the penalty persists.

    Gamma starts at L0 / U0 and doubles while the trained penalty exceeds
    gamma_threshold * U0, at most max_doublings times. A gamma set in the
    config is used as is.

    """
    if baseline is None:
        baseline = train(train_set, config.base, use_attribute=True)
    base_loss, base_penalty = baseline_values(train_set, baseline)
    gamma = select_gamma(train_set, config, baseline)
    threshold = config.gamma_threshold * base_penalty
    groups = _true_groups(train_set)
    features, _ = training_arrays(train_set, use_attribute=True)
    doublings = config.max_doublings if config.gamma is None else 0
    attempts = []
    while True:
        model = train_fair(train_set, replace(config, gamma=gamma),
                           normalization)
        penalty = disparate_exposure(features @ model.weights, groups)
        attempts.append(GammaAttempt(gamma, penalty, model.loss_trace[-1]))
        if gamma == 0.0 or penalty <= threshold:
            break
        if len(attempts) > doublings:
            if doublings:
                logger.warning(
                    f'Exposure penalty {penalty:.3g} still above'
                    f' {threshold:.3g} after {doublings} doublings')
            break
        gamma *= 2.0
        logger.info(f'Penalty {penalty:.3g} above {threshold:.3g};'
                    f' doubling gamma to {gamma:.6g}')
    selection = GammaSelection(base_loss, base_penalty, tuple(attempts))
    model = replace(model, gamma_trace=tuple(a.to_dict() for a in attempts))
    return model, selection
