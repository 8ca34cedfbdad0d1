"""Linear scorer trained with the ListNet top-one cross-entropy."""

from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import field
import enum
import json
import logging
import math
from pathlib import Path
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from scipy.special import log_softmax
from scipy.special import softmax

from .domain import Dataset
from .domain import Ranking
from .domain import rank_by_score
from .ingest import NormalizationStats
from .utils import DataError
from .utils import TrainingError
from .utils import UnresolvedGroupError

logger = logging.getLogger(__name__)

# Name of the protected-attribute column appended to the features.
ATTRIBUTE_FEATURE = 'protected_attribute'

# Hint for a top-one probability vector: nonnegative, sums to 1.
TopOneDistribution = np.ndarray

# Hint for a loss and its gradient as functions of the weights.
Objective = Callable[[np.ndarray], float]
Gradient = Callable[[np.ndarray], np.ndarray]


class AttributeMode(enum.Enum):
    TRUE = 'true'
    INFERRED = 'inferred'
    HIDDEN = 'hidden'


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 0.05
    epochs: int = 500
    max_halvings: int = 30

    def __post_init__(self):
        if not self.learning_rate > 0.0:
            raise ValueError(
                f'learning_rate must be positive, got {self.learning_rate}')
        if self.epochs < 0:
            raise ValueError(f'epochs must be nonnegative, got {self.epochs}')
        if self.max_halvings < 0:
            raise ValueError(
                f'max_halvings must be nonnegative, got {self.max_halvings}')


@dataclass(frozen=True, eq=False)
class LinearRanker:
    """Trained weights, one per feature name.

    When `uses_attribute` is set the last feature is the protected
    attribute (1 for disadvantaged, 0 for advantaged).

    """

    feature_names: Tuple[str, ...]
    weights: np.ndarray
    uses_attribute: bool
    config: TrainingConfig = TrainingConfig()
    loss_trace: Tuple[float, ...] = ()
    normalization: Optional[NormalizationStats] = None
    gamma: float = 0.0
    gamma_trace: Tuple[dict, ...] = field(default_factory=tuple)

    def __post_init__(self):
        weights = np.array(self.weights, dtype=np.float64)
        weights.setflags(write=False)
        object.__setattr__(self, 'weights', weights)
        object.__setattr__(self, 'feature_names', tuple(self.feature_names))
        object.__setattr__(self, 'loss_trace',
                           tuple(float(v) for v in self.loss_trace))
        if len(weights) != len(self.feature_names):
            raise ValueError('One weight per feature is required')
        if self.uses_attribute and self.feature_names[-1] != ATTRIBUTE_FEATURE:
            raise ValueError(
                f'The last feature must be "{ATTRIBUTE_FEATURE}"')
        if not all(math.isfinite(v) for v in self.loss_trace):
            raise TrainingError('The loss trace holds non-finite values')

    @property
    def attribute_weight(self) -> float:
        """Coefficient of the protected attribute, 0 without one."""
        return float(self.weights[-1]) if self.uses_attribute else 0.0

    @property
    def base_features(self) -> Tuple[str, ...]:
        if self.uses_attribute:
            return self.feature_names[:-1]
        return self.feature_names

    def coefficients(self) -> dict:
        return {name: float(w)
                for name, w in zip(self.feature_names, self.weights)}

    def to_json(self) -> dict:
        return {
            'feature_names': list(self.feature_names),
            'weights': [float(w) for w in self.weights],
            'uses_attribute': self.uses_attribute,
            'normalization': (None if self.normalization is None
                              else self.normalization.to_dict()),
            'config': asdict(self.config),
            'loss_trace': list(self.loss_trace),
            'gamma': self.gamma,
            'gamma_trace': list(self.gamma_trace),
        }

    @classmethod
    def from_json(cls, data: dict) -> 'LinearRanker':
        normalization = data.get('normalization')
        return cls(
            feature_names=tuple(data['feature_names']),
            weights=np.array(data['weights'], dtype=np.float64),
            uses_attribute=bool(data['uses_attribute']),
            config=TrainingConfig(**data['config']),
            loss_trace=tuple(data['loss_trace']),
            normalization=(None if normalization is None
                           else NormalizationStats.from_dict(normalization)),
            gamma=float(data.get('gamma', 0.0)),
            gamma_trace=tuple(data.get('gamma_trace', ())),
        )


def save_model(model: LinearRanker, filename: Union[Path, str]) -> None:
    path = Path(filename)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(model.to_json(), indent=2, sort_keys=True))


def load_model(filename: Union[Path, str]) -> LinearRanker:
    return LinearRanker.from_json(json.loads(Path(filename).read_text()))


def top_one(scores: np.ndarray) -> TopOneDistribution:
    """Probability of each item to be ranked first (softmax)."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError('Cannot compute the top-one distribution of nothing')
    if not np.all(np.isfinite(scores)):
        raise DataError('Scores must be finite')
    return softmax(scores)


def listnet_loss(predicted: np.ndarray, target: np.ndarray) -> float:
    """Cross-entropy between the top-one distributions of target and scores."""
    predicted = np.asarray(predicted, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if predicted.shape != target.shape:
        raise ValueError(
            f'Length mismatch: {predicted.shape} scores, {target.shape} targets')
    if predicted.size < 2:
        raise ValueError('A list needs at least two items')
    return float(-np.dot(top_one(target), log_softmax(predicted)))


def check_dimensions(weights, features, judgments) -> None:
    if features.ndim != 2:
        raise ValueError('features must be a matrix')
    if features.shape[1] != weights.shape[0]:
        raise ValueError(
            f'{features.shape[1]} feature columns for {weights.shape[0]}'
            ' weights')
    if features.shape[0] != judgments.shape[0]:
        raise ValueError(
            f'{features.shape[0]} rows for {judgments.shape[0]} judgments')


def listnet_gradient(
        weights: np.ndarray,
        features: np.ndarray,
        judgments: np.ndarray,
        ) -> np.ndarray:
    """Gradient of listnet_loss(features @ weights, judgments)."""
    weights = np.asarray(weights, dtype=np.float64)
    features = np.asarray(features, dtype=np.float64)
    judgments = np.asarray(judgments, dtype=np.float64)
    check_dimensions(weights, features, judgments)
    residual = top_one(features @ weights) - top_one(judgments)
    return features.T @ residual


def gradient_descent(
        loss: Objective,
        gradient: Gradient,
        dimension: int,
        list_length: int,
        config: TrainingConfig,
        ) -> Tuple[np.ndarray, List[float]]:
    """Full-batch descent from zero weights with per-epoch step halving.

    The step is `learning_rate * list_length * gradient`. Each epoch halves
    it until the loss does not increase; when no halving helps the weights
    are kept. Returns the weights and the loss trace (initial loss first).

    """
    weights = np.zeros(dimension, dtype=np.float64)
    current = loss(weights)
    if not math.isfinite(current):
        raise TrainingError('Initial loss is not finite')
    trace = [current]
    halvings = 0
    for epoch in range(config.epochs):
        direction = gradient(weights)
        step = config.learning_rate * list_length
        candidate_loss = math.nan
        for attempt in range(config.max_halvings + 1):
            candidate = weights - step * direction
            candidate_loss = loss(candidate)
            if math.isfinite(candidate_loss) and candidate_loss <= current:
                weights, current = candidate, candidate_loss
                break
            step /= 2.0
            halvings += 1
            logger.debug(f'Epoch {epoch}: halving the step to {step:.3g}')
        else:
            if not math.isfinite(candidate_loss):
                raise TrainingError(
                    f'Loss diverged at epoch {epoch} after'
                    f' {config.max_halvings} step halvings; use a smaller'
                    ' learning_rate')
        trace.append(current)
    logger.debug(f'Gradient descent: {config.epochs} epochs,'
                 f' {halvings} halvings, final loss {current:.6g}')
    return weights, trace


def training_arrays(
        train_set: Dataset,
        use_attribute: bool,
        ) -> Tuple[np.ndarray, np.ndarray]:
    """Design matrix (ground-truth attribute) and targets of a training set."""
    mode = AttributeMode.TRUE if use_attribute else None
    return design_matrix(train_set, mode), train_set.targets()


def feature_names_for(dataset: Dataset, use_attribute: bool) -> Tuple[str, ...]:
    names = tuple(dataset.feature_names)
    return names + (ATTRIBUTE_FEATURE,) if use_attribute else names


def train(
        train_set: Dataset,
        config: TrainingConfig = TrainingConfig(),
        use_attribute: bool = True,
        normalization: Optional[NormalizationStats] = None,
        ) -> LinearRanker:
    """Fit a linear scorer with ListNet on the whole training list."""
    features, targets = training_arrays(train_set, use_attribute)
    logger.info(f'Training ListNet on {len(train_set)} candidates,'
                f' {features.shape[1]} features, {config.epochs} epochs')
    weights, trace = gradient_descent(
        lambda w: listnet_loss(features @ w, targets),
        lambda w: listnet_gradient(w, features, targets),
        features.shape[1], len(train_set), config)
    logger.info(f'ListNet loss {trace[0]:.6g} -> {trace[-1]:.6g}')
    return LinearRanker(
        feature_names=feature_names_for(train_set, use_attribute),
        weights=weights,
        uses_attribute=use_attribute,
        config=config,
        loss_trace=tuple(trace),
        normalization=normalization,
    )


def design_matrix(
        dataset: Dataset,
        attribute_mode: Optional[AttributeMode],
        ) -> np.ndarray:
    """Features, with the protected-attribute column when a mode is given."""
    matrix = dataset.feature_matrix()
    if attribute_mode is None:
        return matrix
    if attribute_mode is AttributeMode.HIDDEN:
        column = np.ones(len(dataset))
    elif attribute_mode is AttributeMode.TRUE:
        column = np.array([c.true_group.encoding for c in dataset.candidates])
    else:
        unknown = [c.id for c in dataset.candidates
                   if c.observed_group is None]
        if unknown:
            raise UnresolvedGroupError(
                f'{len(unknown)} candidate(s) have Unknown observed groups,'
                f' e.g. {unknown[:5]}; resolve them before scoring')
        column = np.array([c.observed_group.encoding
                           for c in dataset.candidates])
    return np.column_stack([matrix, column])


def predict(
        model: LinearRanker,
        candidates: Dataset,
        attribute_mode: AttributeMode = AttributeMode.TRUE,
        ) -> np.ndarray:
    """Model scores in candidate order."""
    if tuple(candidates.feature_names) != model.base_features:
        raise ValueError(
            f'Model features {model.base_features} do not match dataset'
            f' features {tuple(candidates.feature_names)}')
    mode = attribute_mode if model.uses_attribute else None
    return design_matrix(candidates, mode) @ model.weights


def score(
        model: LinearRanker,
        candidates: Dataset,
        attribute_mode: AttributeMode = AttributeMode.TRUE,
        ) -> Ranking:
    """Rank candidates by model score.

    Parameters
    ----------
    - model: the trained scorer.
    - candidates: the dataset to rank.
    - attribute_mode: where the protected-attribute column comes from;
        ignored by models trained without it.

    """
    scores = predict(model, candidates, attribute_mode)
    return rank_by_score(zip(candidates.ids, scores))
