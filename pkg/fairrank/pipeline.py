"""The seven ranking strategies: models, attribute use and re-ranking."""

from dataclasses import dataclass
import enum
import logging
from typing import Dict, List, Optional, Tuple

from .detconstsort import det_const_sort
from .detconstsort import target_from_observed
from .domain import Dataset
from .domain import Ranking
from .listwise import AttributeMode
from .listwise import LinearRanker
from .listwise import score
from .utils import UnresolvedGroupError

logger = logging.getLogger(__name__)


class TrainingAttr(enum.Enum):
    NONE = 'none'
    GROUND_TRUTH = 'ground_truth'


class TestingAttr(enum.Enum):
    NONE = 'none'
    INFERRED = 'inferred'
    HIDDEN = 'hidden'


class RerankAttr(enum.Enum):
    NONE = 'none'
    INFERRED = 'inferred'


class ModelKind(enum.Enum):
    OBLIVIOUS = 'oblivious'
    WITH_ATTR = 'with_attr'
    FAIR = 'fair'


# Name -> (training, testing, re-ranking) attribute use, in table order.
STRATEGY_TABLE: Dict[str, Tuple[TrainingAttr, TestingAttr, RerankAttr]] = {
    'Oblivious': (TrainingAttr.NONE, TestingAttr.NONE, RerankAttr.NONE),
    'LTR': (TrainingAttr.GROUND_TRUTH, TestingAttr.INFERRED, RerankAttr.NONE),
    'Hidden': (TrainingAttr.GROUND_TRUTH, TestingAttr.HIDDEN, RerankAttr.NONE),
    'FairLTR': (TrainingAttr.GROUND_TRUTH, TestingAttr.INFERRED,
                RerankAttr.NONE),
    'Oblivious+FairRR': (TrainingAttr.NONE, TestingAttr.NONE,
                         RerankAttr.INFERRED),
    'LTR+FairRR': (TrainingAttr.GROUND_TRUTH, TestingAttr.INFERRED,
                   RerankAttr.INFERRED),
    'Hidden+FairRR': (TrainingAttr.GROUND_TRUTH, TestingAttr.HIDDEN,
                      RerankAttr.INFERRED),
}

FAIR_MODEL_STRATEGY = 'FairLTR'

_TESTING_MODES = {
    TestingAttr.NONE: None,
    TestingAttr.INFERRED: AttributeMode.INFERRED,
    TestingAttr.HIDDEN: AttributeMode.HIDDEN,
}


@dataclass(frozen=True)
class StrategySpec:
    """One row of the strategy table; other combinations are rejected."""

    name: str
    training_attr: TrainingAttr
    testing_attr: TestingAttr
    rerank_attr: RerankAttr

    def __post_init__(self):
        self._validate()

    def _validate(self) -> None:
        row = STRATEGY_TABLE.get(self.name)
        if row is None:
            raise ValueError(f'Unknown strategy "{self.name}", expected one'
                             f' of {", ".join(STRATEGY_TABLE)}')
        if row != (self.training_attr, self.testing_attr, self.rerank_attr):
            raise ValueError(
                f'Strategy "{self.name}" uses attributes'
                f' {[a.value for a in row]}')

    @property
    def model_kind(self) -> ModelKind:
        if self.name == FAIR_MODEL_STRATEGY:
            return ModelKind.FAIR
        if self.training_attr is TrainingAttr.NONE:
            return ModelKind.OBLIVIOUS
        return ModelKind.WITH_ATTR

    @property
    def fairness_aware(self) -> bool:
        return (self.model_kind is ModelKind.FAIR
                or self.rerank_attr is RerankAttr.INFERRED)

    @property
    def reads_observed_labels(self) -> bool:
        return (self.testing_attr is TestingAttr.INFERRED
                or self.rerank_attr is RerankAttr.INFERRED)


class UnstableStrategySpec(StrategySpec):
    """Any attribute combination, for research outside the strategy table."""

    def _validate(self) -> None:
        if self.training_attr is TrainingAttr.NONE and (
                self.testing_attr is not TestingAttr.NONE):
            raise ValueError('A model trained without the attribute cannot'
                             ' read it at test time')


@dataclass(frozen=True)
class StrategyModels:
    oblivious: Optional[LinearRanker] = None
    with_attr: Optional[LinearRanker] = None
    fair: Optional[LinearRanker] = None

    def for_kind(self, kind: ModelKind) -> LinearRanker:
        model = getattr(self, kind.value)
        if model is None:
            raise ValueError(f'No {kind.value} model was provided')
        return model


def all_strategies() -> List[StrategySpec]:
    return [StrategySpec(name, *row) for name, row in STRATEGY_TABLE.items()]


def strategy_by_name(name: str) -> StrategySpec:
    if name not in STRATEGY_TABLE:
        raise ValueError(f'Unknown strategy "{name}"')
    return StrategySpec(name, *STRATEGY_TABLE[name])


def run_strategy_stages(
        spec: StrategySpec,
        models: StrategyModels,
        test: Dataset,
        ) -> Tuple[Ranking, Ranking]:
    """Return the scoring-stage ranking and the final ranking.

    Both stages read the same observed labels of `test`.

    """
    if spec.reads_observed_labels and test.has_unknowns():
        raise UnresolvedGroupError(
            f'{spec.name} needs resolved observed labels')
    model = models.for_kind(spec.model_kind)
    mode = _TESTING_MODES[spec.testing_attr]
    if mode is None and model.uses_attribute:
        raise ValueError(f'{spec.name} needs a model without the attribute')
    if mode is not None and not model.uses_attribute:
        raise ValueError(f'{spec.name} needs a model with the attribute')
    scored = score(model, test, mode or AttributeMode.TRUE)
    if spec.rerank_attr is RerankAttr.NONE:
        return scored, scored
    final = det_const_sort(scored, test.observed_groups(),
                           target_from_observed(test), len(test))
    return scored, final


def run_strategy(
        spec: StrategySpec,
        models: StrategyModels,
        test: Dataset,
        ) -> Ranking:
    """Rank a test set with one strategy."""
    return run_strategy_stages(spec, models, test)[1]
