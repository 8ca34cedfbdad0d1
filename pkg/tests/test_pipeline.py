from dataclasses import replace

import pytest

from fairrank import pipeline
from fairrank.detconstsort import target_from_observed
from fairrank.detconstsort import violations
from fairrank.domain import GroupLabel
from fairrank.listwise import AttributeMode
from fairrank.listwise import TrainingConfig
from fairrank.listwise import score
from fairrank.listwise import train
from fairrank.noise import Direction
from fairrank.noise import NoiseScenario
from fairrank.noise import perturb
from fairrank.pipeline import ModelKind
from fairrank.pipeline import RerankAttr
from fairrank.pipeline import StrategyModels
from fairrank.pipeline import StrategySpec
from fairrank.pipeline import TrainingAttr
from fairrank.pipeline import UnstableStrategySpec
from fairrank.pipeline import all_strategies
from fairrank.pipeline import run_strategy
from fairrank.pipeline import run_strategy_stages
from fairrank.pipeline import strategy_by_name
from fairrank.utils import UnresolvedGroupError

DIS = GroupLabel.DISADVANTAGED
ADV = GroupLabel.ADVANTAGED


@pytest.fixture
def models(small_dataset):
    config = TrainingConfig(epochs=30)
    with_attr = train(small_dataset, config, use_attribute=True)
    return StrategyModels(
        oblivious=train(small_dataset, config, use_attribute=False),
        with_attr=with_attr,
        fair=with_attr,
    )


def test_strategy_table():
    names = [s.name for s in all_strategies()]
    assert names == ['Oblivious', 'LTR', 'Hidden', 'FairLTR',
                     'Oblivious+FairRR', 'LTR+FairRR', 'Hidden+FairRR']
    aware = [s.name for s in all_strategies() if s.fairness_aware]
    assert aware == ['FairLTR', 'Oblivious+FairRR', 'LTR+FairRR',
                     'Hidden+FairRR']
    assert strategy_by_name('FairLTR').model_kind is ModelKind.FAIR
    assert strategy_by_name('Hidden').model_kind is ModelKind.WITH_ATTR
    assert strategy_by_name('Oblivious+FairRR').model_kind is (
        ModelKind.OBLIVIOUS)
    assert not strategy_by_name('Hidden').reads_observed_labels
    assert strategy_by_name('Hidden+FairRR').reads_observed_labels


def test_invalid_combinations_are_rejected():
    with pytest.raises(ValueError):
        StrategySpec('LTR', TrainingAttr.NONE, pipeline.TestingAttr.INFERRED,
                     RerankAttr.NONE)
    with pytest.raises(ValueError):
        StrategySpec('Custom', TrainingAttr.NONE, pipeline.TestingAttr.NONE,
                     RerankAttr.NONE)
    with pytest.raises(ValueError):
        strategy_by_name('Custom')
    custom = UnstableStrategySpec('Custom', TrainingAttr.GROUND_TRUTH,
                                  pipeline.TestingAttr.HIDDEN, RerankAttr.NONE)
    assert custom.model_kind is ModelKind.WITH_ATTR
    with pytest.raises(ValueError):
        UnstableStrategySpec('Custom', TrainingAttr.NONE,
                             pipeline.TestingAttr.INFERRED, RerankAttr.NONE)


def test_ltr_reads_observed_labels(models, small_dataset):
    ltr = strategy_by_name('LTR')
    assert run_strategy(ltr, models, small_dataset) == score(
        models.with_attr, small_dataset, AttributeMode.TRUE)


def test_hidden_ignores_observed_labels(models, small_dataset):
    noisy = perturb(small_dataset,
                    NoiseScenario(Direction.BIDIRECTIONAL, 0.5, seed=3))
    assert noisy != small_dataset
    hidden = strategy_by_name('Hidden')
    assert (run_strategy(hidden, models, noisy)
            == run_strategy(hidden, models, small_dataset))


@pytest.mark.parametrize('name', ['Oblivious+FairRR', 'LTR+FairRR',
                                  'Hidden+FairRR'])
def test_rerankers_meet_observed_floors(models, small_dataset, name):
    noisy = perturb(small_dataset,
                    NoiseScenario(Direction.ADV_TO_DIS, 0.3, seed=1))
    scored, final = run_strategy_stages(strategy_by_name(name), models, noisy)
    assert sorted(final.order) == sorted(scored.order)
    assert violations(final, noisy.observed_groups(),
                      target_from_observed(noisy)) == []


@pytest.mark.parametrize('name', ['Oblivious', 'LTR', 'Hidden', 'FairLTR'])
def test_unaware_stage_is_final(models, small_dataset, name):
    scored, final = run_strategy_stages(strategy_by_name(name), models,
                                        small_dataset)
    assert scored == final


@pytest.mark.parametrize('name', ['Oblivious+FairRR', 'Hidden+FairRR'])
def test_reranking_is_label_swap_invariant(models, small_dataset, name):
    swapped = small_dataset.with_candidates(
        replace(c, observed_group=c.observed_group.mirror)
        for c in small_dataset.candidates)
    spec = strategy_by_name(name)
    assert (run_strategy(spec, models, swapped)
            == run_strategy(spec, models, small_dataset))


def test_unknown_labels_are_rejected(models, small_dataset):
    unresolved = small_dataset.with_candidates(
        replace(c, observed_group=None) if c.id == 1 else c
        for c in small_dataset.candidates)
    with pytest.raises(UnresolvedGroupError):
        run_strategy(strategy_by_name('LTR+FairRR'), models, unresolved)
    # Oblivious and Hidden do not read observed labels.
    run_strategy(strategy_by_name('Oblivious'), models, unresolved)
    run_strategy(strategy_by_name('Hidden'), models, unresolved)


def test_missing_or_mismatched_model(models, small_dataset):
    with pytest.raises(ValueError, match='fair'):
        run_strategy(strategy_by_name('FairLTR'),
                     StrategyModels(oblivious=models.oblivious), small_dataset)
    wrong = StrategyModels(oblivious=models.with_attr,
                           with_attr=models.oblivious)
    with pytest.raises(ValueError):
        run_strategy(strategy_by_name('Oblivious'), wrong, small_dataset)
    with pytest.raises(ValueError):
        run_strategy(strategy_by_name('LTR'), wrong, small_dataset)
