import math

import numpy as np
import pytest

from fairrank.domain import GroupLabel
from fairrank.listwise import ATTRIBUTE_FEATURE
from fairrank.listwise import AttributeMode
from fairrank.listwise import LinearRanker
from fairrank.listwise import TrainingConfig
from fairrank.listwise import design_matrix
from fairrank.listwise import gradient_descent
from fairrank.listwise import listnet_gradient
from fairrank.listwise import listnet_loss
from fairrank.listwise import load_model
from fairrank.listwise import predict
from fairrank.listwise import save_model
from fairrank.listwise import score
from fairrank.listwise import top_one
from fairrank.listwise import train
from fairrank.utils import DataError
from fairrank.utils import TrainingError
from fairrank.utils import UnresolvedGroupError

DIS = GroupLabel.DISADVANTAGED
ADV = GroupLabel.ADVANTAGED

H = 1e-6


def numeric_gradient(f, w):
    gradient = np.zeros_like(w)
    for j in range(len(w)):
        step = np.zeros_like(w)
        step[j] = H
        gradient[j] = (f(w + step) - f(w - step)) / (2 * H)
    return gradient


def relative_error(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b),
                                       1.0)


def test_top_one():
    p = top_one(np.array([0.0, 0.0, 0.0, 0.0]))
    assert np.allclose(p, 0.25)
    p = top_one(np.array([1000.0, 0.0]))
    assert np.isfinite(p).all() and p[0] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        top_one(np.array([]))
    with pytest.raises(DataError):
        top_one(np.array([1.0, math.nan]))


def test_listnet_loss_of_uniform_scores_is_log_n():
    target = np.array([3.0, 1.0, 2.0, 0.5, 0.0])
    assert listnet_loss(np.zeros(5), target) == pytest.approx(math.log(5))


def test_listnet_loss_is_minimal_at_target():
    target = np.array([0.2, 1.0, 0.7])
    at_target = listnet_loss(target, target)
    assert at_target < listnet_loss(np.zeros(3), target)
    assert at_target < listnet_loss(target[::-1], target)


def test_listnet_loss_contracts():
    with pytest.raises(ValueError):
        listnet_loss(np.zeros(1), np.zeros(1))
    with pytest.raises(ValueError):
        listnet_loss(np.zeros(2), np.zeros(3))


def test_listnet_gradient_matches_finite_differences():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        n = int(rng.integers(2, 21))
        d = int(rng.integers(1, 9))
        features = rng.normal(size=(n, d))
        judgments = rng.normal(size=n)
        w = rng.normal(size=d)
        analytic = listnet_gradient(w, features, judgments)
        numeric = numeric_gradient(
            lambda v: listnet_loss(features @ v, judgments), w)
        assert relative_error(analytic, numeric) < 1e-5


def test_listnet_gradient_dimension_checks():
    with pytest.raises(ValueError):
        listnet_gradient(np.zeros(2), np.zeros((3, 3)), np.zeros(3))
    with pytest.raises(ValueError):
        listnet_gradient(np.zeros(3), np.zeros((3, 3)), np.zeros(4))


def test_gradient_descent_trace_does_not_increase(small_dataset):
    model = train(small_dataset, TrainingConfig(epochs=50))
    trace = model.loss_trace
    assert len(trace) == 51
    assert trace[0] == pytest.approx(math.log(10))
    assert all(b <= a for a, b in zip(trace, trace[1:]))
    assert trace[-1] < trace[0]


def test_gradient_descent_raises_on_divergence():
    def loss(w):
        return 1.0 if not w.any() else math.nan

    with pytest.raises(TrainingError, match='learning_rate'):
        gradient_descent(loss, lambda w: np.ones_like(w), 2, 10,
                         TrainingConfig(epochs=1, max_halvings=3))


def test_gradient_descent_keeps_weights_without_progress():
    weights, trace = gradient_descent(lambda w: float(np.dot(w, w)),
                                      lambda w: -np.ones_like(w), 2, 5,
                                      TrainingConfig(epochs=3, max_halvings=2))
    assert np.array_equal(weights, np.zeros(2))
    assert trace == [0.0, 0.0, 0.0, 0.0]


def test_training_config_validation():
    with pytest.raises(ValueError):
        TrainingConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        TrainingConfig(epochs=-1)


def test_trained_model_ranks_by_the_informative_feature(small_dataset):
    model = train(small_dataset, TrainingConfig(epochs=200),
                  use_attribute=False)
    assert model.feature_names == ('f0', 'f1')
    assert model.weights[0] > 0.0
    ranking = score(model, small_dataset)
    assert ranking.order == tuple(range(1, 11))


def test_model_with_attribute(small_dataset):
    model = train(small_dataset, TrainingConfig(epochs=20))
    assert model.uses_attribute
    assert model.feature_names[-1] == ATTRIBUTE_FEATURE
    assert model.base_features == ('f0', 'f1')
    assert model.attribute_weight == model.weights[-1]
    assert set(model.coefficients()) == {'f0', 'f1', ATTRIBUTE_FEATURE}


def test_weights_are_read_only(small_dataset):
    model = train(small_dataset, TrainingConfig(epochs=5))
    with pytest.raises(ValueError):
        model.weights[0] = 1.0


def test_model_json_round_trip(small_dataset, tmp_path):
    model = train(small_dataset, TrainingConfig(epochs=10))
    save_model(model, tmp_path / 'model.json')
    loaded = load_model(tmp_path / 'model.json')
    assert loaded.feature_names == model.feature_names
    assert np.array_equal(loaded.weights, model.weights)
    assert loaded.loss_trace == model.loss_trace
    assert loaded.config == model.config
    assert np.array_equal(predict(loaded, small_dataset),
                          predict(model, small_dataset))


def test_design_matrix_modes(make_dataset):
    dataset = make_dataset([3.0, 2.0, 1.0], [DIS, ADV, DIS],
                           observed=[ADV, ADV, DIS])
    assert design_matrix(dataset, None).shape == (3, 2)
    assert list(design_matrix(dataset, AttributeMode.TRUE)[:, -1]) == [1, 0, 1]
    assert list(design_matrix(dataset, AttributeMode.INFERRED)[:, -1]) == [
        0, 0, 1]
    assert list(design_matrix(dataset, AttributeMode.HIDDEN)[:, -1]) == [
        1, 1, 1]


def test_inferred_mode_rejects_unknowns(make_dataset):
    dataset = make_dataset([3.0, 2.0, 1.0], [DIS, ADV, DIS],
                           observed=[None, ADV, DIS])
    with pytest.raises(UnresolvedGroupError):
        design_matrix(dataset, AttributeMode.INFERRED)


def test_predict_checks_features(small_dataset):
    model = LinearRanker(('a', 'b'), np.zeros(2), uses_attribute=False)
    with pytest.raises(ValueError):
        predict(model, small_dataset)


def test_score_ignores_mode_for_attribute_free_model(small_dataset):
    model = train(small_dataset, TrainingConfig(epochs=10),
                  use_attribute=False)
    assert (score(model, small_dataset, AttributeMode.HIDDEN)
            == score(model, small_dataset, AttributeMode.TRUE))


def test_top_one_closed_forms():
    assert np.allclose(top_one(np.array([math.log(2.0), 0.0])),
                       [2.0 / 3.0, 1.0 / 3.0], rtol=0.0, atol=1e-15)
    rng = np.random.default_rng(10)
    for _ in range(50):
        scores = rng.normal(size=10) * 3.0
        direct = np.exp(scores) / np.exp(scores).sum()
        assert np.max(np.abs(top_one(scores) - direct)) < 1e-12


def test_listnet_loss_against_explicit_sums():
    predicted = [0.3, -1.2, 2.0, 0.0, 0.7]
    target = [1.0, 0.2, 0.5, -0.4, 0.9]

    def softmax(values):
        exps = [math.exp(v) for v in values]
        return [e / sum(exps) for e in exps]

    expected = -sum(t * math.log(p) for t, p in zip(softmax(target),
                                                    softmax(predicted)))
    assert listnet_loss(np.array(predicted), np.array(target)) == pytest.approx(
        expected, rel=1e-12)


def test_listnet_loss_shift_and_entropy_bound():
    rng = np.random.default_rng(3)
    for _ in range(100):
        n = int(rng.integers(2, 30))
        predicted = rng.normal(size=n)
        target = rng.normal(size=n)
        loss = listnet_loss(predicted, target)
        assert listnet_loss(predicted + rng.normal() * 10.0,
                            target) == pytest.approx(loss, abs=1e-12)
        p = top_one(target)
        entropy = -float(np.dot(p, np.log(p)))
        assert loss >= entropy - 1e-12
        assert listnet_loss(target, target) == pytest.approx(entropy, abs=1e-12)


def test_listnet_gradient_vanishes_at_the_target():
    rng = np.random.default_rng(8)
    judgments = rng.normal(size=7)
    features = np.column_stack([judgments, rng.normal(size=7)])
    gradient = listnet_gradient(np.array([1.0, 0.0]), features, judgments)
    assert np.allclose(gradient, 0.0, atol=1e-15)


def test_duplicated_row_contributes_twice():
    rng = np.random.default_rng(9)
    features = rng.normal(size=(6, 3))
    judgments = rng.normal(size=6)
    w = rng.normal(size=3)
    doubled_features = np.vstack([features, features[2]])
    doubled_judgments = np.append(judgments, judgments[2])
    residual = (top_one(doubled_features @ w) - top_one(doubled_judgments))
    contributions = residual[:, np.newaxis] * doubled_features
    assert residual[2] == pytest.approx(residual[6], abs=1e-15)
    expected = contributions[:6].sum(axis=0) + contributions[2]
    assert np.allclose(
        listnet_gradient(w, doubled_features, doubled_judgments), expected,
        rtol=0.0, atol=1e-12)


def test_zero_epochs_keep_zero_weights(make_dataset):
    dataset = make_dataset([1.0, 5.0, 3.0, 4.0], [ADV, DIS, ADV, DIS])
    model = train(dataset, TrainingConfig(epochs=0))
    assert np.array_equal(model.weights, np.zeros(3))
    assert len(model.loss_trace) == 1
    assert model.loss_trace[0] == pytest.approx(math.log(4))
    assert score(model, dataset).order == (1, 2, 3, 4)


def test_flipped_labels_move_scores_by_the_attribute_weight(make_dataset):
    rng = np.random.default_rng(12)
    flipped = [True, False, True, False, False, True]
    groups = [DIS, ADV, ADV, DIS, ADV, DIS]
    observed = [g.mirror if f else g for g, f in zip(groups, flipped)]
    dataset = make_dataset(list(rng.normal(size=6)), groups,
                           observed=observed)
    for _ in range(20):
        model = LinearRanker(('f0', 'f1', ATTRIBUTE_FEATURE),
                             rng.normal(size=3), uses_attribute=True)
        moved = np.abs(predict(model, dataset, AttributeMode.INFERRED)
                       - predict(model, dataset, AttributeMode.TRUE))
        expected = [abs(model.attribute_weight) if f else 0.0
                    for f in flipped]
        assert np.allclose(moved, expected, rtol=0.0, atol=1e-12)
