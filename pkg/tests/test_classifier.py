import numpy as np
import pytest

from frameal.classifier import (
    Model,
    TrainConfig,
    TrainingDivergedError,
    cross_entropy_loss,
    entropy,
    evaluate_accuracy,
    loss_gradient,
    model_from_dict,
    model_to_dict,
    predict_proba,
    predict_proba_batch,
    softmax,
    train,
    train_with_history,
)
from frameal.dataset import VideoSample


# ---------------------------------------------------------------------------
# softmax and prediction


def test_softmax_uniform_for_zero_logits():
    p = softmax(np.zeros(4))
    assert np.allclose(p, 0.25)


def test_softmax_equal_logits_two_classes():
    assert np.allclose(softmax(np.array([3.7, 3.7])), [0.5, 0.5])


def test_softmax_closed_form_value():
    # exp(ln 3) = 3, so the probabilities are 3/4 and 1/4
    p = softmax(np.array([np.log(3.0), 0.0]))
    assert np.allclose(p, [0.75, 0.25], atol=1e-12)


def test_softmax_is_shift_invariant_and_stable():
    logits = np.array([1e3, 1e3 + 1.0])
    p = softmax(logits)
    assert np.all(np.isfinite(p))
    assert np.allclose(p, softmax(logits - 1e3))


def test_zero_model_predicts_uniform():
    m = Model(weights=np.zeros((3, 2)), biases=np.zeros(3))
    assert np.allclose(predict_proba(m, np.array([5.0, -2.0])), 1 / 3)


def test_predict_proba_rejects_wrong_dim():
    m = Model(weights=np.zeros((3, 2)), biases=np.zeros(3))
    with pytest.raises(ValueError, match="dimension"):
        predict_proba(m, np.zeros(3))
    with pytest.raises(ValueError, match="dimension"):
        predict_proba_batch(m, np.zeros((4, 3)))


def test_predict_proba_batch_matches_single():
    rng = np.random.default_rng(0)
    m = Model(weights=rng.normal(size=(3, 4)), biases=rng.normal(size=3))
    xs = rng.normal(size=(5, 4))
    batch = predict_proba_batch(m, xs)
    for i, x in enumerate(xs):
        assert np.allclose(batch[i], predict_proba(m, x))


# ---------------------------------------------------------------------------
# entropy


def test_entropy_uniform_hits_upper_bound():
    assert entropy(np.full(5, 0.2)) == pytest.approx(np.log(5), abs=1e-12)
    assert entropy(np.array([0.5, 0.5])) == pytest.approx(np.log(2), abs=1e-12)


def test_entropy_one_hot_is_zero():
    assert entropy(np.array([0.0, 1.0, 0.0])) == 0.0


def test_entropy_rejects_invalid_distributions():
    with pytest.raises(ValueError):
        entropy(np.array([0.7, 0.4]))  # sums to 1.1
    with pytest.raises(ValueError):
        entropy(np.array([-0.1, 1.1]))
    with pytest.raises(ValueError):
        entropy(np.ones((2, 2)) / 4)


def test_entropy_tolerates_tiny_sum_error():
    assert entropy(np.array([0.5, 0.5 + 5e-7])) > 0


# ---------------------------------------------------------------------------
# loss and gradient


def numeric_gradient(weights, biases, features, labels, l2, step=1e-5):
    """Central-difference gradient, the independent check on the analytic one."""
    grad_w = np.zeros_like(weights)
    for idx in np.ndindex(weights.shape):
        bumped = weights.copy()
        bumped[idx] += step
        up = cross_entropy_loss(bumped, biases, features, labels, l2)
        bumped[idx] -= 2 * step
        down = cross_entropy_loss(bumped, biases, features, labels, l2)
        grad_w[idx] = (up - down) / (2 * step)
    grad_b = np.zeros_like(biases)
    for i in range(biases.size):
        bumped = biases.copy()
        bumped[i] += step
        up = cross_entropy_loss(weights, bumped, features, labels, l2)
        bumped[i] -= 2 * step
        down = cross_entropy_loss(weights, bumped, features, labels, l2)
        grad_b[i] = (up - down) / (2 * step)
    return grad_w, grad_b


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(5)
    weights = rng.normal(size=(3, 4))
    biases = rng.normal(size=3)
    features = rng.normal(size=(8, 4))
    labels = rng.integers(0, 3, size=8)
    for l2 in (0.0, 0.05):
        grad_w, grad_b = loss_gradient(weights, biases, features, labels, l2)
        num_w, num_b = numeric_gradient(weights, biases, features, labels, l2)
        assert np.abs(grad_w - num_w).max() / max(np.abs(num_w).max(), 1e-12) < 1e-4
        assert np.abs(grad_b - num_b).max() / max(np.abs(num_b).max(), 1e-12) < 1e-4


def test_l2_penalizes_weights_not_biases():
    weights = np.ones((2, 2))
    biases = np.ones(2)
    features = np.zeros((1, 2))
    labels = np.array([0])
    base = cross_entropy_loss(weights, biases, features, labels, 0.0)
    penalized = cross_entropy_loss(weights, biases, features, labels, 0.1)
    assert penalized == pytest.approx(base + 0.1 * 4.0)


# ---------------------------------------------------------------------------
# training


def separable_data():
    features = np.array([[2.0, 0.1], [1.8, -0.2], [-2.1, 0.3], [-1.9, 0.0]])
    labels = np.array([0, 0, 1, 1])
    return features, labels


def test_training_reduces_loss_monotonically_at_small_rate():
    features, labels = separable_data()
    _, losses = train_with_history(features, labels, TrainConfig(learning_rate=0.05, epochs=50))
    assert losses.shape == (51,)
    assert losses[0] == pytest.approx(np.log(2))  # zero init is the uniform model
    assert np.all(np.diff(losses) <= 1e-12)
    assert losses[-1] < losses[0]


def test_training_is_deterministic():
    features, labels = separable_data()
    cfg = TrainConfig(learning_rate=0.1, epochs=30)
    a = train(features, labels, cfg)
    b = train(features, labels, cfg)
    assert np.array_equal(a.weights, b.weights)
    assert np.array_equal(a.biases, b.biases)


def test_training_diverges_with_absurd_rate():
    # weight decay factor 1 - 2*lr*l2 = -199 blows the weights up exponentially
    rng = np.random.default_rng(0)
    features = rng.normal(size=(6, 3))
    labels = rng.integers(0, 3, size=6)
    with np.errstate(over="ignore"), pytest.raises(TrainingDivergedError, match="epoch"):
        train(features, labels, TrainConfig(learning_rate=10.0, epochs=300, l2=10.0))


def test_training_warns_on_missing_class():
    features, labels = separable_data()
    with pytest.warns(UserWarning, match="no examples"):
        train(features, labels, TrainConfig(epochs=1), num_classes=3)


def test_training_validates_inputs():
    features, labels = separable_data()
    with pytest.raises(ValueError):
        train(features[:2], labels, TrainConfig(epochs=1))
    with pytest.raises(ValueError):
        train(features, np.array([0, 0, 1, 5]), TrainConfig(epochs=1), num_classes=2)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(l2=-0.1)


# ---------------------------------------------------------------------------
# model container


def test_model_round_trips_exactly():
    rng = np.random.default_rng(3)
    m = Model(weights=rng.normal(size=(4, 6)), biases=rng.normal(size=4))
    again = model_from_dict(model_to_dict(m))
    assert np.array_equal(m.weights, again.weights)
    assert np.array_equal(m.biases, again.biases)


def test_model_from_dict_rejects_unknown_version():
    record = model_to_dict(Model(weights=np.zeros((2, 2)), biases=np.zeros(2)))
    record["format_version"] = 9
    with pytest.raises(ValueError, match="format version"):
        model_from_dict(record)


def test_model_validates_shapes_and_values():
    with pytest.raises(ValueError):
        Model(weights=np.zeros((2, 2)), biases=np.zeros(3))
    with pytest.raises(ValueError):
        Model(weights=np.full((2, 2), np.nan), biases=np.zeros(2))


# ---------------------------------------------------------------------------
# evaluation


def test_evaluate_accuracy_hand_case():
    # weights make class 0 win iff the first feature is positive
    m = Model(weights=np.array([[1.0, 0.0], [-1.0, 0.0]]), biases=np.zeros(2))
    videos = [
        VideoSample(id="a", frames=np.array([[2.0, 0.0]]), label=0),
        VideoSample(id="b", frames=np.array([[-2.0, 0.0]]), label=1),
        VideoSample(id="c", frames=np.array([[3.0, 1.0]]), label=1),  # misclassified
    ]
    assert evaluate_accuracy(m, videos) == pytest.approx(2 / 3)


def test_evaluate_accuracy_breaks_argmax_ties_low():
    m = Model(weights=np.zeros((3, 2)), biases=np.zeros(3))  # uniform everywhere
    videos = [
        VideoSample(id="a", frames=np.array([[1.0, 1.0]]), label=0),
        VideoSample(id="b", frames=np.array([[1.0, 1.0]]), label=2),
    ]
    assert evaluate_accuracy(m, videos) == pytest.approx(0.5)


def test_evaluate_accuracy_rejects_empty_pool():
    m = Model(weights=np.zeros((2, 2)), biases=np.zeros(2))
    with pytest.raises(ValueError):
        evaluate_accuracy(m, [])
