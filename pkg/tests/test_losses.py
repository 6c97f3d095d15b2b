import numpy as np
import pytest

from kim.losses import LossError, balanced_class_weights, compute_loss


def test_mse_zero_at_fit():
    pred = np.array([[1.0, 2.0], [3.0, 4.0]])
    loss, grad = compute_loss("mse", pred, pred.copy())
    assert loss == 0.0
    np.testing.assert_array_equal(grad, np.zeros_like(pred))


def test_mse_mean_over_samples_and_dims():
    pred = np.array([[1.0, 2.0]])
    targ = np.array([[0.0, 0.0]])
    loss, grad = compute_loss("mse", pred, targ)
    assert loss == pytest.approx((1 + 4) / 2)
    np.testing.assert_allclose(grad, [[1.0, 2.0]])  # 2·diff / size


def test_uniform_softmax_oracle():
    # ln 4 per sample for all-zero logits
    logits = np.zeros((4, 4))
    targets = np.arange(4)
    w = balanced_class_weights(targets, 4)
    np.testing.assert_array_equal(w, np.ones(4))
    loss, _ = compute_loss("cross_entropy_balanced", logits, targets, w)
    assert loss == pytest.approx(np.log(4), abs=1e-12)


def test_balanced_equals_unweighted_on_even_counts():
    rng = np.random.default_rng(0)
    logits = rng.normal(size=(8, 2))
    targets = np.array([0, 1] * 4)
    w = balanced_class_weights(targets, 2)
    loss, _ = compute_loss("cross_entropy_balanced", logits, targets, w)
    z = logits - logits.max(axis=1, keepdims=True)
    nll = np.log(np.exp(z).sum(axis=1)) - z[np.arange(8), targets]
    assert loss == pytest.approx(nll.mean())


def test_balanced_weights_formula():
    targets = np.array([0, 0, 0, 1])
    w = balanced_class_weights(targets, 2)
    np.testing.assert_allclose(w, [4 / 6, 2.0])


def test_missing_class_is_an_error():
    targets = np.array([0, 0, 2])
    with pytest.raises(LossError, match="1"):
        balanced_class_weights(targets, 3)


def test_empty_batch_is_an_error():
    with pytest.raises(LossError):
        compute_loss("mse", np.zeros((0, 2)), np.zeros((0, 2)))
    with pytest.raises(LossError):
        compute_loss("cross_entropy_balanced", np.zeros((0, 3)),
                     np.zeros(0, dtype=int))


def test_cross_entropy_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    logits = rng.normal(size=(6, 4))
    targets = rng.integers(0, 4, size=6)
    targets[:4] = np.arange(4)  # every class present
    w = balanced_class_weights(targets, 4)
    _, grad = compute_loss("cross_entropy_balanced", logits, targets, w)
    eps = 1e-6
    for i in (0, 3, 5):
        for j in range(4):
            up, dn = logits.copy(), logits.copy()
            up[i, j] += eps
            dn[i, j] -= eps
            lu, _ = compute_loss("cross_entropy_balanced", up, targets, w)
            ld, _ = compute_loss("cross_entropy_balanced", dn, targets, w)
            assert grad[i, j] == pytest.approx((lu - ld) / (2 * eps), abs=1e-8)


def test_mse_gradient_matches_finite_differences():
    rng = np.random.default_rng(4)
    pred = rng.normal(size=(3, 2))
    targ = rng.normal(size=(3, 2))
    _, grad = compute_loss("mse", pred, targ)
    eps = 1e-6
    up = pred.copy()
    up[1, 1] += eps
    dn = pred.copy()
    dn[1, 1] -= eps
    lu, _ = compute_loss("mse", up, targ)
    ld, _ = compute_loss("mse", dn, targ)
    assert grad[1, 1] == pytest.approx((lu - ld) / (2 * eps), abs=1e-9)


def test_large_logits_are_stable():
    logits = np.array([[1000.0, 0.0], [0.0, 1000.0]])
    targets = np.array([0, 1])
    loss, grad = compute_loss("cross_entropy_balanced", logits, targets,
                              balanced_class_weights(targets, 2))
    assert np.isfinite(loss) and np.all(np.isfinite(grad))
    assert loss == pytest.approx(0.0, abs=1e-12)
