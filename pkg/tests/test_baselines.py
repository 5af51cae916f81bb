import numpy as np
import pytest

from oracles import central_difference, max_relative_error
from spatialgnn import baselines
from spatialgnn.baselines import CnnConfig, CnnModel, MlpConfig, MlpModel
from spatialgnn.errors import ValidationError
from spatialgnn.tensor import softmax_rows


def tiny_samples(rng, n=7, d=5, c=3):
    x = rng.normal(size=(n, d))
    y = rng.integers(0, c, size=n)
    mask = rng.uniform(size=n) < 0.8
    mask[0] = True
    return x, y, mask


def mlp_loss_fn(cfg, x, y, mask):
    def f(params):
        return baselines.cross_entropy(
            baselines.mlp_forward(MlpModel(params=params, config=cfg), x), y, np.flatnonzero(mask)
        )

    return f


def cnn_loss_fn(cfg, x, y, mask):
    def f(params):
        return baselines.cross_entropy(
            baselines.cnn_forward(CnnModel(params=params, config=cfg), x), y, np.flatnonzero(mask)
        )

    return f


def test_mlp_forward_matches_manual():
    rng = np.random.default_rng(0)
    m = baselines.mlp_init(MlpConfig(layer_dims=(4, 5, 3), seed=1))
    for p in m.params[1::2]:
        p += rng.normal(size=p.shape)
    x = rng.normal(size=(6, 4))
    w0, b0, w1, b1 = m.params
    expected = softmax_rows(np.maximum(x @ w0 + b0, 0) @ w1 + b1)
    np.testing.assert_allclose(baselines.mlp_forward(m, x), expected, atol=1e-14)


def test_mlp_gradients_match_finite_differences():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(20):
        cfg = MlpConfig(layer_dims=(5, int(rng.integers(2, 6)), int(rng.integers(2, 6)), 3),
                        seed=int(rng.integers(0, 2**31)))
        m = baselines.mlp_init(cfg)
        for p in m.params[1::2]:
            p += 0.1 * rng.normal(size=p.shape)
        x, y, mask = tiny_samples(rng)
        analytic = baselines.mlp_backward(m, x, y, mask)
        numeric = central_difference(mlp_loss_fn(cfg, x, y, mask), [p.copy() for p in m.params])
        worst = max(worst, max_relative_error(analytic, numeric))
    assert worst < 1e-4


def test_cnn_gradients_match_finite_differences():
    rng = np.random.default_rng(12)
    worst = 0.0
    for _ in range(20):
        cfg = CnnConfig(input_len=5, kernel_size=int(rng.choice([1, 3, 5])), channels=int(rng.integers(1, 4)),
                        dense_dims=(int(rng.integers(2, 5)), 3), seed=int(rng.integers(0, 2**31)))
        m = baselines.cnn_init(cfg)
        # zero biases put dead-conv samples exactly on a ReLU kink
        for p in m.params[1::2]:
            p += 0.1 * rng.normal(size=p.shape)
        x, y, mask = tiny_samples(rng)
        analytic = baselines.cnn_backward(m, x, y, mask)
        numeric = central_difference(cnn_loss_fn(cfg, x, y, mask), [p.copy() for p in m.params])
        worst = max(worst, max_relative_error(analytic, numeric))
    assert worst < 1e-4


def test_cnn_identity_filter_reduces_to_mlp():
    rng = np.random.default_rng(3)
    cfg = CnnConfig(input_len=6, kernel_size=1, channels=1, dense_dims=(5, 3), seed=2)
    cnn = baselines.cnn_init(cfg)
    cnn.params[0][:] = 1.0
    cnn.params[1][:] = 0.0
    mlp = MlpModel(params=[p.copy() for p in cnn.params[2:]], config=MlpConfig(layer_dims=(6, 5, 3)))
    # inputs are non-negative so the conv ReLU is the identity
    x = np.abs(rng.normal(size=(9, 6)))
    np.testing.assert_array_equal(baselines.cnn_forward(cnn, x), baselines.mlp_forward(mlp, x))


def test_cnn_config_validation():
    with pytest.raises(ValidationError, match="exceeds input length"):
        CnnConfig(input_len=3, kernel_size=5)
    with pytest.raises(ValidationError, match="odd"):
        CnnConfig(input_len=8, kernel_size=2)


def blobs(seed=0):
    rng = np.random.default_rng(seed)
    y = np.repeat([0, 1], 30)
    x = np.array([[-3.0, -3.0], [3.0, 3.0]])[y] + rng.normal(0, 0.5, size=(60, 2))
    x = np.hstack([x, rng.normal(size=(60, 2))])
    idx = rng.permutation(60)
    masks = {k: np.zeros(60, dtype=bool) for k in ("train", "val", "test")}
    masks["train"][idx[:36]] = True
    masks["val"][idx[36:48]] = True
    masks["test"][idx[48:]] = True
    return x, y, masks


def test_mlp_learns_separable_blobs():
    x, y, masks = blobs()
    cfg = MlpConfig(layer_dims=(4, 32, 32, 2), learning_rate=0.01, max_epochs=500, seed=0)
    model, trace = baselines.mlp_train(x, y, masks, cfg)
    pred, _ = baselines.baseline_predict(model, x[masks["test"]])
    assert np.mean(pred == y[masks["test"]]) == 1.0
    assert trace.loss[-1] < trace.loss[0]


def test_cnn_learns_separable_blobs():
    x, y, masks = blobs(1)
    cfg = CnnConfig(input_len=4, kernel_size=3, channels=4, dense_dims=(16, 2), learning_rate=0.01,
                    max_epochs=500, seed=0)
    model, _ = baselines.cnn_train(x, y, masks, cfg)
    pred, _ = baselines.baseline_predict(model, x[masks["test"]])
    assert np.mean(pred == y[masks["test"]]) == 1.0


def test_zero_learning_rate_and_determinism():
    x, y, masks = blobs()
    cfg = MlpConfig(layer_dims=(4, 8, 2), learning_rate=0.0, max_epochs=10, seed=4)
    m0 = baselines.mlp_init(cfg)
    m1, _ = baselines.mlp_train(x, y, masks, cfg, model=m0)
    assert all(np.array_equal(a, b) for a, b in zip(m0.params, m1.params))

    ccfg = CnnConfig(input_len=4, learning_rate=0.05, max_epochs=50, dense_dims=(8, 2), seed=4)
    _, t1 = baselines.cnn_train(x, y, masks, ccfg)
    _, t2 = baselines.cnn_train(x, y, masks, ccfg)
    assert t1.to_csv() == t2.to_csv()
    mcfg = MlpConfig(layer_dims=(4, 8, 2), learning_rate=0.05, max_epochs=50, seed=4)
    _, t3 = baselines.mlp_train(x, y, masks, mcfg)
    _, t4 = baselines.mlp_train(x, y, masks, mcfg)
    assert t3.to_csv() == t4.to_csv()


def test_baseline_predict_rules():
    m = MlpModel(params=[np.zeros((2, 3)), np.zeros((1, 3))], config=MlpConfig(layer_dims=(2, 3)))
    labels, probs = baselines.baseline_predict(m, np.ones((5, 2)))
    assert labels.tolist() == [0] * 5 and probs.shape == (5, 3)
    m.params[1][0, 2] = 50.0
    labels, _ = baselines.baseline_predict(m, np.ones((1, 2)))
    assert labels.tolist() == [2]
    with pytest.raises(ValidationError):
        baselines.baseline_predict(object(), np.ones((1, 2)))


def test_prediction_permutation_equivariant():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(12, 8))
    perm = rng.permutation(12)
    for model in (baselines.mlp_init(MlpConfig(seed=1)), baselines.cnn_init(CnnConfig(seed=1))):
        labels, probs = baselines.baseline_predict(model, x)
        lp, pp = baselines.baseline_predict(model, x[perm])
        assert np.array_equal(lp, labels[perm])
        np.testing.assert_allclose(pp, probs[perm], atol=1e-15)
