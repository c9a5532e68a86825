import numpy as np
import pytest

from selora.adapter import AdapterConfig, Schema, dropout_mask, forward, init_adapter
from selora.autograd import (
    GradientBundle,
    backward,
    backward_input,
    finite_difference_check,
    half_squared_norm,
    numerical_gradient,
    squared_error,
    zero_loss,
)
from selora.errors import InvalidDimensionError

SCHEMAS = [Schema.LORA, Schema.DORA, Schema.HIRA, Schema.MASKED_LORA]
TOL = {Schema.LORA: 1e-6, Schema.MASKED_LORA: 1e-6, Schema.DORA: 1e-5, Schema.HIRA: 1e-5}


def instance(schema, basis, seed, r=4, d1=8, d2=6, eta=0.3, dropout=0.0):
    rng = np.random.default_rng(seed)
    cfg = AdapterConfig(in_dim=d2, out_dim=d1, rank=r, alpha=2.0 * r, sparse_ratio=eta,
                        basis=basis, schema=schema, dropout_rate=dropout, seed=seed)
    adapter = init_adapter(cfg, rng.standard_normal((d1, d2)) / np.sqrt(d2))
    theta = adapter.parameters()
    adapter.set_parameters(theta + 0.2 * rng.standard_normal(theta.size))
    X = rng.standard_normal((d2, 5))
    target = rng.standard_normal((d1, 5))
    return adapter, X, target


@pytest.mark.parametrize("schema", SCHEMAS)
@pytest.mark.parametrize("basis", ["fourier", "haar", "db4", "bior2.2", "coif1"])
@pytest.mark.parametrize("seed", [0, 1])
def test_gradient_matches_finite_differences(schema, basis, seed):
    adapter, X, target = instance(schema, basis, seed)
    assert finite_difference_check(adapter, X, squared_error(target)) <= TOL[schema]


@pytest.mark.parametrize("schema", [Schema.LORA, Schema.MASKED_LORA])
def test_gradient_with_fixed_dropout_mask(schema):
    adapter, X, target = instance(schema, "haar", 3, dropout=0.3)
    mask = dropout_mask(0.3, X.shape, np.random.default_rng(9))
    loss_fn = squared_error(target)

    def loss_at(theta):
        probe = adapter.copy()
        probe.set_parameters(theta)
        return loss_fn(forward(probe, X, training=True, mask=mask))[0]

    _, grad_Y = loss_fn(forward(adapter, X, training=True, mask=mask))
    analytic = backward(adapter, X, grad_Y, mask).flat()
    theta, eps = adapter.parameters(), 1e-5
    numeric = np.array([
        (loss_at(theta + eps * e) - loss_at(theta - eps * e)) / (2 * eps) for e in np.eye(theta.size)
    ])
    np.testing.assert_allclose(analytic, numeric, rtol=1e-6, atol=1e-9)


def test_fresh_lora_gradient_flows_only_to_b():
    """With F_B = 0 the A gradient vanishes; B receives signal."""
    cfg = AdapterConfig(in_dim=8, out_dim=8, rank=2, sparse_ratio=0.2, basis="fourier")
    adapter = init_adapter(cfg, np.eye(8))
    X = np.random.default_rng(0).standard_normal((8, 4))
    g = backward(adapter, X, np.ones((8, 4)))
    np.testing.assert_array_equal(g.grad_fa, 0.0)
    assert np.any(g.grad_fb != 0.0)


@pytest.mark.parametrize("schema", SCHEMAS)
def test_backward_input(schema):
    adapter, X, target = instance(schema, "fourier", 4)
    G = np.random.default_rng(5).standard_normal(target.shape)
    eps = 1e-6
    numeric = np.zeros_like(X)
    for idx in np.ndindex(X.shape):
        E = np.zeros_like(X)
        E[idx] = eps
        numeric[idx] = np.sum(G * (forward(adapter, X + E) - forward(adapter, X - E))) / (2 * eps)
    np.testing.assert_allclose(backward_input(adapter, G), numeric, rtol=1e-6, atol=1e-8)


def test_zero_loss_gives_zero_gradient():
    adapter, X, _ = instance(Schema.DORA, "haar", 0)
    assert np.all(backward(adapter, X, zero_loss(forward(adapter, X))[1]).flat() == 0.0)
    assert finite_difference_check(adapter, X, zero_loss) == 0.0


def test_losses():
    Y = np.array([[3.0, 4.0]])
    assert half_squared_norm(Y)[0] == 12.5
    loss, grad = squared_error(np.zeros((1, 2)))(Y)
    assert loss == 6.25
    np.testing.assert_array_equal(grad, Y / 2)


def test_numerical_gradient_leaves_adapter_untouched():
    adapter, X, target = instance(Schema.LORA, "haar", 0)
    before = adapter.parameters()
    numerical_gradient(adapter, X, squared_error(target))
    np.testing.assert_array_equal(adapter.parameters(), before)


def test_bundle_add_and_flat():
    a = GradientBundle(np.ones(2), np.ones(3), np.ones(1))
    b = a + a
    np.testing.assert_array_equal(b.flat(), 2.0 * np.ones(6))
    assert GradientBundle(np.ones(2), np.ones(1)).flat().shape == (3,)


def test_shape_errors():
    adapter, X, target = instance(Schema.LORA, "haar", 0)
    with pytest.raises(InvalidDimensionError):
        backward(adapter, X, target[:, :2])
    with pytest.raises(InvalidDimensionError):
        backward(adapter, X[:3], target)
    with pytest.raises(ValueError):
        finite_difference_check(adapter, X, squared_error(target), epsilon=0.0)
