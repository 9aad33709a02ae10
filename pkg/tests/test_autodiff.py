import numpy as np
import pytest

from psg4d.autodiff import Tensor, concat, gelu, mean, no_grad, pad2d, sigmoid, softmax, stack


def _numeric_grad(fn, value, h=1e-6):
    grad = np.zeros_like(value)
    flat = value.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + h
        up = fn(value)
        flat[i] = saved - h
        down = fn(value)
        flat[i] = saved
        out[i] = (up - down) / (2 * h)
    return grad


@pytest.mark.parametrize("build", [
    lambda x: (x * x).sum(),
    lambda x: (x * 3.0 + 1.5).sum(),
    lambda x: (x / (x * x + 2.0)).sum(),
    lambda x: x.exp().sum(),
    lambda x: (x * x + 1.0).log().sum(),
    lambda x: x.tanh().sum(),
    lambda x: (x ** 3.0).mean(),
    lambda x: softmax(x, axis=-1).sum(axis=0).log().sum(),
    lambda x: sigmoid(x).sum(),
    lambda x: gelu(x).sum(),
    lambda x: mean(x, axis=0).sum(),
    lambda x: x.reshape(-1).sum(),
    lambda x: x[1:, :2].sum(),
    lambda x: x.clip(-0.5, 0.5).sum(),
])
def test_elementwise_gradients(build):
    rng = np.random.default_rng(0)
    value = rng.normal(size=(3, 4))

    t = Tensor(value)
    out = build(t)
    out.backward()

    def f(v):
        with no_grad():
            return build(Tensor(v)).item()

    numeric = _numeric_grad(f, value.copy())
    inside = np.abs(np.abs(value) - 0.5) > 1e-3  # keep clear of the clip kink
    assert np.allclose(t.grad[inside], numeric[inside], rtol=1e-5, atol=1e-7)


def test_matmul_gradients():
    rng = np.random.default_rng(1)
    a_value = rng.normal(size=(2, 3, 4))
    b_value = rng.normal(size=(4, 5))
    a, b = Tensor(a_value), Tensor(b_value)
    ((a @ b) ** 2.0).sum().backward()

    def f_a(v):
        with no_grad():
            return ((Tensor(v) @ Tensor(b_value)) ** 2.0).sum().item()

    def f_b(v):
        with no_grad():
            return ((Tensor(a_value) @ Tensor(v)) ** 2.0).sum().item()

    assert np.allclose(a.grad, _numeric_grad(f_a, a_value.copy()), rtol=1e-5, atol=1e-7)
    assert np.allclose(b.grad, _numeric_grad(f_b, b_value.copy()), rtol=1e-5, atol=1e-7)


def test_broadcast_add_gradients():
    rng = np.random.default_rng(2)
    a_value = rng.normal(size=(3, 4))
    b_value = rng.normal(size=(4,))
    a, b = Tensor(a_value), Tensor(b_value)
    ((a + b) * (a + b)).sum().backward()
    assert b.grad.shape == (4,)
    assert np.allclose(b.grad, (2 * (a_value + b_value)).sum(axis=0))


def test_concat_stack_pad_gradients():
    rng = np.random.default_rng(3)
    xs = [Tensor(rng.normal(size=(2, 3))) for _ in range(3)]
    concat(xs, axis=1).sum().backward()
    for x in xs:
        assert np.allclose(x.grad, np.ones((2, 3)))

    ys = [Tensor(rng.normal(size=(4,))) for _ in range(2)]
    (stack(ys) * 2.0).sum().backward()
    for y in ys:
        assert np.allclose(y.grad, 2.0)

    z = Tensor(rng.normal(size=(2, 2, 3)))
    pad2d(z, 1).sum().backward()
    assert np.allclose(z.grad, np.ones((2, 2, 3)))


def test_reused_node_accumulates():
    x = Tensor(3.0)
    y = x * x + x * x
    y.backward()
    assert x.grad == pytest.approx(12.0)


def test_softmax_handles_minus_inf():
    scores = np.array([[0.0, -np.inf], [1.0, 2.0]])
    out = softmax(Tensor(scores))
    assert out.data[0, 1] == 0.0
    assert out.data[0, 0] == 1.0
    out.sum().backward()  # must not produce NaNs
    assert np.all(np.isfinite(out.data))


def test_no_grad_skips_graph():
    with no_grad():
        t = Tensor(np.ones(3)) * 2.0
    assert t._parents == ()
    assert t._backward is None


def test_backward_requires_scalar():
    with pytest.raises(ValueError):
        Tensor(np.ones(3)).backward()


def test_numpy_does_not_hijack_operators():
    arr = np.ones((2, 2))
    t = Tensor(np.ones((2, 2)))
    left = arr * t
    right = t * arr
    assert isinstance(left, Tensor)
    assert isinstance(right, Tensor)
    assert np.array_equal(left.data, right.data)
