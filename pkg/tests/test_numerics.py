import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twobody.errors import ArgumentError, ContractError, DimensionError, EvaluationError
from twobody.numerics import Rng, Tape, activation, finite_difference_check, matmul_batched, ops, uniform


def loop_matmul(a, b):
    B = max(a.shape[0], b.shape[0])
    M, K = a.shape[1:]
    N = b.shape[2]
    out = np.zeros((B, M, N))
    for i in range(B):
        ai = a[i if a.shape[0] > 1 else 0]
        bi = b[i if b.shape[0] > 1 else 0]
        for m in range(M):
            for n in range(N):
                s = 0.0
                for k in range(K):
                    s += ai[m, k] * bi[k, n]
                out[i, m, n] = s
    return out


def test_matmul_identity_and_projector():
    b = np.array([[[1.0, 2.0], [3.0, 4.0]]])
    assert np.array_equal(matmul_batched(np.eye(2)[None], b), b)
    p = np.array([[[1.0, 0.0], [0.0, 0.0]]])
    out = matmul_batched(p, np.array([[[5.0, 6.0], [7.0, 8.0]]]))
    assert np.array_equal(out, [[[5.0, 6.0], [0.0, 0.0]]])


def test_matmul_random_against_loops(rng):
    a, b = rng.normal(size=(2, 3, 4)), rng.normal(size=(2, 4, 2))
    assert np.abs(matmul_batched(a, b) - loop_matmul(a, b)).max() < 1e-12


@given(
    st.integers(1, 8), st.integers(1, 8), st.integers(1, 8), st.integers(1, 8),
    st.sampled_from(["same", "a1", "b1"]), st.integers(0, 2**31 - 1),
)
def test_matmul_property(B, M, K, N, bcast, seed):
    g = np.random.default_rng(seed)
    a = g.uniform(-10, 10, (1 if bcast == "a1" else B, M, K))
    b = g.uniform(-10, 10, (1 if bcast == "b1" else B, K, N))
    assert np.abs(matmul_batched(a, b) - loop_matmul(a, b)).max() < 1e-12


def test_matmul_errors_name_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3, 4\).*\(2, 5, 2\)"):
        matmul_batched(np.zeros((2, 3, 4)), np.zeros((2, 5, 2)))
    with pytest.raises(DimensionError):
        matmul_batched(np.zeros((2, 3, 4)), np.zeros((3, 4, 2)))
    with pytest.raises(DimensionError):
        matmul_batched(np.zeros((3, 4)), np.zeros((4, 2)))


def test_activation_examples():
    assert np.array_equal(activation(np.array([-1.0, 0.0, 2.0]), "relu"), [0.0, 0.0, 2.0])
    assert np.array_equal(activation(np.array([0.0]), "tanh"), [0.0])
    assert np.array_equal(activation(np.array([-10.0]), "leaky_relu", 0.2), [-2.0])
    with pytest.raises(ArgumentError):
        activation(np.zeros(2), "gelu")
    with pytest.raises(ArgumentError):
        activation(np.zeros(2), "leaky_relu", 1.5)


def test_uniform_moments_and_determinism():
    x = uniform(Rng(3), -1.0, 1.0, (100_000,))
    assert abs(x.mean()) < 0.02
    assert abs(x.var() - 1.0 / 3.0) < 0.02
    assert np.array_equal(x, uniform(Rng(3), -1.0, 1.0, (100_000,)))
    eps = 1e-9
    y = uniform(Rng(0), 0.0, eps, (1000,))
    assert y.min() >= 0.0 and y.max() < eps
    with pytest.raises(ArgumentError):
        uniform(Rng(0), 1.0, 1.0, (3,))


def test_rng_streams_differ():
    a = Rng(1).normal(1.0, (100,))
    assert not np.array_equal(a, Rng(2).normal(1.0, (100,)))
    assert not np.array_equal(a, Rng(1, stream=1).normal(1.0, (100,)))
    assert np.array_equal(Rng(1).spawn(4).normal(1.0, (5,)), Rng(1).spawn(4).normal(1.0, (5,)))


def test_backward_simple_losses(rng):
    p = rng.normal(size=(3, 4))
    tape = Tape()
    node = tape.parameter("p", p)
    assert np.array_equal(tape.backward(ops.reduce_sum(node))["p"], np.ones((3, 4)))
    tape = Tape()
    node = tape.parameter("p", p)
    sq = ops.reduce_sum(ops.matmul(ops.reshape(node, (1, 12)), ops.reshape(node, (12, 1)))) * 0.5
    assert np.allclose(tape.backward(sq)["p"], p, atol=1e-14)


def test_backward_contracts():
    tape = Tape()
    p = tape.parameter("p", np.ones(3))
    q = tape.parameter("q", np.ones(2))
    with pytest.raises(ContractError):
        tape.backward(p)
    grads = tape.backward(ops.reduce_sum(p))
    assert np.array_equal(grads["q"], np.zeros(2))
    with pytest.raises(ContractError):
        tape.parameter("p", np.ones(1))
    with pytest.raises(ContractError):
        Tape().backward(ops.reduce_sum(p))
    with pytest.raises(ContractError):
        ops.add(p, Tape().parameter("z", np.ones(3)))
    with pytest.raises(ContractError):
        p * np.ones(3)


def test_fd_check_examples(rng):
    p = {"p": rng.normal(size=(4, 5))}
    assert finite_difference_check(lambda q: ops.reduce_sum(q["p"]), p) < 1e-10
    assert finite_difference_check(lambda q: ops.reduce_sum(activation(q["p"], "tanh")), p) < 1e-7
    with pytest.raises(EvaluationError):
        finite_difference_check(lambda q: ops.reduce_sum(q["p"]) * np.inf, p)
    with pytest.raises(ArgumentError):
        finite_difference_check(lambda q: ops.reduce_sum(q["p"]), p, eps=0.0)


def _composite(kind):
    def f(q):
        a, b = q["a"], q["b"]
        if kind == "matmul_bcast":
            return ops.reduce_sum(activation(ops.matmul(a, b), "tanh"))
        if kind == "softmax":
            return ops.reduce_sum(ops.matmul(ops.softmax(ops.matmul(a, b)), ops.transpose(b)))
        if kind == "norm":
            return ops.reduce_mean(ops.norm(ops.sub(ops.matmul(a, b), 0.3)))
        if kind == "leaky":
            return ops.reduce_sum(activation(ops.add(ops.matmul(a, b), -0.1), "leaky_relu", 0.3))
        if kind == "transpose":
            return ops.reduce_mean(ops.transpose(ops.matmul(a, b), (1, 0, 2)) * 3.0)
        raise AssertionError(kind)

    return f


@pytest.mark.parametrize("kind", ["matmul_bcast", "softmax", "norm", "leaky", "transpose"])
def test_primitive_gradients(kind, rng):
    params = {"a": rng.normal(size=(2, 3, 4)), "b": rng.normal(size=(4, 4))}
    assert finite_difference_check(_composite(kind), params) < 1e-7


def test_matmul_gradient_with_2d_left_operand(rng):
    params = {"a": rng.normal(size=(3, 3)), "b": rng.normal(size=(2, 3, 5))}
    f = lambda q: ops.reduce_sum(activation(ops.matmul(q["a"], q["b"]), "tanh"))
    assert finite_difference_check(f, params) < 1e-7


def test_norm_subgradient_at_zero():
    tape = Tape()
    p = tape.parameter("p", np.zeros((2, 3)))
    assert np.array_equal(tape.backward(ops.reduce_sum(ops.norm(p)))["p"], np.zeros((2, 3)))


def test_plain_arrays_stay_arrays(rng):
    a = rng.normal(size=(3, 3))
    out = ops.softmax(ops.matmul(a, a))
    assert isinstance(out, np.ndarray)
    assert np.allclose(out.sum(axis=-1), 1.0, atol=1e-12)
