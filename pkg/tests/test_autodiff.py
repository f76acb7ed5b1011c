import numpy as np
import pytest

from plrn_grounding.autodiff import (LOG_FLOOR, Tape, Tensor, gradient_check, numerical_gradient,
                                     relative_error)
from plrn_grounding.errors import ConfigurationError, ContractError, DegenerateMaskError, ShapeError


def leaf(data):
    return Tensor(data, requires_grad=True)


def test_matmul_identity_and_projector():
    tape = Tape()
    out = tape.matmul(Tensor(np.eye(2)), Tensor([[1.0, 2.0], [3.0, 4.0]]))
    np.testing.assert_array_equal(out.data, [[1.0, 2.0], [3.0, 4.0]])
    out = tape.matmul(Tensor([[1.0, 0.0], [0.0, 0.0]]), Tensor([[5.0], [7.0]]))
    np.testing.assert_array_equal(out.data, [[5.0], [0.0]])


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\) x \(4,\)"):
        Tape().matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros(4)))


def test_matmul_gradient_matches_finite_differences(rng):
    A = leaf(rng.standard_normal((3, 3)))
    B = Tensor(rng.standard_normal((3, 3)))
    report = gradient_check(lambda tape: tape.sum(tape.matmul(A, B)), {"A": A}, tolerance=1e-6)
    assert report.passed
    np.testing.assert_allclose(A.grad, np.tile(B.data.sum(axis=1), (3, 1)))


def test_elementwise_primitives():
    tape = Tape()
    np.testing.assert_array_equal(tape.elementwise("relu", Tensor([-1.0, 0.0, 2.0])).data, [0.0, 0.0, 2.0])
    x = Tensor([1.5, -2.0, 3.0])
    np.testing.assert_array_equal(tape.elementwise("mul", x, Tensor(np.zeros(3))).data, np.zeros(3))
    with pytest.raises(ContractError):
        tape.elementwise("exp", x)


def test_tanh_derivative():
    x = leaf([0.5])
    tape = Tape()
    tape.backward(tape.sum(tape.tanh(x)))
    assert x.grad[0] == pytest.approx(0.78644, abs=1e-5)
    numeric = numerical_gradient(lambda: float(np.tanh(x.data).sum()), x.data)
    assert relative_error(x.grad, numeric) < 1e-8


def test_sigmoid_is_logistic():
    out = Tape().sigmoid(Tensor([-3.0, 0.0, 3.0]))
    np.testing.assert_allclose(out.data, 1.0 / (1.0 + np.exp([3.0, 0.0, -3.0])))


def test_softmax_uniform_and_stable():
    tape = Tape()
    np.testing.assert_allclose(tape.softmax(Tensor([0.0, 0.0, 0.0]), axis=0).data, [1 / 3] * 3)
    out = tape.softmax(Tensor([1000.0, 0.0]), axis=0)
    np.testing.assert_allclose(out.data, [1.0, 0.0], atol=1e-12)
    assert np.all(np.isfinite(out.data))


def test_softmax_jacobian_matches_finite_differences():
    x = leaf([0.3, -0.1, 0.7])
    weights = Tensor([0.2, -1.0, 0.5])
    report = gradient_check(lambda tape: tape.sum(tape.mul(weights, tape.softmax(x, axis=0))), {"x": x},
                            tolerance=1e-6)
    assert report.passed


def test_masked_softmax_gives_exact_zeros():
    out = Tape().softmax(Tensor([1.0, 2.0, 3.0]), axis=0, mask=np.array([True, True, False]))
    assert out.data[2] == 0.0
    assert out.data.sum() == pytest.approx(1.0)


def test_fully_masked_softmax_is_rejected():
    with pytest.raises(DegenerateMaskError):
        Tape().softmax(Tensor([1.0, 2.0]), axis=0, mask=np.array([False, False]))


def test_softmax_rows_of_matrix():
    scores = Tensor(np.arange(6.0).reshape(2, 3))
    mask = np.broadcast_to(np.array([True, False, True]), (2, 3))
    out = Tape().softmax(scores, axis=1, mask=mask)
    np.testing.assert_allclose(out.data.sum(axis=1), [1.0, 1.0])
    np.testing.assert_array_equal(out.data[:, 1], [0.0, 0.0])


def test_log_is_floored():
    tape = Tape()
    x = leaf([0.0, 1.0])
    y = tape.log(x)
    assert y.data[0] == pytest.approx(np.log(LOG_FLOOR))
    assert y.data[1] == 0.0
    tape.backward(tape.sum(y))
    np.testing.assert_array_equal(x.grad, [0.0, 1.0])


def test_smooth_l1_branches_and_slope():
    z = leaf([0.0, 0.5, 2.0, 1.0, -1.0, 0.3, 3.0])
    tape = Tape()
    y = tape.smooth_l1(z)
    np.testing.assert_allclose(y.data[:5], [0.0, 0.125, 1.5, 0.5, 0.5])
    tape.backward(tape.sum(y))
    assert z.grad[5] == pytest.approx(0.3)
    assert z.grad[6] == pytest.approx(1.0)


def test_conv1d_delta_kernel_is_identity(rng):
    x = Tensor(rng.standard_normal((3, 7)))
    kernels = np.zeros((3, 3, 5))
    for c in range(3):
        kernels[c, c, 2] = 1.0
    out = Tape().conv1d_same(x, Tensor(kernels))
    np.testing.assert_allclose(out.data, x.data)


def test_conv1d_zero_kernels(rng):
    out = Tape().conv1d_same(Tensor(rng.standard_normal((4, 8))), Tensor(np.zeros((2, 4, 3))))
    np.testing.assert_array_equal(out.data, np.zeros((2, 8)))


def test_conv1d_rejects_even_width():
    with pytest.raises(ConfigurationError):
        Tape().conv1d_same(Tensor(np.zeros((2, 5))), Tensor(np.zeros((2, 2, 4))))


def test_conv1d_gradients_match_finite_differences(rng):
    x = leaf(rng.standard_normal((4, 8)))
    kernels = leaf(rng.standard_normal((4, 4, 3)))
    weights = Tensor(rng.standard_normal((4, 8)))
    report = gradient_check(lambda tape: tape.sum(tape.mul(weights, tape.conv1d_same(x, kernels))),
                            {"x": x, "kernels": kernels}, tolerance=1e-5)
    assert report.passed
    assert report.checked_entries == 32 + 48


def test_backward_sum_and_square():
    x = leaf([1.0, 2.0, 3.0])
    tape = Tape()
    tape.backward(tape.sum(x))
    np.testing.assert_array_equal(x.grad, [1.0, 1.0, 1.0])

    x = leaf([1.0, 2.0, 3.0])
    tape = Tape()
    tape.backward(tape.sum(tape.mul(x, x)))
    np.testing.assert_array_equal(x.grad, [2.0, 4.0, 6.0])


def test_backward_accumulates_across_tapes():
    x = leaf([1.0, 2.0])
    for _ in range(2):
        tape = Tape()
        tape.backward(tape.sum(x))
    np.testing.assert_array_equal(x.grad, [2.0, 2.0])


def test_backward_contract_errors():
    tape = Tape()
    x = leaf([1.0, 2.0])
    with pytest.raises(ContractError):
        tape.backward(tape.relu(x))
    with pytest.raises(ContractError):
        Tape().backward(Tensor(1.0))


def test_column_broadcast_reduces_gradient():
    a = leaf(np.ones((2, 3)))
    b = leaf([1.0, 2.0])
    tape = Tape()
    out = tape.add(a, b)
    np.testing.assert_array_equal(out.data, [[2.0] * 3, [3.0] * 3])
    tape.backward(tape.sum(out))
    np.testing.assert_array_equal(b.grad, [3.0, 3.0])
    with pytest.raises(ShapeError):
        tape.add(a, Tensor([1.0, 2.0, 3.0]))


def test_take_scatters_repeated_indices():
    x = leaf([1.0, 2.0, 3.0])
    tape = Tape()
    tape.backward(tape.sum(tape.take(x, np.array([0, 0, 2]))))
    np.testing.assert_array_equal(x.grad, [2.0, 0.0, 1.0])


def test_concat_and_stack_split_gradients():
    a, b = leaf([1.0, 2.0]), leaf([3.0])
    tape = Tape()
    joined = tape.concat([a, b])
    stacked = tape.stack([a, tape.take(joined, slice(1, 3))], axis=1)
    assert stacked.shape == (2, 2)
    tape.backward(tape.sum(tape.mul(stacked, Tensor([[1.0, 10.0], [2.0, 20.0]]))))
    np.testing.assert_array_equal(a.grad, [1.0, 2.0 + 10.0])
    np.testing.assert_array_equal(b.grad, [20.0])


def test_relative_error_floor():
    assert relative_error(np.array([0.0]), np.array([1e-9])) == pytest.approx(1e-3)
    assert relative_error(np.array([1.0]), np.array([1.0])) == 0.0
