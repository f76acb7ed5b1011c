import numpy as np
import pytest

from plrn_grounding.autodiff import LOG_FLOOR, Tape, Tensor
from plrn_grounding.errors import DataError
from plrn_grounding.head import GroundingPrediction
from plrn_grounding.losses import GroundTruth, TrainingLog, boundary_indicator, loss_cw, loss_se, loss_tem, total_loss


def prediction(t_se, t_cw, b):
    return GroundingPrediction(Tensor(t_se, requires_grad=True), Tensor(t_cw, requires_grad=True),
                               Tensor(b, requires_grad=True), Tensor(np.zeros(2)))


def smooth_l1(z):
    return float(Tape().smooth_l1(Tensor([z])).data[0])


def test_smooth_l1_values():
    assert smooth_l1(0.0) == 0.0
    assert smooth_l1(0.5) == 0.125
    assert smooth_l1(2.0) == 1.5
    assert smooth_l1(1.0) == smooth_l1(-1.0) == 0.5


@pytest.mark.parametrize("knot", [1.0, -1.0])
def test_smooth_l1_is_continuously_differentiable_at_knot(knot):
    h = 1e-6
    left = (smooth_l1(knot) - smooth_l1(knot - h)) / h
    right = (smooth_l1(knot + h) - smooth_l1(knot)) / h
    assert left == pytest.approx(knot, abs=1e-5)
    assert right == pytest.approx(knot, abs=1e-5)
    for z in (knot - 1e-7, knot + 1e-7):
        x = Tensor([z], requires_grad=True)
        tape = Tape()
        tape.backward(tape.sum(tape.smooth_l1(x)))
        assert x.grad[0] == pytest.approx(knot, abs=1e-6)


def test_start_end_and_center_width_losses():
    gt = GroundTruth(0.5, 0.9, np.array([0.0, 1.0]))
    tape = Tape()
    assert loss_se(tape, prediction([0.0, 0.0], [0.0, 0.0], [0.5, 0.5]), gt).item() == pytest.approx(0.53)
    assert loss_se(tape, prediction([0.5, 0.9], [0.0, 0.0], [0.5, 0.5]), gt).item() == 0.0

    gt = GroundTruth(0.2, 0.8, np.array([1.0, 1.0]))
    assert (gt.g_c, gt.g_w) == pytest.approx((0.5, 0.6))
    assert loss_cw(tape, prediction([0.0, 0.0], [0.5, 0.6], [0.5, 0.5]), gt).item() == pytest.approx(0.0)


def test_temporal_attention_loss():
    tape = Tape()
    assert loss_tem(tape, Tensor(np.full(4, 0.25)), np.array([0, 1, 1, 0])).item() == pytest.approx(np.log(4))
    assert loss_tem(tape, Tensor([0.0, 1.0, 0.0]), np.array([0, 1, 0])).item() == 0.0
    collapsed = loss_tem(tape, Tensor([1.0, 0.0]), np.array([0, 1])).item()
    assert collapsed == pytest.approx(-np.log(LOG_FLOOR))


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_temporal_attention_loss_minimum_on_simplex_grid(m):
    phi = np.array([1] * m + [0] * (4 - m))
    steps = 12
    best, argmin = np.inf, None
    for i in range(steps + 1):
        for j in range(steps + 1 - i):
            for k in range(steps + 1 - i - j):
                b = np.array([i, j, k, steps - i - j - k]) / steps
                value = loss_tem(Tape(), Tensor(b), phi).item()
                if value < best - 1e-12:
                    best, argmin = value, b
    assert best == pytest.approx(np.log(m), abs=1e-12)
    np.testing.assert_allclose(argmin, phi / m, atol=1e-12)


def test_total_loss_respects_flags():
    gt = GroundTruth(0.5, 0.9, np.array([0.0, 1.0]))
    pred = prediction([0.0, 0.0], [0.0, 0.0], [0.5, 0.5])
    full = total_loss(Tape(), pred, gt)
    assert full.L_total == pytest.approx(full.L_se + full.L_cw + full.L_tem)
    no_cw = total_loss(Tape(), pred, gt, use_l_cw=False)
    assert no_cw.L_cw == 0.0
    assert no_cw.L_total == pytest.approx(full.L_se + full.L_tem)
    no_tem = total_loss(Tape(), pred, gt, use_l_tem=False)
    assert no_tem.L_total == pytest.approx(full.L_se + full.L_cw)


def test_perfect_prediction_has_zero_total():
    gt = GroundTruth(0.2, 0.8, np.array([1.0, 0.0]))
    losses = total_loss(Tape(), prediction([0.2, 0.8], [0.5, 0.6], [1.0, 0.0]), gt)
    assert losses.L_total == pytest.approx(0.0)


def test_weight_scales_only_the_tensor():
    gt = GroundTruth(0.5, 0.9, np.array([0.0, 1.0]))
    tape = Tape()
    losses = total_loss(tape, prediction([0.0, 0.0], [0.0, 0.0], [0.5, 0.5]), gt, weight=0.25)
    assert losses.total.item() == pytest.approx(0.25 * losses.L_total)


def test_disabled_center_width_gets_no_gradient():
    gt = GroundTruth(0.5, 0.9, np.array([0.0, 1.0]))
    pred = prediction([0.0, 0.0], [0.1, 0.1], [0.5, 0.5])
    tape = Tape()
    tape.backward(total_loss(tape, pred, gt, use_l_cw=False).total)
    assert pred.t_cw.grad is None
    assert pred.t_se.grad is not None


def test_boundary_indicator_uses_midpoints():
    centers = np.array([0.1, 0.3, 0.5, 0.7, 0.0])
    mask = np.array([True, True, True, True, False])
    np.testing.assert_array_equal(boundary_indicator(centers, mask, 0.25, 0.55), [0, 1, 1, 0, 0])


def test_boundary_indicator_falls_back_to_nearest_center():
    centers = np.array([0.125, 0.375, 0.625, 0.875])
    mask = np.ones(4, dtype=bool)
    np.testing.assert_array_equal(boundary_indicator(centers, mask, 0.4, 0.45), [0, 1, 0, 0])


def test_ground_truth_validation():
    with pytest.raises(DataError):
        GroundTruth(0.5, 0.5, np.ones(2))


def test_training_log(tmp_path):
    gt = GroundTruth(0.5, 0.9, np.array([0.0, 1.0]))
    log = TrainingLog(tmp_path / "train_log.csv")
    log.append(1, total_loss(Tape(), prediction([0.0, 0.0], [0.0, 0.0], [0.5, 0.5]), gt))
    lines = (tmp_path / "train_log.csv").read_text().splitlines()
    assert lines[0] == "step,L_se,L_cw,L_tem,L_total"
    assert lines[1].startswith("1,0.53")
