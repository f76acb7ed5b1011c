import numpy as np
import pytest

from plrn_grounding.autodiff import Tape, Tensor, gradient_check
from plrn_grounding.errors import DataError, DegenerateMaskError
from plrn_grounding.head import (GroundingPrediction, PredictionRow, init_head_parameters, predict_boundaries,
                                 read_predictions, temporal_pool, to_interval, write_predictions)
from plrn_grounding.params import ParameterStore

D = 4


@pytest.fixture
def params(rng):
    store = ParameterStore()
    init_head_parameters(store, rng, D)
    return store


def prediction(tau_s, tau_e):
    return GroundingPrediction(Tensor([tau_s, tau_e]), Tensor([0.0, 0.0]), Tensor([1.0]), Tensor(np.zeros(D)))


def test_identical_columns_pool_uniformly(params, rng):
    column = rng.standard_normal(D)
    G = Tensor(np.tile(column[:, None], (1, 4)))
    b, r = temporal_pool(Tape(), G, np.ones(4, dtype=bool), params)
    np.testing.assert_allclose(b.data, [0.25] * 4)
    np.testing.assert_allclose(r.data, column)


def test_single_real_segment_is_one_hot(params, rng):
    G = Tensor(rng.standard_normal((D, 3)))
    b, r = temporal_pool(Tape(), G, np.array([False, True, False]), params)
    np.testing.assert_array_equal(b.data, [0.0, 1.0, 0.0])
    np.testing.assert_allclose(r.data, G.data[:, 1])


def test_zero_attention_vector_is_uniform_over_real(params, rng):
    params["lrn.w_tat"].data[:] = 0.0
    b, _ = temporal_pool(Tape(), Tensor(rng.standard_normal((D, 4))), np.array([True, True, True, False]), params)
    np.testing.assert_allclose(b.data, [1 / 3, 1 / 3, 1 / 3, 0.0])


def test_padded_column_does_not_reach_pooled_feature(params, rng):
    mask = np.array([True, True, True, False, False])
    G = rng.standard_normal((D, 5))
    b, r = temporal_pool(Tape(), Tensor(G), mask, params)
    perturbed = G.copy()
    perturbed[:, 3] += 100.0
    perturbed[:, 4] = rng.standard_normal(D)
    b2, r2 = temporal_pool(Tape(), Tensor(perturbed), mask, params)
    np.testing.assert_array_equal(b2.data[3:], [0.0, 0.0])
    np.testing.assert_allclose(b2.data, b.data, rtol=0, atol=1e-15)
    np.testing.assert_allclose(r2.data, r.data, rtol=0, atol=1e-14)


def test_empty_mask_rejected(params):
    with pytest.raises(DegenerateMaskError):
        temporal_pool(Tape(), Tensor(np.zeros((D, 2))), np.zeros(2, dtype=bool), params)


def test_boundaries_are_nonnegative(params, rng):
    t_se, t_cw = predict_boundaries(Tape(), Tensor(np.zeros(D)), params)
    np.testing.assert_array_equal(np.concatenate([t_se.data, t_cw.data]), np.zeros(4))
    for _ in range(20):
        t_se, t_cw = predict_boundaries(Tape(), Tensor(rng.standard_normal(D)), params)
        assert np.all(t_se.data >= 0) and np.all(t_cw.data >= 0)


def test_start_gradient_wrt_feature(params):
    r = Tensor(np.array([0.4, -0.2, 0.9, 0.3]), requires_grad=True)

    def tau_s(tape):
        t_se, _ = predict_boundaries(tape, r, params)
        return tape.take(t_se, 0)

    assert gradient_check(tau_s, {"r": r}, tolerance=1e-5).passed


def test_to_interval():
    assert to_interval(prediction(0.25, 0.5), 40.0) == (10.0, 20.0)
    assert to_interval(prediction(0.6, 0.2), 10.0) == (6.0, 6.0)
    assert to_interval(prediction(0.0, 1.0), 30.0) == (0.0, 30.0)


def test_prediction_file_round_trip(tmp_path):
    rows = [PredictionRow("v_0", 0.1, 0.4, 0.25, 0.3), PredictionRow("v_1", 0.0, 1.0, 0.5, 1.0)]
    path = tmp_path / "pred.csv"
    write_predictions(path, rows)
    assert path.read_text().splitlines()[0] == "sample_id,tau_s,tau_e,tau_c,tau_w"
    assert read_predictions(path) == rows


def test_empty_prediction_file(tmp_path):
    path = tmp_path / "pred.csv"
    write_predictions(path, [])
    assert path.read_text().strip() == "sample_id,tau_s,tau_e,tau_c,tau_w"
    assert read_predictions(path) == []


def test_bad_prediction_header(tmp_path):
    path = tmp_path / "pred.csv"
    path.write_text("id,start,end\n")
    with pytest.raises(DataError, match="line 1"):
        read_predictions(path)
