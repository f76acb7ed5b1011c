import numpy as np
import pytest

from plrn_grounding.data import GroundingSample
from plrn_grounding.errors import ContractError, DataError, EmptyEvaluationError
from plrn_grounding.evaluation import evaluate, miou, recall_at, score_predictions, tiou
from plrn_grounding.head import PredictionRow


def test_tiou_examples():
    assert tiou((0.2, 0.6), (0.2, 0.6)) == 1.0
    assert tiou((0.0, 0.5), (0.25, 0.75)) == pytest.approx(1 / 3)
    assert tiou((0.0, 0.2), (0.5, 0.7)) == 0.0


def test_tiou_contracts():
    with pytest.raises(DataError):
        tiou((0.4, 0.4), (0.1, 0.2))
    with pytest.raises(ContractError):
        tiou((0.1, 0.4), (0.3, 0.2))
    assert tiou((0.1, 0.4), (0.3, 0.3)) == 0.0


def test_recall_is_strict():
    assert recall_at([1.0, 1.0], 0.5) == 100.0
    assert recall_at([0.5], 0.5) == 0.0
    assert recall_at([0.31, 0.49, 0.71, 0.05], 0.3) == 75.0
    with pytest.raises(EmptyEvaluationError):
        recall_at([], 0.5)


def test_miou():
    assert miou([1.0]) == 100.0
    assert miou([0.0, 1.0]) == 50.0
    with pytest.raises(EmptyEvaluationError):
        miou([])


def test_miou_matches_discretized_overlap():
    rng = np.random.default_rng(11)
    cells = (np.arange(10_000) + 0.5) / 10_000
    pairs, estimates = [], []
    for _ in range(1000):
        g = tuple(np.sort(rng.uniform(0, 1, 2)))
        p = tuple(np.sort(rng.uniform(0, 1, 2)))
        if g[1] - g[0] < 1e-3:
            continue
        pairs.append((g, p))
        in_g = (cells >= g[0]) & (cells < g[1])
        in_p = (cells >= p[0]) & (cells < p[1])
        union = np.count_nonzero(in_g | in_p)
        estimates.append(np.count_nonzero(in_g & in_p) / union if union else 0.0)
    report = evaluate(pairs)
    assert report.miou == pytest.approx(100.0 * np.mean(estimates), abs=0.5)


def test_report_table_and_csv(tmp_path):
    report = evaluate([((0.0, 0.5), (0.0, 0.5)), ((0.0, 0.5), (0.25, 0.75))])
    assert report.columns() == ["R@0.3", "R@0.5", "R@0.7", "mIoU"]
    assert report.recalls == {0.3: 100.0, 0.5: 50.0, 0.7: 50.0}
    assert "mIoU" in report.table()
    report.save(tmp_path / "metrics.csv")
    lines = (tmp_path / "metrics.csv").read_text().splitlines()
    assert lines == ["R@0.3,R@0.5,R@0.7,mIoU,count", "100.0000,50.0000,50.0000,66.6667,2"]


def test_score_predictions_matches_ids():
    samples = [GroundingSample("v_0", "v", "a cup", 2.0, 6.0, 20.0),
               GroundingSample("v_1", "v", "a door", 0.0, 10.0, 20.0)]
    rows = [PredictionRow("v_1", 0.0, 0.5, 0.25, 0.5), PredictionRow("v_0", 0.1, 0.3, 0.2, 0.2)]
    report = score_predictions(rows, samples)
    assert report.miou == pytest.approx(100.0)
    with pytest.raises(DataError, match="v_1"):
        score_predictions(rows[1:], samples)


def test_tiou_matches_cell_count_per_pair():
    rng = np.random.default_rng(12)
    cells = (np.arange(10_000) + 0.5) / 10_000
    checked = 0
    while checked < 1000:
        g = np.sort(rng.integers(0, 10_001, 2)) / 10_000
        p = np.sort(rng.integers(0, 10_001, 2)) / 10_000
        if g[0] == g[1]:
            continue
        in_g = (cells >= g[0]) & (cells < g[1])
        in_p = (cells >= p[0]) & (cells < p[1])
        oracle = np.count_nonzero(in_g & in_p) / np.count_nonzero(in_g | in_p)
        assert abs(tiou(tuple(g), tuple(p)) - oracle) < 5e-4
        checked += 1


def test_tiou_symmetry_and_shift_invariance():
    rng = np.random.default_rng(13)
    for _ in range(200):
        g = tuple(np.sort(rng.uniform(0.0, 0.5, 2)))
        p = tuple(np.sort(rng.uniform(0.0, 0.5, 2)))
        if g[0] == g[1] or p[0] == p[1]:
            continue
        assert tiou(g, p) == pytest.approx(tiou(p, g), abs=1e-12)
        offset = rng.uniform(0.0, 0.5)
        shifted = tiou((g[0] + offset, g[1] + offset), (p[0] + offset, p[1] + offset))
        assert shifted == pytest.approx(tiou(g, p), abs=1e-9)


def test_recall_falls_with_threshold():
    rng = np.random.default_rng(14)
    pairs = [((0.2, 0.6), tuple(np.sort(rng.uniform(0, 1, 2)))) for _ in range(300)]
    report = evaluate(pairs)
    recalls = [report.recalls[t] for t in (0.3, 0.5, 0.7)]
    assert recalls[0] >= recalls[1] >= recalls[2]
    assert 0.0 <= report.miou <= 100.0
