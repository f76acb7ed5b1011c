"""Temporal IoU, recall at tIoU thresholds and mIoU."""

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ContractError, DataError, EmptyEvaluationError

if TYPE_CHECKING:
    from .data import GroundingSample
    from .head import PredictionRow

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLDS = (0.3, 0.5, 0.7)


def tiou(g: Tuple[float, float], p: Tuple[float, float]) -> float:
    """Intersection over union of two intervals, 0 when they are disjoint.

    Raises:
        DataError: If the ground truth is degenerate (g_s >= g_e)
    """
    g_s, g_e = g
    p_s, p_e = p
    if not g_s < g_e:
        raise DataError(f"degenerate ground truth ({g_s}, {g_e})")
    if p_e < p_s:
        raise ContractError(f"prediction must be ordered, got ({p_s}, {p_e})")
    union = max(g_e, p_e) - min(g_s, p_s)
    if union <= 0:
        return 0.0
    return max(0.0, (min(g_e, p_e) - max(g_s, p_s)) / union)


def recall_at(tious: Sequence[float], threshold: float) -> float:
    """Percentage of tIoUs strictly larger than ``threshold``."""
    if len(tious) == 0:
        raise EmptyEvaluationError("recall over an empty set of samples")
    if not 0.0 < threshold < 1.0:
        raise ContractError(f"threshold must lie in (0, 1), got {threshold}")
    values = np.asarray(tious, dtype=np.float64)
    return 100.0 * float(np.count_nonzero(values > threshold)) / len(values)


def miou(tious: Sequence[float]) -> float:
    if len(tious) == 0:
        raise EmptyEvaluationError("mIoU over an empty set of samples")
    return 100.0 * float(np.mean(np.asarray(tious, dtype=np.float64)))


@dataclass
class EvalReport:
    recalls: Dict[float, float]
    miou: float
    count: int
    tious: List[float] = field(default_factory=list)

    def columns(self) -> List[str]:
        return [f"R@{t:g}" for t in self.recalls] + ["mIoU"]

    def values(self) -> List[float]:
        return list(self.recalls.values()) + [self.miou]

    def table(self) -> str:
        """Human-readable one-row table."""
        names = self.columns() + ["n"]
        cells = [f"{v:.2f}" for v in self.values()] + [str(self.count)]
        widths = [max(len(a), len(b)) for a, b in zip(names, cells)]
        head = " | ".join(n.rjust(w) for n, w in zip(names, widths))
        rule = "-+-".join("-" * w for w in widths)
        body = " | ".join(c.rjust(w) for c, w in zip(cells, widths))
        return "\n".join([head, rule, body])

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.columns() + ["count"])
        writer.writerow([f"{v:.4f}" for v in self.values()] + [self.count])
        return buffer.getvalue()

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")


def evaluate(pairs: Sequence[Tuple[Tuple[float, float], Tuple[float, float]]],
             thresholds: Optional[Sequence[float]] = None) -> EvalReport:
    """Build an EvalReport from (ground truth, prediction) interval pairs."""
    thresholds = tuple(thresholds or DEFAULT_THRESHOLDS)
    values = [tiou(g, p) for g, p in pairs]
    report = EvalReport({t: recall_at(values, t) for t in thresholds}, miou(values), len(values), values)
    logger.debug(f"Evaluated {report.count} samples: mIoU {report.miou:.2f}")
    return report


def score_predictions(rows: Sequence["PredictionRow"], samples: Sequence["GroundingSample"],
                      thresholds: Optional[Sequence[float]] = None) -> EvalReport:
    """Match prediction rows to samples by id and evaluate the start-end boundaries.

    Raises:
        DataError: If a sample has no prediction row
    """
    by_id = {row.sample_id: row for row in rows}
    pairs = []
    for s in samples:
        row = by_id.get(s.sample_id)
        if row is None:
            raise DataError(f"no prediction for sample '{s.sample_id}'")
        pairs.append(((s.g_s, s.g_e), row.boundary()))
    extra = len(by_id) - len(pairs)
    if extra > 0:
        logger.warning(f"{extra} prediction rows have no matching sample and were ignored")
    return evaluate(pairs, thresholds)
