"""Location regression: temporal attentive pooling and the start-end / center-width heads."""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Tuple, Union

import numpy as np

from .attention import xavier
from .autodiff import Tape, Tensor
from .errors import ContractError, DataError, DegenerateMaskError
from .params import ParameterStore

logger = logging.getLogger(__name__)

PREDICTION_HEADER = ["sample_id", "tau_s", "tau_e", "tau_c", "tau_w"]


@dataclass
class GroundingPrediction:
    t_se: Tensor  # (tau_s, tau_e)
    t_cw: Tensor  # (tau_c, tau_w)
    b: Tensor  # T temporal attention
    r: Tensor  # d semantics-aware feature

    @property
    def tau_s(self) -> float:
        return float(self.t_se.data[0])

    @property
    def tau_e(self) -> float:
        return float(self.t_se.data[1])

    @property
    def tau_c(self) -> float:
        return float(self.t_cw.data[0])

    @property
    def tau_w(self) -> float:
        return float(self.t_cw.data[1])

    def boundary(self) -> Tuple[float, float]:
        """Start-end boundary clamped into [0, 1] with end >= start."""
        start = min(max(self.tau_s, 0.0), 1.0)
        end = min(max(self.tau_e, start), 1.0)
        return start, end


def init_head_parameters(store: ParameterStore, rng: np.random.Generator, d: int) -> None:
    store.add("lrn.W_bG", xavier(rng, (d, d)))
    store.add("lrn.w_tat", xavier(rng, (d,)))
    for head in ("se", "cw"):
        store.add(f"lrn.W_t{head}", xavier(rng, (d, d)))
        # Nonnegative so the final ReLU starts alive for every input.
        store.add(f"lrn.W_reg_{head}", np.abs(xavier(rng, (2, d))))


def temporal_pool(tape: Tape, G: Tensor, mask: np.ndarray, params: ParameterStore) -> Tuple[Tensor, Tensor]:
    """b = softmax(w_tat . tanh(W_bG G)) over real segments; r = G b.

    Raises:
        DegenerateMaskError: If the mask has no real segment
    """
    if not np.any(mask):
        raise DegenerateMaskError("temporal pooling needs at least one real segment")
    scores = tape.matmul(params["lrn.w_tat"], tape.tanh(tape.matmul(params["lrn.W_bG"], G)))
    b = tape.softmax(scores, axis=0, mask=mask)
    return b, tape.matmul(G, b)


def predict_boundaries(tape: Tape, r: Tensor, params: ParameterStore) -> Tuple[Tensor, Tensor]:
    """Two independent bias-free MLPs with ReLU outputs: (tau_s, tau_e) and (tau_c, tau_w)."""
    outputs = []
    for head in ("se", "cw"):
        hidden = tape.relu(tape.matmul(params[f"lrn.W_t{head}"], r))
        outputs.append(tape.relu(tape.matmul(params[f"lrn.W_reg_{head}"], hidden)))
    return outputs[0], outputs[1]


def to_interval(pred: GroundingPrediction, duration: float) -> Tuple[float, float]:
    """Seconds from the start-end head, clamped to [0, duration] with end >= start."""
    if not duration > 0:
        raise ContractError(f"duration must be positive, got {duration}")
    start, end = pred.boundary()
    return start * duration, end * duration


# ---------------------------------------------------------- prediction file

@dataclass
class PredictionRow:
    sample_id: str
    tau_s: float
    tau_e: float
    tau_c: float
    tau_w: float

    def boundary(self) -> Tuple[float, float]:
        start = min(max(self.tau_s, 0.0), 1.0)
        return start, min(max(self.tau_e, start), 1.0)


def write_predictions(path: Union[str, Path], rows: Iterable[PredictionRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(PREDICTION_HEADER)
        for row in rows:
            writer.writerow([row.sample_id] + [repr(float(v)) for v in (row.tau_s, row.tau_e, row.tau_c, row.tau_w)])


def read_predictions(path: Union[str, Path]) -> List[PredictionRow]:
    rows: List[PredictionRow] = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header: Optional[List[str]] = next(reader, None)
        if header is None or [h.strip() for h in header] != PREDICTION_HEADER:
            raise DataError(f"{path}: expected header {','.join(PREDICTION_HEADER)}", line=1)
        for line_no, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(PREDICTION_HEADER):
                raise DataError(f"{path}: expected {len(PREDICTION_HEADER)} columns", line=line_no)
            try:
                values = [float(v) for v in record[1:]]
            except ValueError:
                raise DataError(f"{path}: non-numeric prediction", line=line_no) from None
            rows.append(PredictionRow(record[0].strip(), *values))
    return rows
