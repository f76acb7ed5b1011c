"""Start-end, center-width and temporal attention calibration losses."""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .autodiff import LOG_FLOOR, Tape, Tensor
from .errors import DataError, DegenerateMaskError
from .head import GroundingPrediction

logger = logging.getLogger(__name__)

TRAIN_LOG_HEADER = ["step", "L_se", "L_cw", "L_tem", "L_total"]


@dataclass
class GroundTruth:
    g_s: float
    g_e: float
    phi: np.ndarray  # T indicator of in-boundary segments

    def __post_init__(self):
        if not 0.0 <= self.g_s < self.g_e <= 1.0:
            raise DataError(f"ground truth needs 0 <= g_s < g_e <= 1, got ({self.g_s}, {self.g_e})")

    @property
    def g_c(self) -> float:
        return 0.5 * (self.g_s + self.g_e)

    @property
    def g_w(self) -> float:
        return self.g_e - self.g_s


@dataclass
class LossBreakdown:
    L_se: float
    L_cw: float
    L_tem: float
    L_total: float
    total: Optional[Tensor] = None

    def as_row(self):
        return [self.L_se, self.L_cw, self.L_tem, self.L_total]


def boundary_indicator(centers: np.ndarray, mask: np.ndarray, g_s: float, g_e: float) -> np.ndarray:
    """phi_t = 1 iff real segment t's window midpoint lies in [g_s, g_e].

    When no midpoint falls inside, the real segment nearest the boundary
    center is marked instead.
    """
    if not np.any(mask):
        raise DegenerateMaskError("no real segment to mark")
    phi = (mask & (centers >= g_s) & (centers <= g_e)).astype(np.float64)
    if phi.sum() == 0:
        distance = np.where(mask, np.abs(centers - 0.5 * (g_s + g_e)), np.inf)
        phi[int(np.argmin(distance))] = 1.0
    return phi


def ground_truth(g_s: float, g_e: float, centers: np.ndarray, mask: np.ndarray) -> GroundTruth:
    return GroundTruth(g_s, g_e, boundary_indicator(centers, mask, g_s, g_e))


def loss_se(tape: Tape, pred: GroundingPrediction, gt: GroundTruth) -> Tensor:
    target = tape.constant([gt.g_s, gt.g_e])
    return tape.sum(tape.smooth_l1(tape.sub(target, pred.t_se)))


def loss_cw(tape: Tape, pred: GroundingPrediction, gt: GroundTruth) -> Tensor:
    target = tape.constant([gt.g_c, gt.g_w])
    return tape.sum(tape.smooth_l1(tape.sub(target, pred.t_cw)))


def loss_tem(tape: Tape, b: Tensor, phi: np.ndarray, floor: float = LOG_FLOOR) -> Tensor:
    """-sum(phi_t log b_t) / sum(phi_t), with b floored inside the log."""
    total = float(np.sum(phi))
    if total <= 0:
        raise DegenerateMaskError("attention calibration needs at least one in-boundary segment")
    weights = tape.constant(-np.asarray(phi, dtype=np.float64) / total)
    return tape.sum(tape.mul(weights, tape.log(b, floor)))


def total_loss(tape: Tape, pred: GroundingPrediction, gt: GroundTruth, use_l_cw: bool = True,
               use_l_tem: bool = True, weight: float = 1.0) -> LossBreakdown:
    """Sum the enabled losses; disabled terms report 0 and stay off the tape.

    ``weight`` scales the differentiable total (1/batch for batch means);
    the reported floats are unscaled.
    """
    terms = [loss_se(tape, pred, gt)]
    values = {"L_se": terms[0].item(), "L_cw": 0.0, "L_tem": 0.0}
    if use_l_cw:
        term = loss_cw(tape, pred, gt)
        terms.append(term)
        values["L_cw"] = term.item()
    if use_l_tem:
        term = loss_tem(tape, pred.b, gt.phi)
        terms.append(term)
        values["L_tem"] = term.item()
    total = terms[0]
    for term in terms[1:]:
        total = tape.add(total, term)
    scaled = tape.scale(total, weight) if weight != 1.0 else total
    return LossBreakdown(values["L_se"], values["L_cw"], values["L_tem"], total.item(), scaled)


class TrainingLog:
    """Appends ``step, L_se, L_cw, L_tem, L_total`` CSV lines."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        with open(self.path, "w", newline="", encoding="utf-8") as handle:
            csv.writer(handle).writerow(TRAIN_LOG_HEADER)

    def append(self, step: int, losses: LossBreakdown) -> None:
        with open(self.path, "a", newline="", encoding="utf-8") as handle:
            csv.writer(handle).writerow([step] + [repr(float(v)) for v in losses.as_row()])
