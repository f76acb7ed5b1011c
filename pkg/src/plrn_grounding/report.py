"""Plot-ready CSV tables from training run directories and the model-size diagnostic."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np

from .config import TrainConfig
from .errors import DataError
from .model import model_size
from .utils import ensure_dir, read_csv, write_csv

logger = logging.getLogger(__name__)

METRICS = ("R@0.3", "R@0.5", "R@0.7", "mIoU")
LOSSES = ("L_se", "L_cw", "L_tem", "L_total")


@dataclass
class RunSummary:
    variant: str
    seed: str
    best: Dict[str, float]
    steps: List[int]
    losses: List[Dict[str, float]]


def find_runs(paths: Sequence[Union[str, Path]]) -> List[Path]:
    """Every directory at or below ``paths`` holding a ``val_log.csv``."""
    runs: List[Path] = []
    for path in map(Path, paths):
        if not path.exists():
            raise FileNotFoundError(f"log directory not found: {path}")
        if (path / "val_log.csv").is_file():
            runs.append(path)
        else:
            runs.extend(sorted(p.parent for p in path.rglob("val_log.csv")))
    return runs


def summarize_run(run: Path) -> RunSummary:
    """Best validation epoch (highest mIoU, earliest on ties) and the loss curve of one run."""
    if run.name.startswith("seed"):
        variant, seed = run.parent.name, run.name[len("seed"):]
    else:
        variant, seed = run.name, ""
    rows = read_csv(run / "val_log.csv")
    if not rows:
        raise DataError(f"{run / 'val_log.csv'} has no epochs")
    best_row = max(rows, key=lambda r: float(r["mIoU"]))
    best = {m: float(best_row[m]) for m in METRICS if m in best_row}
    losses, steps = [], []
    if (run / "train_log.csv").is_file():
        for row in read_csv(run / "train_log.csv"):
            steps.append(int(row["step"]))
            losses.append({k: float(row[k]) for k in LOSSES})
    return RunSummary(variant, seed, best, steps, losses)


def write_report(paths: Sequence[Union[str, Path]], out: Union[str, Path]) -> Dict[str, Dict[str, float]]:
    """Write ``ablation.csv`` (mean best validation metrics per variant) and ``loss_curves.csv``.

    Returns:
        Mean metrics per variant, in the order variants were first found
    """
    out = ensure_dir(out)
    runs = [summarize_run(run) for run in find_runs(paths)]
    if not runs:
        raise DataError("no training runs (directories with val_log.csv) found")

    grouped: Dict[str, List[RunSummary]] = {}
    for run in runs:
        grouped.setdefault(run.variant, []).append(run)
    table: Dict[str, Dict[str, float]] = {}
    for variant, members in grouped.items():
        table[variant] = {m: float(np.mean([r.best[m] for r in members])) for m in METRICS}
    write_csv(out / "ablation.csv", ["variant", "runs", *METRICS],
              [[v, len(grouped[v]), *[table[v][m] for m in METRICS]] for v in table])

    curves = []
    for run in runs:
        for step, loss in zip(run.steps, run.losses):
            curves.append([run.variant, run.seed, step, *[loss[k] for k in LOSSES]])
    write_csv(out / "loss_curves.csv", ["variant", "seed", "step", *LOSSES], curves)
    logger.info(f"Summarized {len(runs)} runs of {len(table)} variants into {out}")
    return table


def write_model_size(cfg: TrainConfig, vocab_size: int, d_raw: int, out: Union[str, Path]) -> Path:
    size = model_size(cfg, vocab_size, d_raw)
    logger.info(f"Model at d={cfg.d}, T={cfg.T}: {size.parameters} parameters, {size.memory_mb:.2f} MB, "
                f"{size.forward_seconds:.4f} s per forward")
    return write_csv(Path(ensure_dir(out)) / "model_size.csv",
                     ["d", "T", "vocab_size", "d_raw", "parameters", "memory_mb", "forward_seconds"],
                     [[cfg.d, cfg.T, vocab_size, d_raw, size.parameters, size.memory_mb, size.forward_seconds]])
