"""Mini-batch training, prediction, ablation runs and the model gradient check."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .attention import dump_word_attention
from .autodiff import GradCheckReport, Tape, gradient_check
from .base_provider import FeatureProvider
from .config import ABLATIONS, TrainConfig, ablation_config, dump_config
from .context import dump_nonlocal_attention
from .data import VOCAB_FILE, Dataset, GroundingSample
from .errors import DataError, TrainingDivergedError
from .evaluation import EvalReport, evaluate
from .head import GroundingPrediction, PredictionRow, write_predictions
from .losses import LossBreakdown, TrainingLog, ground_truth, total_loss
from .model import PLRN, EncodedSample, encode_sample, init_parameters
from .params import ParameterStore, adam_step, check_compatible, load_checkpoint, save_checkpoint
from .text_encoder import QueryTokens, Vocabulary
from .utils import ensure_dir, write_csv
from .video_encoder import RawVideo, segment_video

logger = logging.getLogger(__name__)

CHECKPOINT_FILE = "checkpoint.plrn"
LAST_CHECKPOINT_FILE = "last.plrn"
CONFIG_FILE = "config.txt"
TRAIN_LOG_FILE = "train_log.csv"
VAL_LOG_FILE = "val_log.csv"
DIVERGED_FILE = "diverged_batch.txt"


def forward(sample: EncodedSample, params: ParameterStore, cfg: TrainConfig, tape: Optional[Tape] = None,
            weight: float = 1.0) -> Tuple[GroundingPrediction, LossBreakdown]:
    """Run the network and the enabled losses on one sample.

    ``weight`` scales the differentiable total, e.g. 1/B for a batch mean.
    """
    if sample.gt is None:
        raise DataError(f"sample {sample.sample_id} has no ground truth")
    tape = tape if tape is not None else Tape()
    pred, _ = PLRN(cfg, params).forward(tape, sample)
    losses = total_loss(tape, pred, sample.gt, use_l_cw=cfg.use_l_cw, use_l_tem=cfg.use_l_tem, weight=weight)
    return pred, losses


def validate(model: PLRN, samples: Sequence[EncodedSample]) -> EvalReport:
    pairs = []
    for enc in samples:
        pred, _ = model.forward(Tape(), enc)
        assert enc.gt is not None
        pairs.append(((enc.gt.g_s, enc.gt.g_e), pred.boundary()))
    return evaluate(pairs)


def _mean_breakdown(parts: Sequence[LossBreakdown]) -> LossBreakdown:
    rows = np.array([p.as_row() for p in parts])
    return LossBreakdown(*[float(v) for v in rows.mean(axis=0)])


def _dump_batch(out: Path, step: int, batch: Sequence[EncodedSample], losses: Sequence[LossBreakdown]) -> Path:
    path = out / DIVERGED_FILE
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"step {step}\n")
        for enc, loss in zip(batch, losses):
            words = " ".join(enc.tokens.words)
            handle.write(f"{enc.sample_id} L_se={loss.L_se!r} L_cw={loss.L_cw!r} L_tem={loss.L_tem!r} "
                         f"words=[{words}] real_segments={enc.segments.real_count}\n")
    return path


@dataclass
class TrainResult:
    store: ParameterStore
    best_miou: float
    best_epoch: int
    steps: int
    history: List[EvalReport] = field(default_factory=list)


def train(cfg: TrainConfig, dataset: Dataset, out: Union[str, Path]) -> TrainResult:
    """Train on the dataset's train split, validating on its val split every epoch.

    Writes ``checkpoint.plrn`` (best validation mIoU), ``last.plrn``,
    ``config.txt``, ``vocab.txt``, ``train_log.csv`` and ``val_log.csv``
    under ``out``.

    Raises:
        DataError: If the training split is empty
        TrainingDivergedError: On a non-finite loss or gradient; the batch is dumped first
    """
    out = ensure_dir(out)
    train_samples = dataset.subset("train")
    if not train_samples:
        raise DataError(f"training split of {dataset.root} is empty")
    val_samples = dataset.subset("val")
    if not val_samples:
        logger.warning("Validation split is empty, validating on the training split")
        val_samples = train_samples

    train_encoded = [encode_sample(s, dataset.provider, dataset.vocab, cfg) for s in train_samples]
    val_encoded = [encode_sample(s, dataset.provider, dataset.vocab, cfg) for s in val_samples]
    d_raw = train_encoded[0].segments.features.shape[0]

    store = init_parameters(cfg, len(dataset.vocab), d_raw)
    model = PLRN(cfg, store)
    rng = np.random.default_rng(cfg.seed)
    config_numbers = cfg.as_numbers()
    dump_config(cfg, out / CONFIG_FILE)
    dataset.vocab.save(out / VOCAB_FILE)
    train_log = TrainingLog(out / TRAIN_LOG_FILE)
    val_rows: List[List[object]] = []

    logger.info(f"Training {store.num_parameters()} parameters on {len(train_encoded)} samples "
                f"({len(val_encoded)} for validation), {cfg.epochs} epochs of batch {cfg.batch_size}")

    best_bytes: Optional[bytes] = None
    best_miou, best_epoch, stale, step = -1.0, -1, 0, 0
    history: List[EvalReport] = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(train_encoded))
        for begin in range(0, len(order), cfg.batch_size):
            batch = [train_encoded[i] for i in order[begin:begin + cfg.batch_size]]
            store.zero_grad()
            parts = []
            for enc in batch:
                tape = Tape()
                _, losses = forward(enc, store, cfg, tape, weight=1.0 / len(batch))
                parts.append(losses)
                if not np.isfinite(losses.L_total):
                    break
                assert losses.total is not None
                tape.backward(losses.total)
            step += 1
            if not all(np.isfinite(p.L_total) for p in parts) or not store.gradients_finite():
                path = _dump_batch(out, step, batch, parts)
                logger.error(f"Non-finite loss or gradient at step {step}; batch written to {path}")
                raise TrainingDivergedError(f"training diverged at step {step} (epoch {epoch}), see {path}")
            adam_step(store, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
            mean = _mean_breakdown(parts)
            train_log.append(step, mean)
            logger.debug(f"step {step}: L_se={mean.L_se:.4f} L_cw={mean.L_cw:.4f} "
                         f"L_tem={mean.L_tem:.4f} L_total={mean.L_total:.4f}")

        report = validate(model, val_encoded)
        history.append(report)
        val_rows.append([epoch] + [float(v) for v in report.values()])
        logger.info(f"Epoch {epoch}/{cfg.epochs}: validation mIoU {report.miou:.2f} "
                    f"({', '.join(f'{c}={v:.1f}' for c, v in zip(report.columns(), report.values()))})")
        if report.miou > best_miou:
            best_miou, best_epoch, stale = report.miou, epoch, 0
            best_bytes = store.to_bytes(config_numbers)
        else:
            stale += 1
            if cfg.patience and stale >= cfg.patience:
                logger.info(f"No validation improvement for {stale} epochs, stopping early")
                break

    save_checkpoint(out / LAST_CHECKPOINT_FILE, store, config_numbers)
    if best_bytes is None:
        best_bytes = store.to_bytes(config_numbers)
    (out / CHECKPOINT_FILE).write_bytes(best_bytes)
    header = ["epoch"] + (history[0].columns() if history else ["R@0.3", "R@0.5", "R@0.7", "mIoU"])
    write_csv(out / VAL_LOG_FILE, header, val_rows)
    logger.info(f"Training finished after {step} steps; best validation mIoU {best_miou:.2f} at epoch {best_epoch}")
    return TrainResult(store, best_miou, best_epoch, step, history)


# ------------------------------------------------------------------ predict

def load_model(checkpoint: Union[str, Path], vocab: Vocabulary, cfg: Optional[TrainConfig] = None,
               d_raw: Optional[int] = None) -> PLRN:
    """Load a checkpoint and verify it against ``cfg`` and the vocabulary.

    When ``cfg`` is omitted the configuration stored in the checkpoint is used.

    Raises:
        CompatibilityError: Naming the first differing config field or parameter
    """
    loaded = load_checkpoint(checkpoint)
    if cfg is None:
        cfg = TrainConfig.from_numbers(loaded.config)
    else:
        cfg.check_matches(loaded.config)
    if d_raw is None:
        d_raw = loaded.store["video.W_em"].shape[1] if "video.W_em" in loaded.store else 1
    check_compatible(init_parameters(cfg, len(vocab), d_raw), loaded.store)
    return PLRN(cfg, loaded.store)


def predict(checkpoint: Union[str, Path], samples: Sequence[GroundingSample], provider: FeatureProvider,
            vocab: Vocabulary, out: Union[str, Path], cfg: Optional[TrainConfig] = None,
            dump_attention: Optional[Union[str, Path]] = None) -> List[PredictionRow]:
    """Predict boundaries for ``samples`` and write the prediction CSV to ``out``.

    With ``dump_attention`` set, word, non-local and temporal attention
    weights of every sample are written as CSV files in that directory.
    """
    model = load_model(checkpoint, vocab, cfg)
    cfg = model.cfg
    rows: List[PredictionRow] = []
    word_rows, temporal_rows = [], []
    dump_dir = ensure_dir(dump_attention) if dump_attention is not None else None
    for sample in samples:
        enc = encode_sample(sample, provider, vocab, cfg)
        pred, trace = model.forward(Tape(), enc)
        rows.append(PredictionRow(sample.sample_id, pred.tau_s, pred.tau_e, pred.tau_c, pred.tau_w))
        if dump_dir is None:
            continue
        if trace.word_attention is not None:
            word_rows.append((sample.sample_id, enc.tokens.words, trace.word_attention))
        if trace.nonlocal_attention:
            dump_nonlocal_attention(dump_dir / f"nonlocal_{sample.sample_id}.csv", sample.sample_id,
                                    trace.nonlocal_attention)
        if trace.temporal_attention is not None:
            temporal_rows.extend([sample.sample_id, t, float(w)] for t, w in enumerate(trace.temporal_attention))
    if not rows:
        logger.warning("No samples to predict; writing a header-only prediction file")
    write_predictions(out, rows)
    if dump_dir is not None:
        dump_word_attention(dump_dir / "word_attention.csv", word_rows)
        write_csv(dump_dir / "temporal_attention.csv", ["sample_id", "segment", "weight"], temporal_rows)
    logger.info(f"Wrote {len(rows)} predictions to {out}")
    return rows


# ----------------------------------------------------------------- ablation

def run_ablation(base: TrainConfig, dataset: Dataset, out: Union[str, Path],
                 variants: Optional[Sequence[str]] = None, seeds: Sequence[int] = (1, 2, 3)) -> Dict[str, List[float]]:
    """Train every variant for every seed under ``out/<variant>/seed<k>/``.

    Returns:
        Best validation mIoU per run, keyed by variant
    """
    out = ensure_dir(out)
    results: Dict[str, List[float]] = {}
    for variant in variants or list(ABLATIONS):
        for seed in seeds:
            cfg = ablation_config(base, variant).replace(seed=seed)
            logger.info(f"Ablation run {variant} seed {seed}")
            result = train(cfg, dataset, out / variant / f"seed{seed}")
            results.setdefault(variant, []).append(result.best_miou)
    return results


# --------------------------------------------------------------- grad check

def random_sample(cfg: TrainConfig, vocab_size: int, d_raw: int, num_words: int = 4,
                  seed: int = 0) -> EncodedSample:
    """A random encoded sample with one padded segment slot when T > 1."""
    rng = np.random.default_rng(seed)
    indices = rng.integers(0, vocab_size, size=num_words)
    tokens = QueryTokens(indices, tuple(f"w{i}" for i in indices))
    real = max(cfg.T - 1, 1)
    frame_count = cfg.hop * (real - 1) + cfg.seg_len
    raw = RawVideo(rng.standard_normal((frame_count, d_raw)), float(frame_count))
    segments = segment_video(raw, cfg.seg_len, cfg.hop, cfg.T)
    g_s = float(rng.uniform(0.05, 0.4))
    g_e = float(rng.uniform(g_s + 0.2, 0.95))
    gt = ground_truth(g_s, g_e, segments.centers, segments.mask)
    return EncodedSample("grad-check", tokens, segments, raw.duration, gt)


def grad_check(cfg: TrainConfig, tolerance: float = 1e-4, vocab_size: int = 10, d_raw: int = 6,
               num_words: int = 4, h: float = 1e-5) -> GradCheckReport:
    """Finite-difference check of every parameter entry on a random sample."""
    store = init_parameters(cfg, vocab_size, d_raw)
    sample = random_sample(cfg, vocab_size, d_raw, num_words, seed=cfg.seed)
    model = PLRN(cfg, store)

    def loss_fn(tape: Tape):
        pred, _ = model.forward(tape, sample)
        assert sample.gt is not None
        losses = total_loss(tape, pred, sample.gt, use_l_cw=cfg.use_l_cw, use_l_tem=cfg.use_l_tem)
        assert losses.total is not None
        return losses.total

    return gradient_check(loss_fn, dict(store.items()), h=h, tolerance=tolerance)
