"""Synthetic grounding task with query-keyed patterns planted inside the boundary."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from .config import coerce, dump_config, read_key_values
from .data import (ANNOTATIONS_FILE, FEATURES_DIR, MANIFEST_FILE, VOCAB_FILE, Dataset, GroundingSample, split,
                   write_annotations, write_manifest)
from .errors import ConfigurationError
from .evaluation import EvalReport, evaluate
from .providers import FileFeatureProvider, MemoryFeatureProvider
from .templates import TEMPLATE_WORDS, get_query, vocabulary_words
from .text_encoder import Vocabulary
from .video_encoder import RawVideo

logger = logging.getLogger(__name__)

SYNTHETIC_FILE = "synthetic.txt"


@dataclass
class SyntheticConfig:
    num_samples: int = 2000
    vocab_size: int = 64
    num_signal_tokens: int = 8
    d_raw: int = 32
    min_frames: int = 64
    max_frames: int = 160
    fps: float = 16.0
    min_width: float = 0.1
    max_width: float = 0.5
    sigma: float = 0.5
    min_signal: int = 1
    max_signal: int = 3
    max_filler: int = 2
    distractors: int = 0
    paired: bool = False
    order_bias: float = 1.0
    train_fraction: float = 0.8
    val_fraction: float = 0.1
    test_fraction: float = 0.1
    seed: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.num_samples < 1:
            raise ConfigurationError(f"num_samples must be >= 1, got {self.num_samples}")
        if not 1 <= self.num_signal_tokens <= self.d_raw:
            raise ConfigurationError(f"num_signal_tokens must lie in [1, d_raw={self.d_raw}], "
                                     f"got {self.num_signal_tokens}")
        if self.vocab_size < len(TEMPLATE_WORDS) + self.num_signal_tokens:
            raise ConfigurationError(f"vocab_size {self.vocab_size} cannot hold the template words "
                                     f"and {self.num_signal_tokens} signal tokens")
        if not 1 <= self.min_frames <= self.max_frames:
            raise ConfigurationError(f"frame range [{self.min_frames}, {self.max_frames}] is invalid")
        if not 0.0 < self.min_width <= self.max_width <= 1.0:
            raise ConfigurationError(f"boundary widths [{self.min_width}, {self.max_width}] must lie in (0, 1]")
        if not 1 <= self.min_signal <= self.max_signal <= min(3, self.num_signal_tokens):
            raise ConfigurationError(f"signal tokens per query [{self.min_signal}, {self.max_signal}] is invalid")
        if self.sigma < 0 or self.fps <= 0 or self.max_filler < 0 or self.distractors < 0:
            raise ConfigurationError("sigma, max_filler and distractors must be >= 0 and fps > 0")
        if min(self.fractions) < 0 or abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ConfigurationError(f"split fractions {self.fractions} must be nonnegative and sum to 1")
        if self.paired and (self.num_signal_tokens < 2 or self.min_width > 0.5):
            raise ConfigurationError("paired samples need at least 2 signal tokens and min_width <= 0.5")
        if not 0.0 <= self.order_bias <= 1.0:
            raise ConfigurationError(f"order_bias must lie in [0, 1], got {self.order_bias}")

    @property
    def fractions(self) -> Tuple[float, float, float]:
        return (self.train_fraction, self.val_fraction, self.test_fraction)


def load_synthetic_config(source: Optional[Union[str, Path]] = None,
                          overrides: Optional[Mapping[str, Any]] = None) -> SyntheticConfig:
    values: Dict[str, Any] = read_key_values(source) if source is not None else {}
    values.update(overrides or {})
    return SyntheticConfig(**{k: coerce(SyntheticConfig, k, v) for k, v in values.items()})


@dataclass
class SyntheticDataset:
    config: SyntheticConfig
    samples: List[GroundingSample]
    provider: MemoryFeatureProvider
    vocab: Vocabulary
    splits: Dict[str, List[GroundingSample]]
    directions: np.ndarray  # d_raw x num_signal_tokens, orthonormal columns
    signal_words: List[str]

    def as_dataset(self, root: Union[str, Path] = ".") -> Dataset:
        membership = {name: [s.sample_id for s in part] for name, part in self.splits.items()}
        return Dataset(Path(root), self.samples, self.provider, self.vocab, membership)


def _window_frames(sample: GroundingSample, frame_count: int) -> Tuple[int, int]:
    start = int(round(sample.g_s * frame_count))
    end = int(round(sample.g_e * frame_count))
    return start, max(end, start + 1)


def generate_synthetic(cfg: SyntheticConfig) -> SyntheticDataset:
    """Generate a dataset as a pure function of ``cfg`` (including its seed).

    Every sample draws 1-3 signal tokens; frames inside the planted
    boundary carry the unit-normalized sum of those tokens' directions plus
    Gaussian noise of scale sigma, frames outside carry noise only (or a
    distractor pattern of other tokens when ``distractors`` > 0).

    With ``paired`` set, every video carries two token windows and only
    word order tells which one the query grounds.
    """
    rng = np.random.default_rng(cfg.seed)
    words = vocabulary_words(cfg.vocab_size, cfg.num_signal_tokens)
    n_template = len(TEMPLATE_WORDS)
    signal_words = words[n_template:n_template + cfg.num_signal_tokens]
    filler_words = words[n_template + cfg.num_signal_tokens:]
    directions, _ = np.linalg.qr(rng.standard_normal((cfg.d_raw, cfg.num_signal_tokens)))

    provider = MemoryFeatureProvider()
    samples: List[GroundingSample] = []
    for i in range(cfg.num_samples):
        video_id = f"v{i:05d}"
        F = int(rng.integers(cfg.min_frames, cfg.max_frames + 1))
        if cfg.paired:
            tokens, (start, end), frames = _plant_pair(rng, cfg, F, directions)
        else:
            k = int(rng.integers(cfg.min_signal, cfg.max_signal + 1))
            tokens = rng.choice(cfg.num_signal_tokens, size=k, replace=False)
            pattern = directions[:, tokens].sum(axis=1)
            pattern /= np.linalg.norm(pattern)

            width = rng.uniform(cfg.min_width, cfg.max_width)
            start, end = _frame_window(rng.uniform(0.0, 1.0 - width), width, F)

            frames = cfg.sigma * rng.standard_normal((F, cfg.d_raw))
            frames[start:end] += pattern
        _plant_distractors(rng, cfg, frames, directions, tokens, start, end)
        frames = frames.astype(np.float32).astype(np.float64)

        n_fill = int(rng.integers(0, cfg.max_filler + 1)) if filler_words else 0
        filler = [filler_words[j] for j in rng.choice(len(filler_words), size=n_fill)] if n_fill else []
        query = get_query([signal_words[t] for t in tokens], filler)

        provider.save(video_id, RawVideo(frames, F / cfg.fps))
        samples.append(GroundingSample(f"{video_id}_0", video_id, query, start / cfg.fps, end / cfg.fps,
                                       F / cfg.fps))

    vocab = Vocabulary(words)
    splits = split(samples, cfg.fractions, cfg.seed)
    logger.info(f"Generated {len(samples)} synthetic samples "
                f"({', '.join(f'{k}={len(v)}' for k, v in splits.items())})")
    return SyntheticDataset(cfg, samples, provider, vocab, splits, directions, signal_words)


def _frame_window(g_s: float, width: float, F: int) -> Tuple[int, int]:
    start = min(int(round(g_s * F)), F - 1)
    return start, min(max(int(round((g_s + width) * F)), start + 1), F)


def _plant_pair(rng: np.random.Generator, cfg: SyntheticConfig, F: int,
                directions: np.ndarray) -> Tuple[np.ndarray, Tuple[int, int], np.ndarray]:
    """Plant two disjoint windows keyed by two tokens; the query's first token owns the boundary.

    The target window precedes its companion with probability ``order_bias``,
    so word order and temporal order agree on a biased split.
    """
    tokens = rng.choice(cfg.num_signal_tokens, size=2, replace=False)
    widths = rng.uniform(cfg.min_width, min(cfg.max_width, 0.5), size=2)
    first = rng.uniform(0.0, 1.0 - widths.sum())
    second = rng.uniform(first + widths[0], 1.0 - widths[1])
    windows = [_frame_window(first, widths[0], F), _frame_window(second, widths[1], F)]
    if rng.uniform() >= cfg.order_bias:
        windows.reverse()

    frames = cfg.sigma * rng.standard_normal((F, cfg.d_raw))
    for token, (start, end) in zip(tokens, windows):
        frames[start:end] += directions[:, token]
    return tokens, windows[0], frames


def _plant_distractors(rng: np.random.Generator, cfg: SyntheticConfig, frames: np.ndarray,
                       directions: np.ndarray, tokens: np.ndarray, start: int, end: int) -> None:
    others = [t for t in range(cfg.num_signal_tokens) if t not in set(tokens.tolist())]
    width = end - start
    F = frames.shape[0]
    candidates = [s for s in range(0, F - width + 1) if s + width <= start or s >= end]
    for _ in range(cfg.distractors):
        if not others or not candidates:
            return
        token = others[int(rng.integers(len(others)))]
        s = candidates[int(rng.integers(len(candidates)))]
        frames[s:s + width] += directions[:, token]


def save_synthetic(dataset: SyntheticDataset, out: Union[str, Path]) -> Path:
    """Write features, annotations, vocabulary, manifest and the config echo under ``out``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    files = FileFeatureProvider(out / FEATURES_DIR)
    for video_id in dataset.provider.video_ids():
        files.save(video_id, dataset.provider.load(video_id))
    write_annotations(out / ANNOTATIONS_FILE, dataset.samples)
    dataset.vocab.save(out / VOCAB_FILE)
    write_manifest(out / MANIFEST_FILE, dataset.splits)
    dump_config(dataset.config, out / SYNTHETIC_FILE)
    logger.info(f"Synthetic dataset written to {out}")
    return out


# ------------------------------------------------------------ oracles

def least_squares_probe(dataset: SyntheticDataset, threshold: float = 0.5) -> EvalReport:
    """Fit an affine per-frame in-boundary detector by least squares and score its boundaries.

    The predicted boundary of a video spans its first to last frame scoring
    above ``threshold``.
    """
    rows, labels = [], []
    for s in dataset.samples:
        frames = dataset.provider.load(s.video_id).frames
        start, end = _window_frames(s, frames.shape[0])
        label = np.zeros(frames.shape[0])
        label[start:end] = 1.0
        rows.append(frames)
        labels.append(label)
    X = np.concatenate(rows)
    X = np.hstack([X, np.ones((X.shape[0], 1))])
    w, *_ = np.linalg.lstsq(X, np.concatenate(labels), rcond=None)

    pairs = []
    for s, frames in zip(dataset.samples, rows):
        F = frames.shape[0]
        hits = np.flatnonzero(frames @ w[:-1] + w[-1] > threshold)
        predicted = (hits[0] / F, (hits[-1] + 1) / F) if hits.size else (0.0, 0.0)
        pairs.append(((s.g_s, s.g_e), predicted))
    report = evaluate(pairs)
    logger.info(f"Least-squares probe recovers planted boundaries with mIoU {report.miou:.2f}")
    return report


def window_contrast_search(frames: np.ndarray, direction: np.ndarray) -> Tuple[int, int]:
    """Exhaustively find the frame window maximizing mean-inside minus mean-outside projection.

    Windows covering the whole video are skipped; ties keep the first window found.
    """
    projection = frames @ direction
    F = len(projection)
    prefix = np.concatenate([[0.0], np.cumsum(projection)])
    total = prefix[-1]
    best, best_window = -np.inf, (0, 1)
    for start in range(F):
        for end in range(start + 1, F + 1):
            if end - start == F:
                continue
            inside = prefix[end] - prefix[start]
            score = inside / (end - start) - (total - inside) / (F - (end - start))
            if score > best + 1e-12:
                best, best_window = score, (start, end)
    return best_window


def planted_window(dataset: SyntheticDataset, sample: GroundingSample) -> Tuple[int, int]:
    return _window_frames(sample, dataset.provider.load(sample.video_id).frame_count)


def pattern_direction(dataset: SyntheticDataset, sample: GroundingSample) -> np.ndarray:
    """Unit pattern planted for ``sample`` (recovered from its query words)."""
    index = {w: k for k, w in enumerate(dataset.signal_words)}
    tokens = [index[w] for w in sample.query.split() if w in index]
    if dataset.config.paired:
        tokens = tokens[:1]
    pattern = dataset.directions[:, tokens].sum(axis=1)
    return pattern / np.linalg.norm(pattern)

