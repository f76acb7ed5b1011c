"""Annotations, dataset directories and train/val/test splits."""

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .base_provider import FeatureProvider
from .errors import ConfigurationError, DataError, ParseError
from .providers import get_provider_from_env
from .text_encoder import Vocabulary

logger = logging.getLogger(__name__)

ANNOTATIONS_FILE = "annotations.txt"
VOCAB_FILE = "vocab.txt"
MANIFEST_FILE = "manifest.txt"
FEATURES_DIR = "features"
SPLITS = ("train", "val", "test")

_LINE = re.compile(r"^(\S+)\s+(\S+)\s+(\S+?)##(.*)$")


@dataclass
class GroundingSample:
    """One video-query pair; the boundary is kept in seconds so round-trips are exact."""

    sample_id: str
    video_id: str
    query: str
    start: float
    end: float
    duration: float

    def __post_init__(self):
        if not self.query.strip():
            raise DataError(f"sample {self.sample_id} has an empty query")
        if not self.duration > 0:
            raise DataError(f"sample {self.sample_id} has non-positive duration {self.duration}")
        if not 0.0 <= self.start < self.end <= self.duration:
            raise DataError(f"sample {self.sample_id} boundary ({self.start}, {self.end}) "
                            f"is not inside [0, {self.duration}]")

    @property
    def g_s(self) -> float:
        return self.start / self.duration

    @property
    def g_e(self) -> float:
        return self.end / self.duration


def parse_annotations(path: Union[str, Path], provider: FeatureProvider) -> List[GroundingSample]:
    """Parse ``video_id start end##sentence`` lines.

    Sample ids are ``<video_id>_<k>`` where k counts that video's earlier lines.

    Raises:
        ParseError: On a malformed line (the message names the line)
        DataError: If end <= start
        FileNotFoundError: If a referenced feature file is missing
    """
    samples: List[GroundingSample] = []
    seen: Dict[str, int] = {}
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        match = _LINE.match(line.strip())
        if match is None:
            raise ParseError("expected 'video_id start end##sentence'", line=line_no)
        video_id, start_text, end_text, sentence = match.groups()
        try:
            start, end = float(start_text), float(end_text)
        except ValueError:
            raise ParseError(f"non-numeric boundary '{start_text} {end_text}'", line=line_no) from None
        if end <= start:
            raise DataError(f"end {end} is not after start {start}", line=line_no)
        if not sentence.strip():
            raise ParseError("empty sentence", line=line_no)
        duration = provider.duration(video_id)
        if end > duration:
            logger.warning(f"{path}:{line_no}: end {end} exceeds the video duration {duration}; clamped")
            end = duration
        k = seen.get(video_id, 0)
        seen[video_id] = k + 1
        try:
            samples.append(GroundingSample(f"{video_id}_{k}", video_id, sentence.strip(), start, end, duration))
        except DataError as e:
            raise DataError(str(e), line=line_no) from None
    logger.info(f"Parsed {len(samples)} annotations from {path}")
    return samples


def write_annotations(path: Union[str, Path], samples: Iterable[GroundingSample]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for s in samples:
            handle.write(f"{s.video_id} {s.start!r} {s.end!r}##{s.query}\n")


def split(samples: Sequence[GroundingSample], fractions: Tuple[float, float, float] = (0.8, 0.1, 0.1),
          seed: int = 0) -> Dict[str, List[GroundingSample]]:
    """Seeded disjoint train/val/test partition.

    Raises:
        ConfigurationError: If fractions are negative or do not sum to 1
    """
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigurationError(f"split fractions must be three nonnegative numbers summing to 1, got {fractions}")
    n = len(samples)
    order = np.random.default_rng(seed).permutation(n)
    n_val = int(round(fractions[1] * n))
    n_test = int(round(fractions[2] * n))
    n_train = n - n_val - n_test
    if n_train < 0:
        n_val += n_train
        n_train = 0
    bounds = [0, n_train, n_train + n_val, n]
    return {name: [samples[i] for i in sorted(order[bounds[k]:bounds[k + 1]])]
            for k, name in enumerate(SPLITS)}


def write_manifest(path: Union[str, Path], splits: Dict[str, List[GroundingSample]]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for name in SPLITS:
            for s in splits.get(name, []):
                handle.write(f"{name} {s.sample_id}\n")


def read_manifest(path: Union[str, Path]) -> Dict[str, List[str]]:
    membership: Dict[str, List[str]] = {name: [] for name in SPLITS}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2 or parts[0] not in membership:
            raise ParseError(f"expected '<{'|'.join(SPLITS)}> <sample_id>'", line=line_no)
        membership[parts[0]].append(parts[1])
    return membership


@dataclass
class Dataset:
    root: Path
    samples: List[GroundingSample]
    provider: FeatureProvider
    vocab: Vocabulary
    membership: Dict[str, List[str]] = field(default_factory=dict)

    def subset(self, name: str) -> List[GroundingSample]:
        """Samples of one split; the whole dataset when no manifest exists."""
        if name not in SPLITS:
            raise ConfigurationError(f"unknown split '{name}'. Supported splits: {', '.join(SPLITS)}")
        if not self.membership:
            return list(self.samples)
        wanted = set(self.membership.get(name, []))
        return [s for s in self.samples if s.sample_id in wanted]


def load_dataset(root: Union[str, Path], provider: Optional[FeatureProvider] = None) -> Dataset:
    """Load ``annotations.txt``, features, vocabulary and manifest from a dataset directory."""
    root = Path(root)
    annotations = root / ANNOTATIONS_FILE
    if not annotations.is_file():
        raise FileNotFoundError(f"annotation file not found: {annotations}")
    provider = provider or get_provider_from_env(root / FEATURES_DIR)
    samples = parse_annotations(annotations, provider)
    membership = read_manifest(root / MANIFEST_FILE) if (root / MANIFEST_FILE).is_file() else {}
    if (root / VOCAB_FILE).is_file():
        vocab = Vocabulary.load(root / VOCAB_FILE)
    else:
        train_ids = set(membership.get("train", [])) if membership else None
        vocab = Vocabulary.build(s.query for s in samples if train_ids is None or s.sample_id in train_ids)
    logger.info(f"Loaded dataset {root}: {len(samples)} samples, vocabulary of {len(vocab)}")
    return Dataset(root, samples, provider, vocab, membership)
