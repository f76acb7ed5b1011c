"""Video side: segmentation, projection and segment-position embedding."""

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .autodiff import Tape, Tensor
from .errors import ConfigurationError, DataError, InputError, ShapeError
from .params import ParameterStore

logger = logging.getLogger(__name__)

FEATURE_MAGIC = b"FEAT1"
_HEADER = struct.Struct("<IId")


@dataclass
class RawVideo:
    frames: np.ndarray  # frame_count x d_raw
    duration: float

    def __post_init__(self):
        if self.frames.ndim != 2 or self.frames.shape[0] < 1:
            raise InputError(f"video needs at least one frame, got frames of shape {self.frames.shape}")
        if not self.duration > 0:
            raise InputError(f"video duration must be positive, got {self.duration}")

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def d_raw(self) -> int:
        return self.frames.shape[1]


@dataclass
class Segments:
    features: np.ndarray  # d_raw x T, zero on padded columns
    mask: np.ndarray  # T booleans, True = real segment
    centers: np.ndarray  # T normalized window midpoints (0 on padding)
    starts: np.ndarray  # T first-frame indices (-1 on padding)

    @property
    def real_count(self) -> int:
        return int(self.mask.sum())


@dataclass
class VideoFeatures:
    V: Tensor  # d x T
    mask: np.ndarray


def segment_count(frame_count: int, seg_len: int, hop: int) -> int:
    if frame_count < seg_len:
        return 1
    return (frame_count - seg_len) // hop + 1


def segment_video(raw: RawVideo, seg_len: int, hop: int, T: int) -> Segments:
    """Average half-overlapping frame windows into at most T segment columns.

    Videos with more than T windows are uniformly subsampled; shorter ones
    are zero padded with the mask set to False.
    """
    if seg_len % 2 or hop != seg_len // 2:
        raise ConfigurationError(f"seg_len must be even with hop = seg_len / 2, got {seg_len}/{hop}")
    frames = raw.frames
    F = raw.frame_count
    available = segment_count(F, seg_len, hop)
    if available > T:
        logger.debug(f"Subsampling {available} windows to {T} segments")
        chosen = (np.arange(T) * available) // T
    else:
        chosen = np.arange(available)

    features = np.zeros((raw.d_raw, T))
    mask = np.zeros(T, dtype=bool)
    centers = np.zeros(T)
    starts = np.full(T, -1, dtype=np.int64)
    for t, window in enumerate(chosen):
        start = int(window) * hop
        stop = min(start + seg_len, F)
        features[:, t] = frames[start:stop].mean(axis=0)
        mask[t] = True
        centers[t] = (start + stop) / (2.0 * F)
        starts[t] = start
    return Segments(features, mask, centers, starts)


# ---------------------------------------------------------------- parameters

def init_video_parameters(store: ParameterStore, rng: np.random.Generator, d: int, d_raw: int, T: int) -> None:
    bound = np.sqrt(6.0 / (d + d_raw))
    store.add("video.W_em", rng.uniform(-bound, bound, size=(d, d_raw)))
    store.add("video.position", rng.uniform(-0.1, 0.1, size=(d, T)))


# ------------------------------------------------------------------- forward

def project_embed(tape: Tape, segments: np.ndarray, params: ParameterStore) -> Tensor:
    """V_em = ReLU(W_em . segments); no bias, so zero columns stay zero."""
    W_em = params["video.W_em"]
    if segments.shape[0] != W_em.shape[1]:
        raise ShapeError(f"segment features have d_raw={segments.shape[0]}, W_em expects {W_em.shape[1]}")
    return tape.relu(tape.matmul(W_em, tape.constant(segments)))


def add_position(tape: Tape, V_em: Tensor, mask: np.ndarray, params: ParameterStore,
                 enabled: bool = True) -> VideoFeatures:
    if not enabled:
        return VideoFeatures(V_em, mask)
    return VideoFeatures(tape.add(V_em, params["video.position"]), mask)


def encode_video(tape: Tape, segments: Segments, params: ParameterStore, enabled: bool = True) -> VideoFeatures:
    V_em = project_embed(tape, segments.features, params)
    return add_position(tape, V_em, segments.mask, params, enabled)


# --------------------------------------------------------------- FEAT1 codec

def write_features(path: Union[str, Path], raw: RawVideo) -> None:
    """Write ``FEAT1`` + frame_count, d_raw, duration + little-endian float32 frames."""
    with open(path, "wb") as handle:
        handle.write(FEATURE_MAGIC)
        handle.write(_HEADER.pack(raw.frame_count, raw.d_raw, float(raw.duration)))
        handle.write(np.ascontiguousarray(raw.frames, dtype="<f4").tobytes())


def read_features(path: Union[str, Path]) -> RawVideo:
    """Read a FEAT1 feature file.

    Raises:
        FileNotFoundError: If the file does not exist
        DataError: On a bad magic string or a truncated payload
    """
    blob = Path(path).read_bytes()
    if not blob.startswith(FEATURE_MAGIC):
        raise DataError(f"{path} is not a FEAT1 feature file")
    offset = len(FEATURE_MAGIC)
    frame_count, d_raw, duration = _HEADER.unpack_from(blob, offset)
    offset += _HEADER.size
    expected = frame_count * d_raw * 4
    if len(blob) - offset != expected:
        raise DataError(f"{path}: expected {expected} payload bytes, found {len(blob) - offset}")
    frames = np.frombuffer(blob, dtype="<f4", offset=offset).reshape(frame_count, d_raw).astype(np.float64)
    return RawVideo(frames, duration)


def read_duration(path: Union[str, Path]) -> float:
    with open(path, "rb") as handle:
        head = handle.read(len(FEATURE_MAGIC) + _HEADER.size)
    if not head.startswith(FEATURE_MAGIC) or len(head) < len(FEATURE_MAGIC) + _HEADER.size:
        raise DataError(f"{path} is not a FEAT1 feature file")
    return _HEADER.unpack_from(head, len(FEATURE_MAGIC))[2]
