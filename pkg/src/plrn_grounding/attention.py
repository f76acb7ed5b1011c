"""Query attention network (semantic phrase) and Hadamard multi-modal fusion."""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, Tuple, Union

import numpy as np

from .autodiff import Tape, Tensor
from .params import ParameterStore
from .text_encoder import QueryFeatures
from .video_encoder import VideoFeatures

logger = logging.getLogger(__name__)


@dataclass
class PhraseResult:
    p: Tensor  # d
    a: Tensor  # N


@dataclass
class FusedFeatures:
    L_in: Tensor  # d x T
    mask: np.ndarray


def xavier(rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    fan_out, fan_in = (shape[0], shape[1]) if len(shape) == 2 else (1, shape[0])
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def init_attention_parameters(store: ParameterStore, rng: np.random.Generator, d: int) -> None:
    for name in ("qan.W_gs", "qan.W_ag", "qan.W_ah"):
        store.add(name, xavier(rng, (d, d)))
    store.add("qan.w_qat", xavier(rng, (d,)))
    for name in ("fusion.W_lv", "fusion.W_lp", "fusion.W_mf"):
        store.add(name, xavier(rng, (d, d)))


def query_attention(tape: Tape, qf: QueryFeatures, params: ParameterStore) -> PhraseResult:
    """Attend over words: g = ReLU(W_gs s), a = softmax(w_qat . tanh(W_ag g + W_ah H)), p = H a."""
    g = tape.relu(tape.matmul(params["qan.W_gs"], qf.s))
    hidden = tape.tanh(tape.add(tape.matmul(params["qan.W_ah"], qf.H), tape.matmul(params["qan.W_ag"], g)))
    scores = tape.matmul(params["qan.w_qat"], hidden)
    a = tape.softmax(scores, axis=0)
    p = tape.matmul(qf.H, a)
    return PhraseResult(p, a)


def fuse(tape: Tape, vf: VideoFeatures, p: Tensor, params: ParameterStore) -> FusedFeatures:
    """l_t = W_mf (W_lv v_t * W_lp p), with padded columns forced to zero."""
    video = tape.matmul(params["fusion.W_lv"], vf.V)
    phrase = tape.matmul(params["fusion.W_lp"], p)
    fused = tape.matmul(params["fusion.W_mf"], tape.mul(video, phrase))
    keep = tape.constant(np.broadcast_to(vf.mask.astype(np.float64), fused.shape))
    return FusedFeatures(tape.mul(fused, keep), vf.mask)


def sentence_fusion_bypass(tape: Tape, vf: VideoFeatures, s: Tensor, params: ParameterStore) -> FusedFeatures:
    """Fuse with the sentence feature instead of the phrase feature (QAN ablation)."""
    return fuse(tape, vf, s, params)


def dump_word_attention(path: Union[str, Path], rows: Iterable[Tuple[str, Sequence[str], np.ndarray]]) -> None:
    """Write ``sample_id, position, word, weight`` rows for each attended query."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["sample_id", "position", "word", "weight"])
        for sample_id, words, weights in rows:
            for n, (word, weight) in enumerate(zip(words, weights)):
                writer.writerow([sample_id, n, word, repr(float(weight))])
    logger.info(f"Word attention written to {path}")
