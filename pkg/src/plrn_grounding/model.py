"""The full grounding network: encoders, query attention, fusion, contexts and regression head."""

import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .attention import fuse, init_attention_parameters, query_attention, sentence_fusion_bypass
from .autodiff import Tape
from .base_provider import FeatureProvider
from .config import TrainConfig
from .context import global_context, init_context_parameters, local_context
from .data import GroundingSample
from .head import GroundingPrediction, init_head_parameters, predict_boundaries, temporal_pool
from .losses import GroundTruth, ground_truth
from .params import ParameterStore
from .text_encoder import QueryTokens, Vocabulary, bilstm_encode, embed_query, init_text_parameters, tokenize
from .video_encoder import Segments, encode_video, init_video_parameters, segment_video

logger = logging.getLogger(__name__)


@dataclass
class EncodedSample:
    """Model-ready view of a GroundingSample: tokens, segments and ground truth."""

    sample_id: str
    tokens: QueryTokens
    segments: Segments
    duration: float
    gt: Optional[GroundTruth] = None


@dataclass
class ForwardTrace:
    word_attention: Optional[np.ndarray] = None
    nonlocal_attention: List[np.ndarray] = field(default_factory=list)
    temporal_attention: Optional[np.ndarray] = None


def encode_sample(sample: GroundingSample, provider: FeatureProvider, vocab: Vocabulary,
                  cfg: TrainConfig) -> EncodedSample:
    tokens = tokenize(sample.query, vocab, cfg.max_words)
    segments = segment_video(provider.load(sample.video_id), cfg.seg_len, cfg.hop, cfg.T)
    gt = ground_truth(sample.g_s, sample.g_e, segments.centers, segments.mask)
    return EncodedSample(sample.sample_id, tokens, segments, sample.duration, gt)


def init_parameters(cfg: TrainConfig, vocab_size: int, d_raw: int, seed: Optional[int] = None) -> ParameterStore:
    """Seeded initialization of every trainable parameter.

    Parameters of ablated components are still created so checkpoints of
    every variant share one layout.
    """
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    store = ParameterStore()
    init_text_parameters(store, rng, cfg.d, vocab_size, cfg.max_words)
    init_video_parameters(store, rng, cfg.d, d_raw, cfg.T)
    init_attention_parameters(store, rng, cfg.d)
    init_context_parameters(store, rng, cfg.d, cfg.kernel_width, cfg.nl_blocks, cfg.nl_heads)
    init_head_parameters(store, rng, cfg.d)
    logger.debug(f"Initialized {store.num_parameters()} parameters in {len(store)} tensors")
    return store


class PLRN:
    """Position-aware location regression network over a ParameterStore."""

    def __init__(self, cfg: TrainConfig, params: ParameterStore):
        self.cfg = cfg
        self.params = params

    @classmethod
    def create(cls, cfg: TrainConfig, vocab_size: int, d_raw: int) -> "PLRN":
        return cls(cfg, init_parameters(cfg, vocab_size, d_raw))

    def forward(self, tape: Tape, sample: EncodedSample) -> Tuple[GroundingPrediction, ForwardTrace]:
        cfg, params = self.cfg, self.params
        trace = ForwardTrace()

        Q = embed_query(tape, sample.tokens, params, enabled=cfg.pos_embed_word)
        qf = bilstm_encode(tape, Q, params)
        vf = encode_video(tape, sample.segments, params, enabled=cfg.pos_embed_video)

        if cfg.use_qan:
            phrase = query_attention(tape, qf, params)
            trace.word_attention = phrase.a.data
            fused = fuse(tape, vf, phrase.p, params)
        else:
            fused = sentence_fusion_bypass(tape, vf, qf.s, params)

        L = local_context(tape, fused.L_in, params) if cfg.use_lcn else fused.L_in
        G = L
        if cfg.use_gcn:
            context = global_context(tape, L, fused.mask, params, cfg.nl_blocks, cfg.nl_heads)
            G = context.G
            trace.nonlocal_attention = context.attention

        b, r = temporal_pool(tape, G, fused.mask, params)
        trace.temporal_attention = b.data
        t_se, t_cw = predict_boundaries(tape, r, params)
        return GroundingPrediction(t_se, t_cw, b, r), trace


@dataclass
class ModelSize:
    parameters: int
    memory_mb: float
    forward_seconds: float


def model_size(cfg: TrainConfig, vocab_size: int, d_raw: int, repeats: int = 3) -> ModelSize:
    """Parameter count, 32-bit parameter memory and mean forward time on a random sample."""
    model = PLRN.create(cfg, vocab_size, d_raw)
    rng = np.random.default_rng(cfg.seed)
    n_words = min(cfg.max_words, 8)
    tokens = QueryTokens(rng.integers(0, vocab_size, size=n_words), tuple(f"w{k}" for k in range(n_words)))
    features = rng.standard_normal((d_raw, cfg.T))
    segments = Segments(features, np.ones(cfg.T, dtype=bool), (np.arange(cfg.T) + 0.5) / cfg.T,
                        np.arange(cfg.T) * cfg.hop)
    sample = EncodedSample("probe", tokens, segments, 1.0)
    started = time.perf_counter()
    for _ in range(repeats):
        model.forward(Tape(), sample)
    elapsed = (time.perf_counter() - started) / repeats
    count = model.params.num_parameters()
    return ModelSize(count, count * 4 / 2 ** 20, elapsed)
