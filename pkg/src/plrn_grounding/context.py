"""Local context (residual temporal convolution) and global context (multi-head non-local blocks)."""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from .autodiff import Tape, Tensor
from .errors import ConfigurationError
from .params import ParameterStore

logger = logging.getLogger(__name__)


@dataclass
class ContextFeatures:
    L: Tensor
    G: Tensor
    mask: np.ndarray
    attention: List[np.ndarray] = field(default_factory=list)  # per block: heads x T x T


def init_context_parameters(store: ParameterStore, rng: np.random.Generator, d: int, kernel_width: int,
                            num_blocks: int, num_heads: int) -> None:
    if kernel_width % 2 == 0:
        raise ConfigurationError(f"kernel width must be odd, got {kernel_width}")
    if d % num_heads:
        raise ConfigurationError(f"d={d} is not divisible by {num_heads} heads")
    bound = np.sqrt(6.0 / (2 * d * kernel_width))
    store.add("lcn.conv_a", rng.uniform(-bound, bound, size=(d, d, kernel_width)))
    store.add("lcn.conv_b", rng.uniform(-bound, bound, size=(d, d, kernel_width)))
    dh = d // num_heads
    bound = np.sqrt(6.0 / (d + dh))
    for block in range(num_blocks):
        for head in range(num_heads):
            for name in ("W_qry", "W_key", "W_val"):
                store.add(f"gcn.{block}.{head}.{name}", rng.uniform(-bound, bound, size=(dh, d)))


def local_context(tape: Tape, X: Tensor, params: ParameterStore) -> Tensor:
    """L = ReLU(X + Conv_B(ReLU(Conv_A(X)))), both convolutions same-padded."""
    inner = tape.relu(tape.conv1d_same(X, params["lcn.conv_a"]))
    return tape.relu(tape.add(X, tape.conv1d_same(inner, params["lcn.conv_b"])))


def non_local_block(tape: Tape, L: Tensor, mask: np.ndarray, params: ParameterStore, block: int,
                    num_heads: int) -> Tuple[Tensor, np.ndarray]:
    """One residual multi-head self-attention block over the temporal axis.

    Each head projects L to d/num_heads channels, attends with scale
    sqrt(d/num_heads) over real segments only, and the head outputs are
    concatenated back to d channels before the residual add.

    Returns:
        (G, attention maps of shape heads x T x T)
    """
    d, T = L.shape
    if d % num_heads:
        raise ConfigurationError(f"d={d} is not divisible by {num_heads} heads")
    scale = 1.0 / np.sqrt(d / num_heads)
    key_mask = np.broadcast_to(mask[None, :], (T, T))
    heads, maps = [], []
    for head in range(num_heads):
        prefix = f"gcn.{block}.{head}"
        q = tape.matmul(params[f"{prefix}.W_qry"], L)
        k = tape.matmul(params[f"{prefix}.W_key"], L)
        v = tape.matmul(params[f"{prefix}.W_val"], L)
        scores = tape.scale(tape.matmul(tape.transpose(q), k), scale)  # query rows, key columns
        weights = tape.softmax(scores, axis=1, mask=key_mask)
        heads.append(tape.matmul(v, tape.transpose(weights)))
        maps.append(weights.data)
    G = tape.add(L, tape.concat(heads, axis=0))
    return G, np.stack(maps)


def global_context(tape: Tape, L: Tensor, mask: np.ndarray, params: ParameterStore, num_blocks: int = 2,
                   num_heads: int = 4) -> ContextFeatures:
    G = L
    attention = []
    for block in range(num_blocks):
        G, maps = non_local_block(tape, G, mask, params, block, num_heads)
        attention.append(maps)
    return ContextFeatures(L, G, mask, attention)


def dump_nonlocal_attention(path: Union[str, Path], sample_id: str, attention: List[np.ndarray]) -> None:
    """Write ``sample_id, block, head, query, key, weight`` rows for one sample."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["sample_id", "block", "head", "query", "key", "weight"])
        for block, maps in enumerate(attention):
            for head, weights in enumerate(maps):
                for i, j in np.ndindex(weights.shape):
                    writer.writerow([sample_id, block, head, i, j, repr(float(weights[i, j]))])
    logger.debug(f"Non-local attention for {sample_id} written to {path}")
