"""Query side: vocabulary, tokenization, position-aware embedding and Bi-LSTM."""

import logging
import re
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from .autodiff import Tape, Tensor
from .errors import ContractError, EmptyQueryError
from .params import ParameterStore

logger = logging.getLogger(__name__)

MAX_WORDS = 25
UNKNOWN_INDEX = 0

_PUNCTUATION = re.compile(f"[{re.escape(string.punctuation)}]")


class Vocabulary:
    """Token -> index map; index 0 is reserved for unknown tokens."""

    def __init__(self, tokens: Iterable[str] = ()):
        self._index: Dict[str, int] = {}
        self._tokens: List[str] = ["<unk>"]
        for token in tokens:
            self.add(token)

    def add(self, token: str) -> int:
        if token not in self._index:
            self._index[token] = len(self._tokens)
            self._tokens.append(token)
        return self._index[token]

    def lookup(self, token: str) -> int:
        return self._index.get(token, UNKNOWN_INDEX)

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    @property
    def tokens(self) -> List[str]:
        return self._tokens[1:]

    @classmethod
    def build(cls, sentences: Iterable[str]) -> "Vocabulary":
        """Sorted vocabulary over the normalized words of ``sentences``."""
        words = set()
        for sentence in sentences:
            words.update(normalize(sentence))
        return cls(sorted(words))

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text("".join(f"{t}\n" for t in self.tokens), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(line.strip() for line in lines if line.strip())


@dataclass
class QueryTokens:
    indices: np.ndarray
    words: Tuple[str, ...]

    def __len__(self) -> int:
        return len(self.indices)


@dataclass
class QueryFeatures:
    H: Tensor  # d x N word features
    s: Tensor  # d sentence feature


def normalize(sentence: str) -> List[str]:
    """Lowercase, strip punctuation and split on whitespace."""
    return _PUNCTUATION.sub("", sentence.lower()).split()


def tokenize(sentence: str, vocab: Vocabulary, max_words: int = MAX_WORDS) -> QueryTokens:
    """Map a sentence to at most ``max_words`` vocabulary indices, keeping the first words.

    Raises:
        EmptyQueryError: If no token survives normalization
    """
    words = normalize(sentence)
    if not words:
        raise EmptyQueryError(f"query has no tokens: {sentence!r}")
    if len(words) > max_words:
        logger.debug(f"Truncating query from {len(words)} to {max_words} words")
        words = words[:max_words]
    indices = np.array([vocab.lookup(w) for w in words], dtype=np.int64)
    return QueryTokens(indices, tuple(words))


# ---------------------------------------------------------------- parameters

def init_text_parameters(store: ParameterStore, rng: np.random.Generator, d: int, vocab_size: int,
                         max_words: int = MAX_WORDS) -> None:
    h = d // 2
    store.add("query.embedding", rng.uniform(-0.1, 0.1, size=(d, vocab_size)))
    store.add("query.position", rng.uniform(-0.1, 0.1, size=(d, max_words)))
    for direction in ("fwd", "bwd"):
        bound_w = np.sqrt(6.0 / (d + 4 * h))
        bound_u = np.sqrt(6.0 / (h + 4 * h))
        store.add(f"lstm.{direction}.W", rng.uniform(-bound_w, bound_w, size=(4 * h, d)))
        store.add(f"lstm.{direction}.U", rng.uniform(-bound_u, bound_u, size=(4 * h, h)))
        bias = np.zeros(4 * h)
        bias[h:2 * h] = 1.0  # forget gate
        store.add(f"lstm.{direction}.b", bias)


# ------------------------------------------------------------------- forward

def embed_query(tape: Tape, tokens: QueryTokens, params: ParameterStore, enabled: bool = True) -> Tensor:
    """Q = Q_em + P_q; the position term is dropped when ``enabled`` is False."""
    position = params["query.position"]
    n = len(tokens)
    if n > position.shape[1]:
        raise ContractError(f"query of {n} tokens exceeds the position table of {position.shape[1]}")
    Q = tape.take(params["query.embedding"], (slice(None), tokens.indices))
    if enabled:
        Q = tape.add(Q, tape.take(position, (slice(None), slice(0, n))))
    return Q


def _lstm_pass(tape: Tape, Q: Tensor, params: ParameterStore, direction: str, order: Sequence[int]) -> Dict[int, Tensor]:
    W, U, b = (params[f"lstm.{direction}.{k}"] for k in ("W", "U", "b"))
    h_size = U.shape[1]
    inputs = tape.add(tape.matmul(W, Q), b)  # 4h x N
    h = tape.constant(np.zeros(h_size))
    c = tape.constant(np.zeros(h_size))
    states: Dict[int, Tensor] = {}
    for n in order:
        z = tape.add(tape.take(inputs, (slice(None), n)), tape.matmul(U, h))
        i = tape.sigmoid(tape.take(z, slice(0, h_size)))
        f = tape.sigmoid(tape.take(z, slice(h_size, 2 * h_size)))
        g = tape.tanh(tape.take(z, slice(2 * h_size, 3 * h_size)))
        o = tape.sigmoid(tape.take(z, slice(3 * h_size, 4 * h_size)))
        c = tape.add(tape.mul(f, c), tape.mul(i, g))
        h = tape.mul(o, tape.tanh(c))
        states[n] = h
    return states


def bilstm_encode(tape: Tape, Q: Tensor, params: ParameterStore) -> QueryFeatures:
    """Run forward and backward LSTMs; h_n = fwd_n || bwd_n and s = fwd_N || bwd_1."""
    n = Q.shape[1]
    if n < 1:
        raise ContractError("bilstm_encode needs at least one word")
    forward = _lstm_pass(tape, Q, params, "fwd", range(n))
    backward = _lstm_pass(tape, Q, params, "bwd", range(n - 1, -1, -1))
    H_fwd = tape.stack([forward[k] for k in range(n)], axis=1)
    H_bwd = tape.stack([backward[k] for k in range(n)], axis=1)
    H = tape.concat([H_fwd, H_bwd], axis=0)
    s = tape.concat([forward[n - 1], backward[0]], axis=0)
    return QueryFeatures(H, s)
