"""Named trainable parameters, Adam state and the PLRN1 checkpoint codec."""

import io
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Dict, Iterator, List, Mapping, Optional, Tuple, Union

import numpy as np

from .autodiff import Tensor
from .errors import CompatibilityError, ContractError, DataError, TrainingStateError

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"PLRN1"


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0


@dataclass
class ParameterStore:
    """Ordered name -> Tensor map plus per-parameter optimizer state."""

    tensors: Dict[str, Tensor] = field(default_factory=dict)
    state: Dict[str, AdamState] = field(default_factory=dict)

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self.tensors:
            raise ContractError(f"duplicate parameter name '{name}'")
        tensor = Tensor(data, requires_grad=True, name=name)
        self.tensors[name] = tensor
        self.state[name] = AdamState(np.zeros_like(tensor.data), np.zeros_like(tensor.data))
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self.tensors)

    def __len__(self) -> int:
        return len(self.tensors)

    def items(self):
        return self.tensors.items()

    def num_parameters(self) -> int:
        return int(sum(t.data.size for t in self.tensors.values()))

    def zero_grad(self) -> None:
        for tensor in self.tensors.values():
            tensor.zero_grad()

    def gradients_finite(self) -> bool:
        return all(t.grad is None or np.all(np.isfinite(t.grad)) for t in self.tensors.values())

    # ------------------------------------------------------------- snapshot

    def to_bytes(self, config: Optional[Mapping[str, float]] = None) -> bytes:
        buffer = io.BytesIO()
        save_checkpoint(buffer, self, config)
        return buffer.getvalue()


def adam_step(store: ParameterStore, lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> None:
    """Apply one bias-corrected Adam update to every parameter, then zero the gradients.

    Raises:
        TrainingStateError: If any parameter has no gradient buffer
    """
    missing = [name for name, t in store.tensors.items() if t.grad is None]
    if missing:
        raise TrainingStateError(f"gradients missing for {len(missing)} parameters, e.g. '{missing[0]}'")
    for name, tensor in store.tensors.items():
        state = store.state[name]
        grad = tensor.grad
        state.step += 1
        state.m = beta1 * state.m + (1.0 - beta1) * grad
        state.v = beta2 * state.v + (1.0 - beta2) * grad * grad
        m_hat = state.m / (1.0 - beta1 ** state.step)
        v_hat = state.v / (1.0 - beta2 ** state.step)
        tensor.data -= lr * m_hat / (np.sqrt(v_hat) + eps)
        tensor.zero_grad()


# ------------------------------------------------------------------ codec

def _write_record(handle: BinaryIO, name: str, array: np.ndarray) -> None:
    encoded = name.encode("utf-8")
    handle.write(struct.pack("<I", len(encoded)))
    handle.write(encoded)
    handle.write(struct.pack("<I", array.ndim))
    handle.write(struct.pack(f"<{array.ndim}I", *array.shape))
    handle.write(np.ascontiguousarray(array, dtype="<f8").tobytes())


def _read_exact(handle: BinaryIO, size: int) -> bytes:
    chunk = handle.read(size)
    if len(chunk) != size:
        raise DataError("truncated checkpoint")
    return chunk


def _read_record(handle: BinaryIO) -> Tuple[str, np.ndarray]:
    (name_len,) = struct.unpack("<I", _read_exact(handle, 4))
    name = _read_exact(handle, name_len).decode("utf-8")
    (rank,) = struct.unpack("<I", _read_exact(handle, 4))
    dims = struct.unpack(f"<{rank}I", _read_exact(handle, 4 * rank)) if rank else ()
    count = int(np.prod(dims)) if dims else 1
    payload = np.frombuffer(_read_exact(handle, 8 * count), dtype="<f8").astype(np.float64)
    return name, payload.reshape(dims)


def _write_section(handle: BinaryIO, records: List[Tuple[str, np.ndarray]]) -> None:
    handle.write(struct.pack("<I", len(records)))
    for name, array in records:
        _write_record(handle, name, array)


def _read_section(handle: BinaryIO) -> List[Tuple[str, np.ndarray]]:
    (count,) = struct.unpack("<I", _read_exact(handle, 4))
    return [_read_record(handle) for _ in range(count)]


def save_checkpoint(target: Union[str, Path, BinaryIO], store: ParameterStore,
                    config: Optional[Mapping[str, float]] = None) -> None:
    """Write parameters, then Adam state, then optional config values.

    Layout: magic ``PLRN1`` followed by three sections, each a record count
    and records of (name length, name, rank, dims, little-endian float64
    payload).
    """
    if isinstance(target, (str, Path)):
        with open(target, "wb") as handle:
            save_checkpoint(handle, store, config)
        logger.info(f"Checkpoint with {len(store)} parameters written to {target}")
        return
    target.write(CHECKPOINT_MAGIC)
    _write_section(target, [(name, t.data) for name, t in store.tensors.items()])
    optimizer: List[Tuple[str, np.ndarray]] = []
    for name, state in store.state.items():
        optimizer.append((f"m/{name}", state.m))
        optimizer.append((f"v/{name}", state.v))
        optimizer.append((f"step/{name}", np.array([float(state.step)])))
    _write_section(target, optimizer)
    _write_section(target, [(f"config.{k}", np.array([float(v)])) for k, v in (config or {}).items()])


@dataclass
class Checkpoint:
    store: ParameterStore
    config: Dict[str, float]


def load_checkpoint(source: Union[str, Path, BinaryIO]) -> Checkpoint:
    """Read a PLRN1 checkpoint.

    Raises:
        DataError: On a bad magic string or truncated content
    """
    if isinstance(source, (str, Path)):
        with open(source, "rb") as handle:
            return load_checkpoint(handle)
    if source.read(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
        raise DataError("not a PLRN1 checkpoint")
    store = ParameterStore()
    for name, array in _read_section(source):
        store.add(name, array)
    for name, array in _read_section(source):
        kind, _, param = name.partition("/")
        if param not in store.state:
            raise DataError(f"optimizer state for unknown parameter '{param}'")
        state = store.state[param]
        if kind == "m":
            state.m = array
        elif kind == "v":
            state.v = array
        elif kind == "step":
            state.step = int(array[0])
        else:
            raise DataError(f"unknown optimizer record '{name}'")
    config = {name.removeprefix("config."): float(array[0]) for name, array in _read_section(source)}
    return Checkpoint(store, config)


def check_compatible(expected: ParameterStore, found: ParameterStore) -> None:
    """Raise CompatibilityError naming the first differing parameter."""
    for name, tensor in expected.tensors.items():
        if name not in found:
            raise CompatibilityError(name, tensor.shape, "missing")
        if found[name].shape != tensor.shape:
            raise CompatibilityError(name, tensor.shape, found[name].shape)
    extra = [name for name in found if name not in expected]
    if extra:
        raise CompatibilityError(extra[0], "absent", found[extra[0]].shape)
