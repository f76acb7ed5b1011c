"""Minimal reverse-mode automatic differentiation on numpy arrays.

A :class:`Tape` executes operations eagerly and records, for each output,
the inputs and a closure mapping the output gradient to input gradients.
``Tape.backward`` replays the record in reverse, so every operation is
visited once and gradients of leaves (parameters) accumulate additively.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError, ContractError, DegenerateMaskError, ShapeError

logger = logging.getLogger(__name__)

LOG_FLOOR = 1e-12

GradFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


class Tensor:
    """Dense float64 array, optionally tracked for gradients."""

    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None, copy: bool = True):
        self.data = np.array(data, dtype=np.float64) if copy else np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"


@dataclass
class _Record:
    output: Tensor
    inputs: Tuple[Tensor, ...]
    grad_fn: GradFn


def _broadcast_kind(a: np.ndarray, b: np.ndarray) -> str:
    """Classify a binary operand pair: identical shapes or vector-against-columns."""
    if a.shape == b.shape:
        return "same"
    if a.ndim == 2 and b.ndim == 1 and b.shape[0] == a.shape[0]:
        return "col_b"
    if b.ndim == 2 and a.ndim == 1 and a.shape[0] == b.shape[0]:
        return "col_a"
    raise ShapeError(f"incompatible shapes {a.shape} and {b.shape}")


def _expand(x: np.ndarray, kind: str, which: str) -> np.ndarray:
    if kind == f"col_{which}":
        return x[:, None]
    return x


def _reduce(grad: np.ndarray, kind: str, which: str) -> np.ndarray:
    if kind == f"col_{which}":
        return grad.sum(axis=1)
    return grad


class Tape:
    """Ordered record of executed differentiable operations."""

    def __init__(self):
        self._records: List[_Record] = []
        self._produced: Dict[int, Tensor] = {}

    def __len__(self) -> int:
        return len(self._records)

    # ------------------------------------------------------------------ record

    def constant(self, data) -> Tensor:
        return Tensor(data, requires_grad=False)

    def _record(self, data: np.ndarray, inputs: Sequence[Tensor], grad_fn: GradFn) -> Tensor:
        requires_grad = any(t.requires_grad for t in inputs)
        out = Tensor(data, requires_grad=requires_grad, copy=False)
        if requires_grad:
            self._records.append(_Record(out, tuple(inputs), grad_fn))
            self._produced[id(out)] = out
        return out

    # -------------------------------------------------------------- arithmetic

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        kind = _broadcast_kind(a.data, b.data)
        out = _expand(a.data, kind, "a") + _expand(b.data, kind, "b")
        return self._record(out, (a, b), lambda g: (_reduce(g, kind, "a"), _reduce(g, kind, "b")))

    def sub(self, a: Tensor, b: Tensor) -> Tensor:
        kind = _broadcast_kind(a.data, b.data)
        out = _expand(a.data, kind, "a") - _expand(b.data, kind, "b")
        return self._record(out, (a, b), lambda g: (_reduce(g, kind, "a"), -_reduce(g, kind, "b")))

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        kind = _broadcast_kind(a.data, b.data)
        ea, eb = _expand(a.data, kind, "a"), _expand(b.data, kind, "b")

        def grad_fn(g):
            return _reduce(g * eb, kind, "a"), _reduce(g * ea, kind, "b")

        return self._record(ea * eb, (a, b), grad_fn)

    def scale(self, x: Tensor, factor: float) -> Tensor:
        return self._record(x.data * factor, (x,), lambda g: (g * factor,))

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        """Matrix (or matrix-vector) product with the usual backward rules."""
        A, B = a.data, b.data
        if A.ndim not in (1, 2) or B.ndim not in (1, 2) or A.shape[-1] != B.shape[0]:
            raise ShapeError(f"matmul shape mismatch: {A.shape} x {B.shape}")
        out = A @ B

        def grad_fn(g):
            if A.ndim == 2 and B.ndim == 2:
                return g @ B.T, A.T @ g
            if A.ndim == 2:
                return np.outer(g, B), A.T @ g
            if B.ndim == 2:
                return B @ g, np.outer(A, g)
            return g * B, g * A

        return self._record(out, (a, b), grad_fn)

    def transpose(self, x: Tensor) -> Tensor:
        if x.data.ndim != 2:
            raise ShapeError(f"transpose needs a matrix, got shape {x.shape}")
        return self._record(x.data.T.copy(), (x,), lambda g: (g.T,))

    # -------------------------------------------------------------- pointwise

    def relu(self, x: Tensor) -> Tensor:
        active = x.data > 0
        return self._record(np.where(active, x.data, 0.0), (x,), lambda g: (g * active,))

    def tanh(self, x: Tensor) -> Tensor:
        y = np.tanh(x.data)
        return self._record(y, (x,), lambda g: (g * (1.0 - y * y),))

    def sigmoid(self, x: Tensor) -> Tensor:
        y = 0.5 * (1.0 + np.tanh(0.5 * x.data))
        return self._record(y, (x,), lambda g: (g * y * (1.0 - y),))

    def log(self, x: Tensor, floor: float = LOG_FLOOR) -> Tensor:
        """Natural log with inputs floored at ``floor``; no gradient below the floor."""
        above = x.data > floor
        safe = np.where(above, x.data, 1.0)
        y = np.log(np.maximum(x.data, floor))
        return self._record(y, (x,), lambda g: (np.where(above, g / safe, 0.0),))

    def smooth_l1(self, z: Tensor) -> Tensor:
        absz = np.abs(z.data)
        y = np.where(absz < 1.0, 0.5 * z.data * z.data, absz - 0.5)
        slope = np.clip(z.data, -1.0, 1.0)
        return self._record(y, (z,), lambda g: (g * slope,))

    def elementwise(self, op: str, *inputs: Tensor) -> Tensor:
        """Dispatch one of the pointwise primitives by name."""
        binary = {"add": self.add, "mul": self.mul, "sub": self.sub}
        unary = {"relu": self.relu, "tanh": self.tanh, "sigmoid": self.sigmoid}
        if op in binary and len(inputs) == 2:
            return binary[op](*inputs)
        if op in unary and len(inputs) == 1:
            return unary[op](*inputs)
        raise ContractError(f"unsupported elementwise op '{op}' with {len(inputs)} inputs")

    # ------------------------------------------------------------ reductions

    def sum(self, x: Tensor) -> Tensor:
        shape = x.data.shape
        return self._record(np.array(x.data.sum()), (x,), lambda g: (np.full(shape, float(g)),))

    def softmax(self, x: Tensor, axis: int = -1, mask: Optional[np.ndarray] = None) -> Tensor:
        """Numerically stable softmax; ``mask`` (True = keep) forces exact zeros."""
        data = x.data
        if not -data.ndim <= axis < data.ndim:
            raise ContractError(f"softmax axis {axis} invalid for shape {data.shape}")
        if mask is not None:
            keep = np.broadcast_to(np.asarray(mask, dtype=bool), data.shape)
            if not keep.any(axis=axis).all():
                raise DegenerateMaskError("softmax mask removes every entry along an axis")
            data = np.where(keep, data, -np.inf)
        shifted = data - data.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        y = e / e.sum(axis=axis, keepdims=True)

        def grad_fn(g):
            return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

        return self._record(y, (x,), grad_fn)

    # ----------------------------------------------------------- structural

    def take(self, x: Tensor, key) -> Tensor:
        """Basic or advanced indexing; the backward scatter-adds repeated indices."""
        shape = x.data.shape
        out = np.array(x.data[key])

        def grad_fn(g):
            gx = np.zeros(shape)
            np.add.at(gx, key, g)
            return (gx,)

        return self._record(out, (x,), grad_fn)

    def concat(self, parts: Sequence[Tensor], axis: int = 0) -> Tensor:
        sizes = [p.data.shape[axis] for p in parts]
        out = np.concatenate([p.data for p in parts], axis=axis)
        splits = np.cumsum(sizes)[:-1]
        return self._record(out, tuple(parts), lambda g: tuple(np.split(g, splits, axis=axis)))

    def stack(self, parts: Sequence[Tensor], axis: int = 0) -> Tensor:
        out = np.stack([p.data for p in parts], axis=axis)
        n = len(parts)
        return self._record(out, tuple(parts), lambda g: tuple(np.take(g, i, axis=axis) for i in range(n)))

    def conv1d_same(self, x: Tensor, kernels: Tensor) -> Tensor:
        """Temporal convolution (cross-correlation) with zero 'same' padding.

        Args:
            x: d_in x T input
            kernels: d_out x d_in x k weights, k odd

        Returns:
            d_out x T output
        """
        K = kernels.data
        if K.ndim != 3 or K.shape[2] % 2 == 0:
            raise ConfigurationError(f"conv1d_same needs an odd kernel width, got kernel shape {K.shape}")
        if x.data.ndim != 2 or x.data.shape[0] != K.shape[1]:
            raise ShapeError(f"conv1d_same shape mismatch: input {x.shape}, kernels {K.shape}")
        d_out, d_in, k = K.shape
        T = x.data.shape[1]
        pad = (k - 1) // 2
        xpad = np.pad(x.data, ((0, 0), (pad, pad)))
        windows = np.lib.stride_tricks.sliding_window_view(xpad, k, axis=1)  # d_in x T x k
        cols = windows.transpose(0, 2, 1).reshape(d_in * k, T)
        kmat = K.reshape(d_out, d_in * k)
        out = kmat @ cols

        def grad_fn(g):
            gk = (g @ cols.T).reshape(d_out, d_in, k)
            gcols = (kmat.T @ g).reshape(d_in, k, T)
            gpad = np.zeros_like(xpad)
            for j in range(k):
                gpad[:, j:j + T] += gcols[:, j, :]
            return gpad[:, pad:pad + T], gk

        return self._record(out, (x, kernels), grad_fn)

    # -------------------------------------------------------------- backward

    def backward(self, root: Tensor) -> None:
        """Populate ``grad`` on every tracked tensor reachable from ``root``.

        Raises:
            ContractError: If root is not a scalar or nothing was recorded
        """
        if root.data.size != 1:
            raise ContractError(f"backward root must be scalar, got shape {root.shape}")
        if not self._records or id(root) not in self._produced:
            raise ContractError("backward called on an empty tape or an untracked root")

        pending: Dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
        for record in reversed(self._records):
            g = pending.pop(id(record.output), None)
            if g is None:
                continue
            record.output.grad = g
            for inp, gi in zip(record.inputs, record.grad_fn(g)):
                if gi is None or not inp.requires_grad:
                    continue
                gi = np.asarray(gi, dtype=np.float64).reshape(inp.data.shape)
                if id(inp) in self._produced:
                    key = id(inp)
                    pending[key] = pending[key] + gi if key in pending else gi
                else:
                    inp.grad = gi.copy() if inp.grad is None else inp.grad + gi
        logger.debug(f"Backward pass replayed {len(self._records)} operations")


# ---------------------------------------------------------------- grad check

def numerical_gradient(fn: Callable[[], float], array: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of ``fn`` with respect to ``array`` (mutated in place, restored)."""
    grad = np.zeros_like(array)
    for idx in np.ndindex(array.shape):
        original = array[idx]
        array[idx] = original + h
        f_plus = fn()
        array[idx] = original - h
        f_minus = fn()
        array[idx] = original
        grad[idx] = (f_plus - f_minus) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """Largest entrywise |a - n| / max(|a| + |n|, floor)."""
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    if analytic.size == 0:
        return 0.0
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


@dataclass
class GradCheckReport:
    max_relative_error: float
    worst_parameter: str
    checked_entries: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_relative_error < self.tolerance


def gradient_check(loss_fn: Callable[[Tape], Tensor], tensors: Dict[str, Tensor],
                   h: float = 1e-5, tolerance: float = 1e-4) -> GradCheckReport:
    """Compare analytic gradients of ``loss_fn`` against central differences.

    Args:
        loss_fn: Builds the scalar loss on the given tape
        tensors: Named leaves to check (typically a ParameterStore's tensors)
        h: Finite-difference step
        tolerance: Pass threshold on the max relative error

    Returns:
        GradCheckReport with the worst parameter
    """
    for t in tensors.values():
        t.grad = None
    tape = Tape()
    tape.backward(loss_fn(tape))

    def evaluate() -> float:
        return loss_fn(Tape()).item()

    worst, worst_name, entries = 0.0, "", 0
    for name, t in tensors.items():
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        numeric = numerical_gradient(evaluate, t.data, h)
        err = relative_error(analytic, numeric)
        entries += t.data.size
        logger.debug(f"Gradient check {name}: relative error {err:.3e}")
        if err >= worst:
            worst, worst_name = err, name
    report = GradCheckReport(worst, worst_name, entries, tolerance)
    logger.info(f"Gradient check over {entries} entries: max relative error {worst:.3e} ({worst_name})")
    return report
