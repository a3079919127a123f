"""Dense float64 tensors with reverse-mode automatic differentiation.

A Tensor wraps a numpy array plus an optional gradient accumulator and a
link back to the op that produced it. Calling ``backward()`` on a scalar
walks the tape once in reverse topological order, summing contributions
into every reachable leaf that requires gradients.

Broadcasting: ``add`` and ``mul`` follow numpy broadcasting; gradients are
summed back over broadcast axes. ``matmul`` is strict 2-D. No other op
broadcasts.
"""

from __future__ import annotations

import struct
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible for an op."""


_GRAD_ENABLED = True


@contextmanager
def no_grad():
    """Disable tape recording inside the block (inference fast path)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, grad={'yes' if self.requires_grad else 'no'})"

    # light sugar so model code reads like the math
    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self, free_graph: bool = True) -> None:
        backward(self, free_graph=free_graph)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum gradient over axes that numpy broadcasting introduced."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise and linear ops
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data + b.data

    def bwd(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return _make(data, (a, b), bwd)


def neg(a) -> Tensor:
    a = as_tensor(a)

    def bwd(g):
        _accum(a, -g)

    return _make(-a.data, (a,), bwd)


def sub(a, b) -> Tensor:
    return add(a, neg(b))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data * b.data

    def bwd(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(data, (a, b), bwd)


def scale(a, s: float) -> Tensor:
    a = as_tensor(a)
    s = float(s)

    def bwd(g):
        _accum(a, g * s)

    return _make(a.data * s, (a,), bwd)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
    data = a.data @ b.data

    def bwd(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _make(data, (a, b), bwd)


def transpose(a) -> Tensor:
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError(f"transpose needs a 2-D operand, got {a.data.shape}")

    def bwd(g):
        _accum(a, g.T)

    return _make(a.data.T.copy(), (a,), bwd)


def relu(a) -> Tensor:
    a = as_tensor(a)
    data = np.maximum(a.data, 0.0)

    def bwd(g):
        _accum(a, g * (a.data > 0.0))

    return _make(data, (a,), bwd)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def bwd(g):
        _accum(a, g * data * (1.0 - data))

    return _make(data, (a,), bwd)


def tanh(a) -> Tensor:
    a = as_tensor(a)
    data = np.tanh(a.data)

    def bwd(g):
        _accum(a, g * (1.0 - data * data))

    return _make(data, (a,), bwd)


def concat(parts: list[Tensor], axis: int = 0) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise ShapeError("concat of zero tensors")
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]

    def bwd(g):
        offset = 0
        for p, n in zip(parts, sizes):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(offset, offset + n)
            _accum(p, g[tuple(idx)])
            offset += n

    return _make(data, tuple(parts), bwd)


def rows(a, idx) -> Tensor:
    """Gather rows of a 2-D tensor; backward scatter-adds (shared rows sum)."""
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64)
    if a.data.ndim != 2:
        raise ShapeError(f"rows needs a 2-D operand, got {a.data.shape}")
    data = a.data[idx]

    def bwd(g):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            np.add.at(a.grad, idx, g)

    return _make(data, (a,), bwd)


# embedding lookup is row gathering on the embedding table
embedding = rows


def slice_cols(a, start: int, stop: int) -> Tensor:
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError(f"slice_cols needs a 2-D operand, got {a.data.shape}")
    data = a.data[:, start:stop]

    def bwd(g):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            a.grad[:, start:stop] += g

    return _make(data.copy(), (a,), bwd)


def sum_all(a) -> Tensor:
    a = as_tensor(a)

    def bwd(g):
        _accum(a, np.full_like(a.data, float(g)))

    return _make(np.asarray(a.data.sum()), (a,), bwd)


def mean_rows(a) -> Tensor:
    """Mean over axis 0, keeping a (1, d) row."""
    a = as_tensor(a)
    n = a.data.shape[0]
    data = a.data.mean(axis=0, keepdims=True)

    def bwd(g):
        _accum(a, np.broadcast_to(g / n, a.data.shape).copy())

    return _make(data, (a,), bwd)


# ---------------------------------------------------------------------------
# normalization, attention and loss primitives
# ---------------------------------------------------------------------------


def softmax(a, axis: int = -1) -> Tensor:
    """Numerically stable softmax along ``axis`` (max subtraction)."""
    a = as_tensor(a)
    x = a.data
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        dot = (g * data).sum(axis=axis, keepdims=True)
        _accum(a, data * (g - dot))

    return _make(data, (a,), bwd)


def layer_norm(a, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to mean 0 / variance 1, then affine."""
    a, gain, bias = as_tensor(a), as_tensor(gain), as_tensor(bias)
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    data = xhat * gain.data + bias.data
    d = x.shape[-1]

    def bwd(g):
        if gain.requires_grad:
            _accum(gain, _unbroadcast(g * xhat, gain.data.shape))
        if bias.requires_grad:
            _accum(bias, _unbroadcast(g, bias.data.shape))
        if a.requires_grad:
            gx = g * gain.data
            dvar = (gx * xc).sum(axis=-1, keepdims=True) * (-0.5) * inv**3
            dmu = -(gx * inv).sum(axis=-1, keepdims=True) + dvar * (-2.0 / d) * xc.sum(axis=-1, keepdims=True)
            _accum(a, gx * inv + dvar * 2.0 * xc / d + dmu / d)

    return _make(data, (a, gain, bias), bwd)


@dataclass
class RunContext:
    """Execution-context knobs for stochastic ops.

    Dropout masks are derived from the counter-based Philox generator keyed
    by (seed, step, call index), so a run is bit-reproducible regardless of
    how many times the forward graph is rebuilt.
    """

    training: bool = False
    seed: int = 0
    step: int = 0
    _calls: int = field(default=0, repr=False)

    def begin_step(self, step: int) -> None:
        self.step = step
        self._calls = 0

    def _next_rng(self) -> np.random.Generator:
        key = np.array([self.seed & 0xFFFFFFFFFFFFFFFF, ((self.step << 20) + self._calls) & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
        self._calls += 1
        return np.random.Generator(np.random.Philox(key=key))


EVAL_CONTEXT = RunContext(training=False)


def dropout(a, rate: float, ctx: RunContext) -> Tensor:
    """Inverted dropout: identity in eval mode, mask/(1-rate) in training."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate out of range: {rate}")
    a = as_tensor(a)
    if rate == 0.0 or not ctx.training:
        return a
    rng = ctx._next_rng()
    mask = (rng.random(a.data.shape) >= rate) / (1.0 - rate)

    def bwd(g):
        _accum(a, g * mask)

    return _make(a.data * mask, (a,), bwd)


def cross_entropy(logits, targets, ignore_index: int | None = None) -> Tensor:
    """Summed -log softmax(logits)[t, target_t]; rows with ignore_index skipped."""
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    if logits.data.ndim != 2 or targets.ndim != 1 or logits.data.shape[0] != targets.shape[0]:
        raise ShapeError(f"cross_entropy shapes: logits {logits.data.shape}, targets {targets.shape}")
    keep = np.ones(targets.shape[0], dtype=bool)
    if ignore_index is not None:
        keep = targets != ignore_index
    x = logits.data
    m = x.max(axis=1, keepdims=True)
    z = x - m
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True)) + m
    safe_targets = np.where(keep, targets, 0)
    ll = x[np.arange(x.shape[0]), safe_targets] - lse[:, 0]
    data = np.asarray(-(ll * keep).sum())

    def bwd(g):
        if logits.requires_grad:
            p = np.exp(x - lse)
            p[np.arange(x.shape[0]), safe_targets] -= 1.0
            p[~keep] = 0.0
            _accum(logits, p * float(g))

    return _make(data, (logits,), bwd)


# ---------------------------------------------------------------------------
# backward pass
# ---------------------------------------------------------------------------


def backward(t: Tensor, free_graph: bool = True) -> None:
    """Reverse-mode sweep from scalar ``t``; each node visited exactly once."""
    if t.data.ndim != 0 and t.data.size != 1:
        raise ShapeError(f"backward needs a scalar, got shape {t.data.shape}")
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(t, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    t.grad = np.ones_like(t.data)
    for node in reversed(order):
        if node._backward is not None:
            node._backward(node.grad)
            if free_graph:
                node._backward = None
                node._parents = ()


# ---------------------------------------------------------------------------
# parameters and gradient utilities
# ---------------------------------------------------------------------------


class Parameter:
    """A named trainable tensor plus a note on how it was initialized."""

    def __init__(self, name: str, data, init: str = "explicit"):
        self.name = name
        self.tensor = Tensor(np.array(data, dtype=np.float64), requires_grad=True)
        self.init = init

    @property
    def data(self) -> np.ndarray:
        return self.tensor.data

    @data.setter
    def data(self, value) -> None:
        self.tensor.data = np.asarray(value, dtype=np.float64)

    @property
    def grad(self) -> np.ndarray | None:
        return self.tensor.grad

    def __repr__(self) -> str:
        return f"Parameter({self.name}, shape={self.tensor.data.shape})"


def zero_grads(params: dict[str, Parameter]) -> None:
    for p in params.values():
        p.tensor.grad = None


def grad_norm(grads: dict[str, np.ndarray]) -> float:
    total = 0.0
    for g in grads.values():
        total += float((g * g).sum())
    return float(np.sqrt(total))


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> tuple[dict[str, np.ndarray], float]:
    """Scale all gradients so the global norm is at most max_norm."""
    norm = grad_norm(grads)
    if norm > max_norm and norm > 0.0:
        factor = max_norm / norm
        grads = {k: g * factor for k, g in grads.items()}
    return grads, norm


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------


@dataclass
class GradCheckReport:
    passed: bool
    tol: float
    per_param: dict[str, float]
    worst_param: str
    worst_error: float

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"grad_check {status}: worst {self.worst_error:.3e} on '{self.worst_param}' (tol {self.tol:.1e})"


def grad_check(
    f,
    params: dict[str, Parameter],
    step: float = 1e-4,
    tol: float = 1e-4,
    max_entries_per_param: int | None = None,
    seed: int = 0,
) -> GradCheckReport:
    """Compare analytic gradients of scalar-valued ``f()`` with central differences.

    ``f`` must be deterministic (run dropout in eval mode). The relative
    error uses denominator max(|analytic|, |numeric|, 1e-2) so that
    finite-difference noise on near-zero entries cannot dominate. When
    ``max_entries_per_param`` is set, a seeded subset of coordinates per
    parameter is checked.
    """
    zero_grads(params)
    loss = f()
    if not np.isfinite(loss.data):
        raise FloatingPointError("grad_check: non-finite loss")
    backward(loss)
    analytic = {k: (np.zeros_like(p.data) if p.grad is None else p.grad.copy()) for k, p in params.items()}

    rng = np.random.Generator(np.random.PCG64(seed))
    per_param: dict[str, float] = {}
    for name, p in params.items():
        flat = p.tensor.data.reshape(-1)
        n = flat.size
        if max_entries_per_param is not None and n > max_entries_per_param:
            idxs = rng.choice(n, size=max_entries_per_param, replace=False)
        else:
            idxs = np.arange(n)
        worst = 0.0
        a_flat = analytic[name].reshape(-1)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + step
            f_plus = float(f().data)
            flat[i] = orig - step
            f_minus = float(f().data)
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * step)
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise FloatingPointError(f"grad_check: non-finite value while perturbing '{name}'")
            a = a_flat[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-2)
            worst = max(worst, err)
        per_param[name] = worst

    worst_param = max(per_param, key=per_param.get) if per_param else ""
    worst_error = per_param.get(worst_param, 0.0)
    return GradCheckReport(
        passed=worst_error <= tol,
        tol=tol,
        per_param=per_param,
        worst_param=worst_param,
        worst_error=worst_error,
    )


# ---------------------------------------------------------------------------
# checkpoint container
# ---------------------------------------------------------------------------

_CKPT_MAGIC = b"GODESCK1"


def save_arrays(path, arrays: dict[str, np.ndarray]) -> None:
    """Write (name, shape, little-endian float64) triples with a version header."""
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<I", len(arrays)))
        for name in sorted(arrays):
            arr = np.ascontiguousarray(arrays[name], dtype="<f8")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<Q", dim))
            fh.write(arr.tobytes())


def load_arrays(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _CKPT_MAGIC:
            raise ValueError(f"not a checkpoint file (bad header {magic!r}): {path}")
        (count,) = struct.unpack("<I", fh.read(4))
        out: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = tuple(struct.unpack("<Q", fh.read(8))[0] for _ in range(ndim))
            n = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(8 * n), dtype="<f8").reshape(shape)
            out[name] = data.astype(np.float64)
        return out
