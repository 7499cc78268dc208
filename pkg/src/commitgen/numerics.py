"""Dense float64 tensors with reverse-mode automatic differentiation.

A ``Tape`` records every primitive applied to tensors that require
gradients, in execution order.  ``backward`` replays the records in
reverse, accumulating vector-Jacobian products into ``Tensor.grad``.
Values are float64 throughout; only checkpoint serialization narrows
to float32.

Broadcasting is deliberately restricted: elementwise ops accept equal
shapes, a scalar operand, or a trailing row vector against a matrix.
Anything richer (tiling a column, flattening batch blocks) is its own
primitive with an explicit backward rule, so every rule stays easy to
audit against finite differences.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "backward",
    "matmul",
    "add",
    "sub",
    "mul",
    "tanh",
    "sigmoid",
    "softmax",
    "cross_entropy",
    "dropout",
    "take_rows",
    "concat",
    "stack_blocks",
    "repeat_rows",
    "repeat_cols",
    "sum_blocks",
    "reshape",
    "sum_all",
]


class Tensor:
    """A contiguous row-major float64 array plus an optional gradient."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        # np.array (not ascontiguousarray) keeps 0-d scalars 0-d
        self.data = np.array(data, dtype=np.float64, order="C")
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    @classmethod
    def zeros(cls, *shape: int, requires_grad: bool = False) -> "Tensor":
        return cls(np.zeros(shape), requires_grad=requires_grad)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # Operator sugar; delegates to the module-level primitives.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


_ACTIVE_TAPE: "Tape | None" = None


class Tape:
    """Ordered record of primitive applications for one forward pass.

    Used as a context manager::

        with Tape() as tape:
            loss = model_loss(...)
        backward(loss, tape)

    Entries are appended in execution order, so the record is already
    topologically sorted.  A tape can be consumed by ``backward`` once.
    """

    def __init__(self):
        self._entries: list[tuple[Tensor, callable]] = []
        self._consumed = False

    def __enter__(self) -> "Tape":
        global _ACTIVE_TAPE
        if _ACTIVE_TAPE is not None:
            raise RuntimeError("a Tape is already active; tapes do not nest")
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, exc_type, exc, tb):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = None
        return False

    def record(self, result: Tensor, backward_fn) -> None:
        self._entries.append((result, backward_fn))

    def __len__(self) -> int:
        return len(self._entries)


def backward(loss: Tensor, tape: Tape) -> None:
    """Populate ``grad`` on every requires-grad tensor reachable from ``loss``.

    Gradients accumulate additively: a tensor used twice in the graph
    receives the sum of both contributions.  Raises if ``loss`` is not a
    scalar or the tape was already consumed.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if tape._consumed:
        raise RuntimeError("tape already consumed by backward; record a new tape")
    tape._consumed = True
    loss.accumulate_grad(np.ones_like(loss.data))
    for result, backward_fn in reversed(tape._entries):
        if result.grad is not None:
            backward_fn(result.grad)


def _record(result: Tensor, inputs: tuple[Tensor, ...], backward_fn) -> Tensor:
    tape = _ACTIVE_TAPE
    if tape is not None and any(t.requires_grad for t in inputs):
        result.requires_grad = True
        tape.record(result, backward_fn)
    return result


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


# ---------------------------------------------------------------------------
# Elementwise arithmetic (equal shapes, scalar, or row-vector broadcast).


def _broadcast_check(a: Tensor, b: Tensor) -> None:
    if a.shape == b.shape:
        return
    if a.data.size == 1 or b.data.size == 1:
        return
    # row broadcast: (m, n) against (n,)
    if a.data.ndim == 2 and b.data.ndim == 1 and a.shape[1] == b.shape[0]:
        return
    if b.data.ndim == 2 and a.data.ndim == 1 and b.shape[1] == a.shape[0]:
        return
    raise ValueError(f"unsupported broadcast: {a.shape} vs {b.shape}")


def _reduce_to(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (inverse of scalar/row broadcast)."""
    if g.shape == shape:
        return g
    if int(np.prod(shape)) == 1:
        return np.asarray(g.sum()).reshape(shape)
    # (m, n) gradient reduced onto a (n,) row vector
    return g.sum(axis=0)


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_check(a, b)
    out = Tensor(a.data + b.data)

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(_reduce_to(g, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_reduce_to(g, b.shape))

    return _record(out, (a, b), bw)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_check(a, b)
    out = Tensor(a.data - b.data)

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(_reduce_to(g, a.shape))
        if b.requires_grad:
            b.accumulate_grad(-_reduce_to(g, b.shape))

    return _record(out, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_check(a, b)
    out = Tensor(a.data * b.data)

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(_reduce_to(g * b.data, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_reduce_to(g * a.data, b.shape))

    return _record(out, (a, b), bw)


def tanh(x) -> Tensor:
    x = _as_tensor(x)
    out = Tensor(np.tanh(x.data))
    out_data = out.data

    def bw(g):
        if x.requires_grad:
            x.accumulate_grad(g * (1.0 - out_data * out_data))

    return _record(out, (x,), bw)


def sigmoid(x) -> Tensor:
    x = _as_tensor(x)
    # exp on the negative half-line only, for stability at large |x|
    d = x.data
    out_data = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))),
                        np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d))))
    out = Tensor(out_data)

    def bw(g):
        if x.requires_grad:
            x.accumulate_grad(g * out_data * (1.0 - out_data))

    return _record(out, (x,), bw)


# ---------------------------------------------------------------------------
# Matrix product.


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Product of 2D and/or 1D tensors: (m,k)@(k,n), (m,k)@(k,), (k,)@(k,n), (k,)@(k,)."""
    a, b = _as_tensor(a), _as_tensor(b)
    a2 = a.data.reshape(1, -1) if a.data.ndim == 1 else a.data
    b2 = b.data.reshape(-1, 1) if b.data.ndim == 1 else b.data
    if a2.ndim != 2 or b2.ndim != 2:
        raise ValueError(f"matmul supports 1D/2D operands, got {a.shape} @ {b.shape}")
    if a2.shape[1] != b2.shape[0]:
        raise ValueError(f"matmul inner dimensions disagree: {a.shape} @ {b.shape}")
    out2 = a2 @ b2
    if a.data.ndim == 1 and b.data.ndim == 1:
        out = Tensor(out2.reshape(()))
    elif a.data.ndim == 1:
        out = Tensor(out2.reshape(-1))
    elif b.data.ndim == 1:
        out = Tensor(out2.reshape(-1))
    else:
        out = Tensor(out2)

    def bw(g):
        g2 = g.reshape(out2.shape)
        if a.requires_grad:
            a.accumulate_grad((g2 @ b2.T).reshape(a.shape))
        if b.requires_grad:
            b.accumulate_grad((a2.T @ g2).reshape(b.shape))

    return _record(out, (a, b), bw)


# ---------------------------------------------------------------------------
# Softmax and cross entropy.


def softmax(x: Tensor, mask=None) -> Tensor:
    """Row-wise softmax with an optional keep-mask.

    ``mask`` is boolean, same shape as ``x``; ``True`` marks entries that
    participate.  Excluded entries come out exactly 0.  A row with no
    participating entry is a domain error.  1D input is treated as a
    single row.
    """
    x = _as_tensor(x)
    was_1d = x.data.ndim == 1
    d = x.data.reshape(1, -1) if was_1d else x.data
    if d.ndim != 2:
        raise ValueError(f"softmax expects a vector or matrix, got shape {x.shape}")
    if mask is None:
        m = np.ones_like(d, dtype=bool)
    else:
        m = np.asarray(mask, dtype=bool).reshape(d.shape)
    if not m.any(axis=1).all():
        raise ValueError("softmax: at least one unmasked entry required per row")

    shifted = np.where(m, d, -np.inf)
    shifted = shifted - shifted.max(axis=1, keepdims=True)
    e = np.where(m, np.exp(shifted), 0.0)
    s = e / e.sum(axis=1, keepdims=True)
    out = Tensor(s.reshape(-1) if was_1d else s)

    def bw(g):
        g2 = g.reshape(s.shape)
        inner = (g2 * s).sum(axis=1, keepdims=True)
        gx = s * (g2 - inner)
        if x.requires_grad:
            x.accumulate_grad(gx.reshape(x.shape))

    return _record(out, (x,), bw)


def cross_entropy(logits: Tensor, targets, mask=None) -> Tensor:
    """Mean negative log-likelihood of ``targets`` under row-wise softmax.

    ``logits`` is (N, V); ``targets`` holds N class indices; ``mask`` is a
    length-N boolean keep-mask (``True`` = position counts toward the
    mean).  All positions masked out is a domain error.
    """
    logits = _as_tensor(logits)
    if logits.data.ndim != 2:
        raise ValueError(f"cross_entropy expects (N, V) logits, got {logits.shape}")
    n, v = logits.shape
    t = np.asarray(targets, dtype=np.int64).reshape(-1)
    if t.shape[0] != n:
        raise ValueError(f"{t.shape[0]} targets for {n} logit rows")
    if (t < 0).any() or (t >= v).any():
        raise ValueError(f"target index out of range for vocabulary of {v}")
    if mask is None:
        m = np.ones(n, dtype=bool)
    else:
        m = np.asarray(mask, dtype=bool).reshape(-1)
    count = int(m.sum())
    if count == 0:
        raise ValueError("cross_entropy: every position is masked")

    d = logits.data
    mx = d.max(axis=1, keepdims=True)
    lse = mx[:, 0] + np.log(np.exp(d - mx).sum(axis=1))
    nll = lse - d[np.arange(n), t]
    out = Tensor(np.asarray((nll * m).sum() / count))

    def bw(g):
        p = np.exp(d - lse[:, None])
        p[np.arange(n), t] -= 1.0
        p *= (m[:, None].astype(np.float64)) * (float(g) / count)
        if logits.requires_grad:
            logits.accumulate_grad(p)

    return _record(out, (logits,), bw)


# ---------------------------------------------------------------------------
# Structural primitives.


def dropout(x: Tensor, p: float, rng: np.random.Generator) -> Tensor:
    """Inverted-scaling dropout: zero with probability ``p``, scale by 1/(1-p)."""
    x = _as_tensor(x)
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if p == 0.0:
        return x
    keep = (rng.random(x.shape) >= p).astype(np.float64) / (1.0 - p)
    out = Tensor(x.data * keep)

    def bw(g):
        if x.requires_grad:
            x.accumulate_grad(g * keep)

    return _record(out, (x,), bw)


def take_rows(table: Tensor, indices) -> Tensor:
    """Gather rows of a 2D table; the embedding-lookup primitive."""
    table = _as_tensor(table)
    if table.data.ndim != 2:
        raise ValueError(f"take_rows expects a 2D table, got {table.shape}")
    idx = np.asarray(indices, dtype=np.int64).reshape(-1)
    if (idx < 0).any() or (idx >= table.shape[0]).any():
        raise ValueError(f"row index out of range for table of {table.shape[0]} rows")
    out = Tensor(table.data[idx])

    def bw(g):
        if table.requires_grad:
            acc = np.zeros_like(table.data)
            np.add.at(acc, idx, g)
            table.accumulate_grad(acc)

    return _record(out, (table,), bw)


def concat(parts: list[Tensor]) -> Tensor:
    """Concatenate along the last axis (columns for matrices)."""
    parts = [_as_tensor(p) for p in parts]
    widths = [p.shape[-1] for p in parts]
    out = Tensor(np.concatenate([p.data for p in parts], axis=-1))

    def bw(g):
        offset = 0
        for p, w in zip(parts, widths):
            if p.requires_grad:
                p.accumulate_grad(g[..., offset:offset + w])
            offset += w

    return _record(out, tuple(parts), bw)


def stack_blocks(steps: list[Tensor]) -> Tensor:
    """Interleave T per-step (B, k) matrices into (B*T, k) block layout.

    Row ``b*T + t`` of the result is row ``b`` of ``steps[t]``, so each
    consecutive block of T rows holds one batch element's timeline.
    """
    steps = [_as_tensor(s) for s in steps]
    b, k = steps[0].shape
    t_len = len(steps)
    out = Tensor(np.stack([s.data for s in steps], axis=1).reshape(b * t_len, k))

    def bw(g):
        g3 = g.reshape(b, t_len, k)
        for t, s in enumerate(steps):
            if s.requires_grad:
                s.accumulate_grad(g3[:, t, :])

    return _record(out, tuple(steps), bw)


def repeat_rows(x: Tensor, reps: int) -> Tensor:
    """Repeat each row ``reps`` times consecutively: (B, k) -> (B*reps, k)."""
    x = _as_tensor(x)
    b, k = x.shape
    out = Tensor(np.repeat(x.data, reps, axis=0))

    def bw(g):
        if x.requires_grad:
            x.accumulate_grad(g.reshape(b, reps, k).sum(axis=1))

    return _record(out, (x,), bw)


def repeat_cols(x: Tensor, reps: int) -> Tensor:
    """Tile a column vector (n, 1) into (n, reps)."""
    x = _as_tensor(x)
    if x.data.ndim != 2 or x.shape[1] != 1:
        raise ValueError(f"repeat_cols expects shape (n, 1), got {x.shape}")
    out = Tensor(np.repeat(x.data, reps, axis=1))

    def bw(g):
        if x.requires_grad:
            x.accumulate_grad(g.sum(axis=1, keepdims=True))

    return _record(out, (x,), bw)


def sum_blocks(x: Tensor, block_len: int) -> Tensor:
    """Sum consecutive blocks of rows: (B*block_len, k) -> (B, k)."""
    x = _as_tensor(x)
    n, k = x.shape
    if n % block_len != 0:
        raise ValueError(f"{n} rows not divisible into blocks of {block_len}")
    b = n // block_len
    out = Tensor(x.data.reshape(b, block_len, k).sum(axis=1))

    def bw(g):
        if x.requires_grad:
            x.accumulate_grad(np.repeat(g, block_len, axis=0))

    return _record(out, (x,), bw)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    x = _as_tensor(x)
    out = Tensor(x.data.reshape(shape))

    def bw(g):
        if x.requires_grad:
            x.accumulate_grad(g.reshape(x.shape))

    return _record(out, (x,), bw)


def sum_all(x: Tensor) -> Tensor:
    """Sum every entry into a scalar."""
    x = _as_tensor(x)
    out = Tensor(np.asarray(x.data.sum()))

    def bw(g):
        if x.requires_grad:
            x.accumulate_grad(np.full(x.shape, float(g)))

    return _record(out, (x,), bw)
