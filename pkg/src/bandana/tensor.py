"""Dense tensors, CSR sparse matrices, and a reverse-mode tape.

Everything is 64-bit floating point.  Ops record themselves on the active
tape only when some input requires gradients; without an active tape the
same functions run as plain numpy (the eval fast path).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class Tensor:
    """A 2-D float64 array with an optional accumulated gradient."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2:
            raise ValueError(f"Tensor must be 2-D, got shape {arr.shape}")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = None

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


@dataclass
class SparseMatrix:
    """CSR matrix; values aligned with col_indices.

    Gradients with respect to ``values`` are only tracked when
    ``requires_grad`` is set (off by default: masks are parameter-free).
    """

    shape: tuple[int, int]
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    requires_grad: bool = False
    grad: np.ndarray | None = None
    _scipy: sp.csr_matrix | None = field(default=None, repr=False, compare=False)
    _scipy_t: sp.csr_matrix | None = field(default=None, repr=False, compare=False)

    def to_scipy(self) -> sp.csr_matrix:
        if self._scipy is None:
            self._scipy = sp.csr_matrix(
                (self.values, self.col_indices, self.row_offsets), shape=self.shape)
        return self._scipy

    def transpose_scipy(self) -> sp.csr_matrix:
        if self._scipy_t is None:
            self._scipy_t = self.to_scipy().T.tocsr()
        return self._scipy_t

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.to_scipy().sum(axis=1)).ravel()

    def col_sums(self) -> np.ndarray:
        return np.asarray(self.to_scipy().sum(axis=0)).ravel()

    def with_values(self, values: np.ndarray) -> "SparseMatrix":
        values = np.asarray(values, dtype=np.float64)
        if values.shape != self.values.shape:
            raise ValueError("value array does not match pattern")
        return SparseMatrix(self.shape, self.row_offsets, self.col_indices, values)

    def same_pattern(self, other: "SparseMatrix") -> bool:
        return (self.shape == other.shape
                and np.array_equal(self.row_offsets, other.row_offsets)
                and np.array_equal(self.col_indices, other.col_indices))

    @staticmethod
    def identity(n: int) -> "SparseMatrix":
        return SparseMatrix((n, n), np.arange(n + 1, dtype=np.int64),
                            np.arange(n, dtype=np.int64), np.ones(n))


# ---------------------------------------------------------------------------
# tape
# ---------------------------------------------------------------------------

class Tape:
    """Ordered record of primitive ops for reverse accumulation."""

    def __init__(self):
        self._records: list[tuple[Tensor, object]] = []

    def record(self, out: Tensor, backward_fn) -> None:
        self._records.append((out, backward_fn))

    def __len__(self):
        return len(self._records)

    def __enter__(self):
        push_tape(self)
        return self

    def __exit__(self, *exc):
        pop_tape(self)
        return False


_TAPE_STACK: list[Tape] = []


def push_tape(tape: Tape) -> None:
    _TAPE_STACK.append(tape)


def pop_tape(tape: Tape) -> None:
    assert _TAPE_STACK and _TAPE_STACK[-1] is tape
    _TAPE_STACK.pop()


def active_tape() -> Tape | None:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def backward(tape: Tape, loss: Tensor) -> None:
    """Reverse accumulation from a scalar loss over the tape's records."""
    if loss.data.shape != (1, 1):
        raise ValueError(f"loss must be 1x1, got {loss.data.shape}")
    loss.grad = np.ones((1, 1))
    for out, backward_fn in reversed(tape._records):
        if out.grad is not None:
            backward_fn(out.grad)


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    # gradients are never mutated in place, so sharing buffers is safe
    t.grad = g if t.grad is None else t.grad + g


def _record(out: Tensor, backward_fn) -> None:
    tape = active_tape()
    if tape is not None and out.requires_grad:
        tape.record(out, backward_fn)


# ---------------------------------------------------------------------------
# primitive ops
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = Tensor(a.data @ b.data, a.requires_grad or b.requires_grad)

    def bwd(g):
        if a.requires_grad:
            _accumulate(a, g @ b.data.T)
        if b.requires_grad:
            _accumulate(b, a.data.T @ g)
    _record(out, bwd)
    return out


def spmm(s: SparseMatrix, x: Tensor) -> Tensor:
    """Sparse @ dense.  Differentiable in x, and in s.values when enabled."""
    if s.shape[1] != x.shape[0]:
        raise ValueError(f"spmm shape mismatch: {s.shape} @ {x.shape}")
    out = Tensor(s.to_scipy() @ x.data, x.requires_grad or s.requires_grad)

    def bwd(g):
        if x.requires_grad:
            _accumulate(x, s.transpose_scipy() @ g)
        if s.requires_grad:
            rows = np.repeat(np.arange(s.shape[0]), np.diff(s.row_offsets))
            gv = np.einsum("ij,ij->i", g[rows], x.data[s.col_indices])
            s.grad = gv if s.grad is None else s.grad + gv
    _record(out, bwd)
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"add shape mismatch: {a.shape} vs {b.shape}")
    out = Tensor(a.data + b.data, a.requires_grad or b.requires_grad)

    def bwd(g):
        if a.requires_grad:
            _accumulate(a, g)
        if b.requires_grad:
            _accumulate(b, g)
    _record(out, bwd)
    return out


def multiply(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise (Hadamard) product."""
    if a.shape != b.shape:
        raise ValueError(f"multiply shape mismatch: {a.shape} vs {b.shape}")
    out = Tensor(a.data * b.data, a.requires_grad or b.requires_grad)

    def bwd(g):
        if a.requires_grad:
            _accumulate(a, g * b.data)
        if b.requires_grad:
            _accumulate(b, g * a.data)
    _record(out, bwd)
    return out


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """Add a 1-by-d bias row to every row of x."""
    if b.shape != (1, x.shape[1]):
        raise ValueError(f"bias shape {b.shape} does not broadcast over {x.shape}")
    out = Tensor(x.data + b.data, x.requires_grad or b.requires_grad)

    def bwd(g):
        if x.requires_grad:
            _accumulate(x, g)
        if b.requires_grad:
            _accumulate(b, g.sum(axis=0, keepdims=True))
    _record(out, bwd)
    return out


def affine(x: Tensor, scale: float = 1.0, shift: float = 0.0) -> Tensor:
    """scale * x + shift with scalar constants."""
    out = Tensor(scale * x.data + shift, x.requires_grad)

    def bwd(g):
        _accumulate(x, scale * g)
    _record(out, bwd)
    return out


def mul_const(x: Tensor, c) -> Tensor:
    """Elementwise product with a constant array (no gradient into c)."""
    c = np.asarray(c, dtype=np.float64)
    out = Tensor(x.data * c, x.requires_grad)

    def bwd(g):
        _accumulate(x, g * c)
    _record(out, bwd)
    return out


def elu(x: Tensor) -> Tensor:
    neg = x.data < 0
    ex = np.exp(x.data[neg])  # exp only where needed
    data = x.data.copy()
    data[neg] = ex - 1.0
    out = Tensor(data, x.requires_grad)

    def bwd(g):
        grad = g.copy()
        grad[neg] = g[neg] * ex
        _accumulate(x, grad)
    _record(out, bwd)
    return out


def sigmoid(x: Tensor) -> Tensor:
    s = np.empty_like(x.data)
    pos = x.data >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-x.data[pos]))
    e = np.exp(x.data[~pos])
    s[~pos] = e / (1.0 + e)
    out = Tensor(s, x.requires_grad)

    def bwd(g):
        _accumulate(x, g * s * (1.0 - s))
    _record(out, bwd)
    return out


def log(x: Tensor) -> Tensor:
    out = Tensor(np.log(x.data), x.requires_grad)

    def bwd(g):
        _accumulate(x, g / x.data)
    _record(out, bwd)
    return out


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values; gradient passes only through unclamped entries."""
    inside = (x.data > lo) & (x.data < hi)
    out = Tensor(np.clip(x.data, lo, hi), x.requires_grad)

    def bwd(g):
        _accumulate(x, g * inside)
    _record(out, bwd)
    return out


def gather_rows(x: Tensor, idx: np.ndarray) -> Tensor:
    """Select rows x[idx]; backward scatter-adds into the source rows."""
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
        raise IndexError("gather_rows index out of range")
    out = Tensor(x.data[idx], x.requires_grad)

    def bwd(g):
        # scatter-add as an implicit one-hot CSR product (fast in C)
        if idx.size:
            sel = sp.csr_matrix((np.ones(idx.size), idx,
                                 np.arange(idx.size + 1, dtype=np.int64)),
                                shape=(idx.size, x.shape[0]))
            _accumulate(x, (sel.T @ g))
        else:
            _accumulate(x, np.zeros_like(x.data))
    _record(out, bwd)
    return out


def sum_all(x: Tensor) -> Tensor:
    out = Tensor(np.array([[x.data.sum()]]), x.requires_grad)

    def bwd(g):
        _accumulate(x, np.full_like(x.data, g[0, 0]))
    _record(out, bwd)
    return out


def mean_all(x: Tensor) -> Tensor:
    count = x.data.size
    out = Tensor(np.array([[x.data.mean()]]), x.requires_grad)

    def bwd(g):
        _accumulate(x, np.full_like(x.data, g[0, 0] / count))
    _record(out, bwd)
    return out


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None,
            train_mode: bool) -> Tensor:
    """Inverted dropout: survivors scaled by 1/(1-rate); identity in eval mode."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must be in [0, 1)")
    if not train_mode or rate == 0.0:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    out = Tensor(x.data * keep, x.requires_grad)

    def bwd(g):
        _accumulate(x, g * keep)
    _record(out, bwd)
    return out


class BatchNormState:
    """Running statistics shared across training steps (mutated in place)."""

    __slots__ = ("running_mean", "running_var")

    def __init__(self, dim: int):
        self.running_mean = np.zeros(dim)
        self.running_var = np.ones(dim)


_BN_EPS = 1e-5


def batchnorm(x: Tensor, gamma: Tensor, beta: Tensor, state: BatchNormState,
              train_mode: bool, momentum: float = 0.1) -> Tensor:
    """Batch normalization over the node (row) dimension, full batch.

    Train mode uses batch statistics and updates the running stats by
    exponential moving average; eval mode uses the running stats.
    """
    if train_mode:
        mu = x.data.mean(axis=0)
        var = x.data.var(axis=0)
        state.running_mean = (1 - momentum) * state.running_mean + momentum * mu
        state.running_var = (1 - momentum) * state.running_var + momentum * var
    else:
        mu = state.running_mean
        var = state.running_var
    inv = 1.0 / np.sqrt(var + _BN_EPS)
    xhat = (x.data - mu) * inv
    out = Tensor(gamma.data * xhat + beta.data,
                 x.requires_grad or gamma.requires_grad or beta.requires_grad)

    def bwd(g):
        if gamma.requires_grad:
            _accumulate(gamma, (g * xhat).sum(axis=0, keepdims=True))
        if beta.requires_grad:
            _accumulate(beta, g.sum(axis=0, keepdims=True))
        if x.requires_grad:
            if train_mode:
                m = x.data.shape[0]
                gxh = g * gamma.data
                dx = (inv / m) * (m * gxh - gxh.sum(axis=0)
                                  - xhat * (gxh * xhat).sum(axis=0))
                _accumulate(x, dx)
            else:
                _accumulate(x, g * gamma.data * inv)
    _record(out, bwd)
    return out


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean softmax cross-entropy against integer class labels."""
    labels = np.asarray(labels, dtype=np.int64)
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    ez = np.exp(z)
    p = ez / ez.sum(axis=1, keepdims=True)
    m = logits.shape[0]
    nll = -(z[np.arange(m), labels] - np.log(ez.sum(axis=1)))
    out = Tensor(np.array([[nll.mean()]]), logits.requires_grad)

    def bwd(g):
        gp = p.copy()
        gp[np.arange(m), labels] -= 1.0
        _accumulate(logits, g[0, 0] * gp / m)
    _record(out, bwd)
    return out


# ---------------------------------------------------------------------------
# grouped softmax (plain arrays; masks are parameter-free)
# ---------------------------------------------------------------------------

def grouped_softmax(scores: np.ndarray, group_offsets: np.ndarray,
                    temperature: float) -> np.ndarray:
    """Softmax within contiguous groups, with max-subtraction for stability.

    ``group_offsets`` has length num_groups + 1; group g spans
    ``scores[group_offsets[g]:group_offsets[g+1]]``.  Every group must be
    non-empty and the temperature positive.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    scores = np.asarray(scores, dtype=np.float64)
    offsets = np.asarray(group_offsets, dtype=np.int64)
    sizes = np.diff(offsets)
    if np.any(sizes <= 0):
        raise ValueError("empty group in grouped_softmax")
    if offsets[-1] != scores.shape[0]:
        raise ValueError("group offsets do not cover the score array")
    gmax = np.maximum.reduceat(scores, offsets[:-1])
    shifted = (scores - np.repeat(gmax, sizes)) / temperature
    e = np.exp(shifted)
    gsum = np.add.reduceat(e, offsets[:-1])
    return e / np.repeat(gsum, sizes)
