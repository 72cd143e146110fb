"""Dense float64 matrices with tape-based reverse-mode differentiation and Adam.

Every value lives on a :class:`Tape` as a 2-D ``float64`` array. Operations
append a node holding the output value, the parent node indices and a
vector-Jacobian product closure; :func:`backward` walks the tape in reverse.
Because nodes are only ever appended after their parents, the tape is
topologically ordered by construction.

Example:
    >>> tape = Tape()
    >>> x = tape.param(np.array([[1.0, -2.0]]), name="x")
    >>> loss = sum_all(mul(x, x))
    >>> backward(tape, loss)["x"]
    array([[ 2., -4.]])
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, DegenerateNeighborhoodError, DimensionError

LEAKY_SLOPE = 0.2


def as_matrix(x) -> np.ndarray:
    """Coerce scalars, vectors and matrices to a 2-D float64 array (vectors become rows)."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        return arr.reshape(1, 1)
    if arr.ndim == 1:
        return arr.reshape(1, -1)
    if arr.ndim != 2:
        raise DimensionError(f"expected at most 2 dimensions, got shape {arr.shape}")
    return arr


@dataclass
class _Node:
    kind: str
    parents: tuple[int, ...]
    value: np.ndarray
    vjp: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None
    requires_grad: bool
    name: str | None = None
    grad: np.ndarray | None = None


class Var:
    """Handle to one node on a tape."""

    __slots__ = ("tape", "index")

    def __init__(self, tape: "Tape", index: int):
        self.tape = tape
        self.index = index

    @property
    def value(self) -> np.ndarray:
        return self.tape.nodes[self.index].value

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    @property
    def grad(self) -> np.ndarray | None:
        return self.tape.nodes[self.index].grad

    def __repr__(self) -> str:
        node = self.tape.nodes[self.index]
        return f"Var(#{self.index} {node.kind} shape={self.shape})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        if np.isscalar(other):
            return scale(self, float(other))
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self):
        return transpose(self)


class Tape:
    """Append-only record of a computation."""

    def __init__(self):
        self.nodes: list[_Node] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def _record(self, kind, value, parents=(), vjp=None, requires_grad=None, name=None) -> Var:
        parents = tuple(p.index for p in parents)
        if requires_grad is None:
            requires_grad = any(self.nodes[i].requires_grad for i in parents)
        self.nodes.append(_Node(kind, parents, value, vjp, requires_grad, name))
        return Var(self, len(self.nodes) - 1)

    def param(self, value, name: str | None = None) -> Var:
        """Leaf whose gradient is reported by :func:`backward`."""
        return self._record("param", as_matrix(value).copy(), requires_grad=True, name=name)

    def const(self, value) -> Var:
        return self._record("const", as_matrix(value), requires_grad=False)

    def params(self) -> list[Var]:
        return [Var(self, i) for i, n in enumerate(self.nodes) if n.kind == "param"]


def _lift(x, tape: Tape) -> Var:
    if isinstance(x, Var):
        if x.tape is not tape:
            raise ContractError("operands live on different tapes")
        return x
    return tape.const(x)


def _tape_of(*xs) -> Tape:
    for x in xs:
        if isinstance(x, Var):
            return x.tape
    raise ContractError("at least one operand must be a Var")


def _binary(a, b) -> tuple[Var, Var]:
    tape = _tape_of(a, b)
    return _lift(a, tape), _lift(b, tape)


def backward(tape: Tape, loss: Var) -> dict[str, np.ndarray]:
    """Accumulate d(loss)/d(node) for every node and return gradients of named params.

    Params that the loss does not depend on get zero gradients. Gradient
    slots of earlier backward calls on the same tape are cleared first.
    """
    if loss.tape is not tape:
        raise ContractError("loss does not belong to this tape")
    if loss.shape != (1, 1):
        raise ContractError(f"loss must be 1x1, got {loss.shape}")
    nodes = tape.nodes
    for node in nodes:
        node.grad = None
    nodes[loss.index].grad = np.ones((1, 1))
    for i in range(loss.index, -1, -1):
        node = nodes[i]
        if node.grad is None or node.vjp is None or not node.requires_grad:
            continue
        for p, g in zip(node.parents, node.vjp(node.grad)):
            parent = nodes[p]
            if g is None or not parent.requires_grad:
                continue
            if g.shape != parent.value.shape:
                raise AssertionError(f"{node.kind}: gradient shape {g.shape} != {parent.value.shape}")
            parent.grad = g if parent.grad is None else parent.grad + g
    out = {}
    for i, node in enumerate(nodes):
        if node.kind == "param":
            key = node.name if node.name is not None else f"#{i}"
            out[key] = node.grad if node.grad is not None else np.zeros_like(node.value)
    return out


# ----------------------------------------------------------------------------
# linear algebra


def matmul(a, b) -> Var:
    a, b = _binary(a, b)
    A, B = a.value, b.value
    if A.shape[1] != B.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {A.shape} @ {B.shape}")
    return a.tape._record("matmul", A @ B, (a, b), lambda g: (g @ B.T, A.T @ g))


def transpose(a: Var) -> Var:
    return a.tape._record("transpose", a.value.T.copy(), (a,), lambda g: (g.T,))


def gram(z: Var) -> Var:
    """``z @ z.T``, symmetrised so the result is exactly symmetric."""
    Z = z.value
    G = Z @ Z.T
    G = 0.5 * (G + G.T)
    return z.tape._record("gram", G, (z,), lambda g: ((g + g.T) @ Z,))


# ----------------------------------------------------------------------------
# elementwise


def _broadcast_reduce(g: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    if g.shape == shape:
        return g
    return g.sum(axis=0, keepdims=True)


def _check_binary(kind: str, A: np.ndarray, B: np.ndarray) -> None:
    if A.shape == B.shape:
        return
    if B.shape == (1, A.shape[1]):
        return
    raise DimensionError(f"{kind}: shapes {A.shape} and {B.shape} are not equal or row-broadcastable")


def add(a, b) -> Var:
    """Entrywise sum. ``b`` may be a 1 x cols row broadcast over rows of ``a``."""
    a, b = _binary(a, b)
    A, B = a.value, b.value
    if B.shape != A.shape and A.shape == (1, B.shape[1]):
        a, b, A, B = b, a, B, A
    _check_binary("add", A, B)
    return a.tape._record("add", A + B, (a, b), lambda g: (g, _broadcast_reduce(g, B.shape)))


def sub(a, b) -> Var:
    a, b = _binary(a, b)
    A, B = a.value, b.value
    _check_binary("sub", A, B)
    return a.tape._record("sub", A - B, (a, b), lambda g: (g, -_broadcast_reduce(g, B.shape)))


def mul(a, b) -> Var:
    a, b = _binary(a, b)
    A, B = a.value, b.value
    _check_binary("mul", A, B)
    return a.tape._record("mul", A * B, (a, b), lambda g: (g * B, _broadcast_reduce(g * A, B.shape)))


def scale(a: Var, c: float) -> Var:
    c = float(c)
    return a.tape._record("scale", a.value * c, (a,), lambda g: (g * c,))


def add_scalar(a: Var, c: float) -> Var:
    c = float(c)
    return a.tape._record("add_scalar", a.value + c, (a,), lambda g: (g,))


def scale_rows(a: Var, w: Var) -> Var:
    """Multiply row ``i`` of ``a`` by the scalar ``w[i, 0]``."""
    a, w = _binary(a, w)
    A, W = a.value, w.value
    if W.shape != (A.shape[0], 1):
        raise DimensionError(f"scale_rows: weights {W.shape} do not match rows of {A.shape}")
    return a.tape._record(
        "scale_rows", A * W, (a, w), lambda g: (g * W, (g * A).sum(axis=1, keepdims=True))
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a: Var) -> Var:
    s = _sigmoid(a.value)
    return a.tape._record("sigmoid", s, (a,), lambda g: (g * s * (1.0 - s),))


def leaky_relu(a: Var, slope: float = LEAKY_SLOPE) -> Var:
    X = a.value
    d = np.where(X > 0, 1.0, slope)
    return a.tape._record("leaky_relu", X * d, (a,), lambda g: (g * d,))


def relu(a: Var) -> Var:
    X = a.value
    d = (X > 0).astype(np.float64)
    return a.tape._record("relu", X * d, (a,), lambda g: (g * d,))


def sqrt(a: Var) -> Var:
    """Entrywise square root; the derivative at 0 is taken as 0."""
    X = a.value
    if np.any(X < 0):
        raise ContractError("sqrt of a negative entry")
    r = np.sqrt(X)
    with np.errstate(divide="ignore"):
        d = np.where(r > 0, 0.5 / np.where(r > 0, r, 1.0), 0.0)
    return a.tape._record("sqrt", r, (a,), lambda g: (g * d,))


# ----------------------------------------------------------------------------
# reductions and indexing


def sum_all(a: Var) -> Var:
    shape = a.shape
    return a.tape._record(
        "sum_all", np.array([[a.value.sum()]]), (a,), lambda g: (np.full(shape, g[0, 0]),)
    )


def row_sum(a: Var) -> Var:
    cols = a.shape[1]
    return a.tape._record(
        "row_sum", a.value.sum(axis=1, keepdims=True), (a,), lambda g: (np.repeat(g, cols, axis=1),)
    )


def gather_rows(a: Var, idx) -> Var:
    """Rows ``a[idx]``; indices may repeat."""
    idx = np.asarray(idx, dtype=np.intp)
    shape = a.shape
    if idx.size and (idx.min() < 0 or idx.max() >= shape[0]):
        raise DimensionError(f"gather_rows: index out of range for {shape[0]} rows")

    def vjp(g):
        out = np.zeros(shape)
        np.add.at(out, idx, g)
        return (out,)

    return a.tape._record("gather_rows", a.value[idx], (a,), vjp)


def _segment_counts(indptr: np.ndarray, rows: int) -> np.ndarray:
    if indptr[0] != 0 or indptr[-1] != rows or np.any(np.diff(indptr) < 0):
        raise DimensionError(f"segment pointer does not partition {rows} rows")
    return np.diff(indptr)


def segment_sum(a: Var, indptr) -> Var:
    """Sum consecutive row blocks ``a[indptr[k]:indptr[k+1]]``; empty blocks give zeros."""
    indptr = np.asarray(indptr, dtype=np.intp)
    counts = _segment_counts(indptr, a.shape[0])
    X = a.value
    out = np.zeros((counts.size, X.shape[1]))
    nz = counts > 0
    if np.any(nz):
        out[nz] = np.add.reduceat(X, indptr[:-1][nz], axis=0)
    return a.tape._record("segment_sum", out, (a,), lambda g: (np.repeat(g, counts, axis=0),))


def segment_softmax(e: Var, indptr) -> Var:
    """Softmax of an E x 1 column within each segment of ``indptr``.

    This is the edge-list form of a masked row softmax: segment ``i`` holds
    the scores of the admissible entries of row ``i``.
    """
    indptr = np.asarray(indptr, dtype=np.intp)
    if e.shape[1] != 1:
        raise DimensionError(f"segment_softmax expects an E x 1 column, got {e.shape}")
    counts = _segment_counts(indptr, e.shape[0])
    if np.any(counts == 0):
        bad = int(np.flatnonzero(counts == 0)[0])
        raise DegenerateNeighborhoodError(f"segment {bad} is empty")
    x = e.value[:, 0]
    starts = indptr[:-1]
    mx = np.maximum.reduceat(x, starts)
    ex = np.exp(x - np.repeat(mx, counts))
    p = ex / np.repeat(np.add.reduceat(ex, starts), counts)
    p = p[:, None]

    def vjp(g):
        dot = np.add.reduceat((g * p)[:, 0], starts)
        return (p * (g - np.repeat(dot, counts)[:, None]),)

    return e.tape._record("segment_softmax", p, (e,), vjp)


def masked_row_softmax(scores: Var, mask) -> Var:
    """Row-wise softmax restricted to ``mask``; masked entries are exactly 0."""
    mask = np.asarray(mask, dtype=bool)
    S = scores.value
    if mask.shape != S.shape:
        raise DimensionError(f"mask shape {mask.shape} != scores shape {S.shape}")
    empty = ~mask.any(axis=1)
    if np.any(empty):
        raise DegenerateNeighborhoodError(f"row {int(np.flatnonzero(empty)[0])} has no unmasked entry")
    mx = np.where(mask, S, -np.inf).max(axis=1, keepdims=True)
    ex = np.where(mask, np.exp(np.where(mask, S - mx, 0.0)), 0.0)
    p = ex / ex.sum(axis=1, keepdims=True)

    def vjp(g):
        dot = (g * p).sum(axis=1, keepdims=True)
        return (p * (g - dot),)

    return scores.tape._record("masked_row_softmax", p, (scores,), vjp)


# ----------------------------------------------------------------------------
# optimisation


@dataclass
class AdamState:
    """Moment estimates for every parameter, keyed by name."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update. Inputs are left untouched."""
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    new_params, new_m, new_v = {}, {}, {}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise DimensionError(f"adam: gradient {g.shape} != parameter {p.shape} for {name!r}")
        m = state.m.get(name, np.zeros_like(p))
        v = state.v.get(name, np.zeros_like(p))
        if m.shape != p.shape or v.shape != p.shape:
            raise DimensionError(f"adam: moment shape mismatch for {name!r}")
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        new_params[name] = p - lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(new_m, new_v, t, b1, b2, state.eps)


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))
