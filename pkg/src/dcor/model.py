"""Dual autoencoder: attention-based structure autoencoder plus attribute autoencoder.

The structure encoder embeds node features with a dense layer, scores every
edge (including each node's self-loop) with an attention vector, and averages
the dense-layer embeddings of each neighbourhood with the softmax-normalised
scores. The adjacency decoder is the sigmoid of the embedding Gram matrix.

The attribute encoder embeds the *columns* of X (one row per attribute), so
its first weight matrix has one row per node and the model is transductive.
Attributes are decoded as the product of node and attribute embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import numcore as nc
from .errors import DimensionError, ParseError
from .graphdata import AttributedGraph, fmt_float

PARAM_SHAPES = {
    "W_V1": ("d", "h"),
    "b_V1": (1, "h"),
    "W_V2": ("h", "h"),
    "a": ("2h", 1),
    "W_A1": ("n", "h"),
    "b_A1": (1, "h"),
    "W_A2": ("h", "h"),
    "b_A2": (1, "h"),
}
PARAM_NAMES = tuple(PARAM_SHAPES)
CHECKPOINT_MAGIC = "dcor-checkpoint"
CHECKPOINT_VERSION = 1


def param_shapes(n: int, d: int, h: int) -> dict[str, tuple[int, int]]:
    sizes = {"n": n, "d": d, "h": h, "2h": 2 * h, 1: 1}
    return {k: (sizes[r], sizes[c]) for k, (r, c) in PARAM_SHAPES.items()}


def init_params(n: int, d: int, h: int, seed: int) -> dict[str, np.ndarray]:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng([seed, 21])
    params = {}
    for name, (r, c) in param_shapes(n, d, h).items():
        params[name] = np.zeros((r, c)) if name.startswith("b_") else nc.glorot_uniform(rng, r, c)
    return params


def check_params(params: dict[str, np.ndarray], n: int, d: int) -> int:
    """Validate shapes against a graph and return the embedding dimension."""
    missing = set(PARAM_NAMES) - set(params)
    if missing:
        raise DimensionError(f"missing parameters: {sorted(missing)}")
    h = params["W_V1"].shape[1]
    for name, shape in param_shapes(n, d, h).items():
        if params[name].shape != shape:
            raise DimensionError(f"{name} has shape {params[name].shape}, expected {shape} for n={n}, d={d}, h={h}")
    return h


@dataclass(frozen=True)
class GraphTensors:
    """Constants derived from a graph once and reused every epoch."""

    A: np.ndarray
    X: np.ndarray
    XT: np.ndarray
    indptr: np.ndarray  # CSR of A + I
    src: np.ndarray
    dst: np.ndarray

    @classmethod
    def of(cls, g: AttributedGraph) -> "GraphTensors":
        indptr, dst = g.csr_with_self_loops()
        src = np.repeat(np.arange(g.n), np.diff(indptr))
        X = np.ascontiguousarray(g.features, dtype=np.float64)
        return cls(g.adjacency(), X, np.ascontiguousarray(X.T), indptr, src, dst)

    @property
    def n(self) -> int:
        return self.X.shape[0]


@dataclass
class Reconstruction:
    """Forward-pass outputs as tape variables; ``.value`` gives the arrays."""

    A_hat: nc.Var
    X_hat: nc.Var
    Z_V: nc.Var
    Z_A: nc.Var

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k).value for k in ("A_hat", "X_hat", "Z_V", "Z_A")}


def _tensors(g) -> GraphTensors:
    return g if isinstance(g, GraphTensors) else GraphTensors.of(g)


def structure_encode(g, p: dict[str, nc.Var]) -> nc.Var:
    """Node embeddings Z_V (n x h) from features and one attention aggregation step."""
    t = _tensors(g)
    tape = p["W_V1"].tape
    if t.X.shape[1] != p["W_V1"].shape[0]:
        raise DimensionError(f"features have {t.X.shape[1]} columns, W_V1 expects {p['W_V1'].shape[0]}")
    h = p["W_V1"].shape[1]
    X = tape.const(t.X)
    z_tilde = nc.leaky_relu(nc.add(nc.matmul(X, p["W_V1"]), p["b_V1"]))
    proj = nc.matmul(z_tilde, p["W_V2"])
    # a^T [W z_i || W z_j] splits into a per-source and a per-target term
    s_src = nc.matmul(proj, nc.gather_rows(p["a"], np.arange(h)))
    s_dst = nc.matmul(proj, nc.gather_rows(p["a"], np.arange(h, 2 * h)))
    scores = nc.leaky_relu(nc.add(nc.gather_rows(s_src, t.src), nc.gather_rows(s_dst, t.dst)))
    gamma = nc.segment_softmax(scores, t.indptr)
    messages = nc.scale_rows(nc.gather_rows(z_tilde, t.dst), gamma)
    return nc.segment_sum(messages, t.indptr)


def structure_decode(z_v: nc.Var) -> nc.Var:
    return nc.sigmoid(nc.gram(z_v))


def attribute_encode(g, p: dict[str, nc.Var]) -> nc.Var:
    """Attribute embeddings Z_A (d x h)."""
    t = _tensors(g)
    if p["W_A1"].shape[0] != t.n:
        raise DimensionError(f"W_A1 has {p['W_A1'].shape[0]} rows but the graph has n={t.n} nodes")
    XT = p["W_A1"].tape.const(t.XT)
    z_tilde = nc.leaky_relu(nc.add(nc.matmul(XT, p["W_A1"]), p["b_A1"]))
    return nc.add(nc.matmul(z_tilde, p["W_A2"]), p["b_A2"])


def attribute_decode(z_v: nc.Var, z_a: nc.Var) -> nc.Var:
    if z_v.shape[1] != z_a.shape[1]:
        raise DimensionError(f"embedding widths differ: Z_V {z_v.shape}, Z_A {z_a.shape}")
    return nc.matmul(z_v, nc.transpose(z_a))


def forward(g, p: dict[str, nc.Var]) -> Reconstruction:
    """Full reconstruction of one graph. ``p`` maps parameter names to tape variables."""
    z_v = structure_encode(g, p)
    z_a = attribute_encode(g, p)
    return Reconstruction(structure_decode(z_v), attribute_decode(z_v, z_a), z_v, z_a)


def reconstruct(g, params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Convenience wrapper: plain arrays in, plain arrays out."""
    t = _tensors(g)
    check_params(params, t.n, t.X.shape[1])
    tape = nc.Tape()
    p = {k: tape.const(v) for k, v in params.items()}
    return forward(t, p).arrays()


# ----------------------------------------------------------------------------
# checkpoints


def save_checkpoint(params: dict[str, np.ndarray], path) -> None:
    """Text container: a magic/version line, then per parameter a header and one line per row."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}\n")
        for name in sorted(params):
            arr = np.asarray(params[name], dtype=np.float64)
            r, c = arr.shape
            fh.write(f"param {name} {r} {c}\n")
            for row in arr:
                fh.write(" ".join(fmt_float(x) for x in row) + "\n")


def load_checkpoint(path) -> dict[str, np.ndarray]:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].split() != [CHECKPOINT_MAGIC, str(CHECKPOINT_VERSION)]:
        raise ParseError("not a version-1 checkpoint", path, 1)
    params = {}
    i = 1
    while i < len(lines):
        head = lines[i].split()
        if len(head) != 4 or head[0] != "param":
            raise ParseError(f"expected 'param NAME ROWS COLS', got {lines[i]!r}", path, i + 1)
        name, r, c = head[1], int(head[2]), int(head[3])
        rows = []
        for k in range(r):
            lineno = i + 2 + k
            if lineno > len(lines):
                raise ParseError(f"truncated parameter {name}", path, lineno)
            vals = lines[lineno - 1].split()
            if len(vals) != c:
                raise ParseError(f"{name}: expected {c} values, got {len(vals)}", path, lineno)
            rows.append([float(v) for v in vals])
        params[name] = np.array(rows, dtype=np.float64).reshape(r, c)
        i += 1 + r
    return params
