"""Attributed graphs: storage, text IO, validation, scaling and a planted-partition generator.

File formats (all plain text, 0-based node ids):

* edges: one ``u v`` pair per line, whitespace separated; ``#`` starts a comment line
* features: CSV, one row per node, no header
* labels: one ``0``/``1`` per line, one line per node
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ParseError, SpecError

logger = logging.getLogger(__name__)


def fmt_float(x: float) -> str:
    """17 significant digits: enough to round-trip any float64."""
    return format(float(x), ".17g")


@dataclass(frozen=True, eq=False)
class AttributedGraph:
    """Undirected graph with a feature row per node.

    ``neighbors[i]`` is a sorted int array of the nodes adjacent to ``i``.
    The constructor does not check invariants so that malformed graphs can be
    represented and reported by :func:`validate`; use :meth:`from_edges` to
    build a graph from raw edges.
    """

    neighbors: tuple[np.ndarray, ...]
    features: np.ndarray
    ground_truth: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.neighbors)

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @classmethod
    def from_edges(cls, n: int, edges, features, ground_truth=None) -> "AttributedGraph":
        """Symmetrise ``edges``, collapsing duplicates and dropping self-loops."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise ValueError(f"edge endpoint outside [0, {n})")
        edges = edges[edges[:, 0] != edges[:, 1]]
        both = np.vstack([edges, edges[:, ::-1]])
        both = np.unique(both, axis=0) if both.size else both
        starts = np.searchsorted(both[:, 0], np.arange(n + 1)) if both.size else np.zeros(n + 1, int)
        nbrs = tuple(both[starts[i] : starts[i + 1], 1].copy() for i in range(n))
        feats = np.array(features, dtype=np.float64).reshape(n, -1) if n else np.zeros((0, 0))
        gt = None if ground_truth is None else np.asarray(ground_truth, dtype=np.int64).copy()
        return cls(nbrs, feats, gt)

    def degree(self) -> np.ndarray:
        return np.array([len(nb) for nb in self.neighbors], dtype=np.int64)

    def edges(self) -> np.ndarray:
        """Undirected edges as an (m, 2) array with u < v, lexicographically sorted."""
        rows = [np.column_stack([np.full(len(nb), i), nb]) for i, nb in enumerate(self.neighbors)]
        if not rows:
            return np.zeros((0, 2), dtype=np.int64)
        e = np.vstack(rows).astype(np.int64)
        return e[e[:, 0] < e[:, 1]]

    @property
    def num_edges(self) -> int:
        return int(self.degree().sum()) // 2

    def adjacency(self) -> np.ndarray:
        """Dense n x n float64 adjacency."""
        A = np.zeros((self.n, self.n))
        for i, nb in enumerate(self.neighbors):
            A[i, nb] = 1.0
        return A

    def csr_with_self_loops(self) -> tuple[np.ndarray, np.ndarray]:
        """(indptr, indices) of A + I with sorted column indices per row."""
        counts = np.array([len(nb) + 1 for nb in self.neighbors], dtype=np.intp)
        indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.intp)
        indices = np.concatenate(
            [np.sort(np.append(nb, i)) for i, nb in enumerate(self.neighbors)]
        ).astype(np.intp) if self.n else np.zeros(0, np.intp)
        return indptr, indices

    def with_features(self, features) -> "AttributedGraph":
        return replace(self, features=np.asarray(features, dtype=np.float64))

    def with_ground_truth(self, labels) -> "AttributedGraph":
        return replace(self, ground_truth=None if labels is None else np.asarray(labels, dtype=np.int64))

    def same_as(self, other: "AttributedGraph") -> bool:
        """Exact equality of structure, features and labels."""
        if self.n != other.n or self.features.shape != other.features.shape:
            return False
        if any(not np.array_equal(a, b) for a, b in zip(self.neighbors, other.neighbors)):
            return False
        if not np.array_equal(self.features, other.features):
            return False
        if (self.ground_truth is None) != (other.ground_truth is None):
            return False
        return self.ground_truth is None or np.array_equal(self.ground_truth, other.ground_truth)


def validate(g: AttributedGraph) -> list[str]:
    """Every invariant violation of ``g``; an empty list means the graph is well formed."""
    problems = []
    n = g.n
    nbr_sets = [set(np.asarray(nb).tolist()) for nb in g.neighbors]
    for i, nb in enumerate(g.neighbors):
        nb = np.asarray(nb)
        if nb.size and (nb.min() < 0 or nb.max() >= n):
            problems.append(f"node {i}: neighbor id outside [0, {n})")
            continue
        if np.any(nb == i):
            problems.append(f"node {i}: self-loop")
        if nb.size != np.unique(nb).size:
            problems.append(f"node {i}: duplicate neighbor (non-binary adjacency)")
        for j in nb:
            if j != i and i not in nbr_sets[j]:
                problems.append(f"asymmetric adjacency: {i}->{j} without {j}->{i}")
    feats = np.asarray(g.features)
    if feats.ndim != 2:
        problems.append(f"features must be 2-D, got {feats.ndim}-D")
    elif feats.shape[0] != n:
        problems.append(f"features have {feats.shape[0]} rows, expected n={n}")
    elif not np.all(np.isfinite(feats)):
        problems.append("features contain non-finite values")
    if g.ground_truth is not None:
        gt = np.asarray(g.ground_truth)
        if gt.shape != (n,):
            problems.append(f"ground_truth has length {gt.size}, expected n={n}")
        elif not np.all((gt == 0) | (gt == 1)):
            problems.append("ground_truth values must be 0 or 1")
    return problems


def normalize_features(g: AttributedGraph) -> AttributedGraph:
    """Per-column min-max scaling to [0, 1]; constant columns become 0."""
    X = g.features
    if X.size == 0:
        return g
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    safe = np.where(span > 0, span, 1.0)
    out = np.where(span > 0, (X - lo) / safe, 0.0)
    return g.with_features(out)


# ----------------------------------------------------------------------------
# IO


def _read_lines(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read().splitlines()


def load_features(path) -> np.ndarray:
    rows = []
    for lineno, raw in enumerate(_read_lines(path), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            rows.append([float(c) for c in line.split(",")])
        except ValueError:
            raise ParseError(f"non-numeric feature cell in {line!r}", path, lineno) from None
        if not all(np.isfinite(rows[-1])):
            raise ParseError(f"non-finite feature cell in {line!r}", path, lineno)
        if len(rows[-1]) != len(rows[0]):
            raise ParseError(f"expected {len(rows[0])} columns, got {len(rows[-1])}", path, lineno)
    if not rows:
        return np.zeros((0, 0))
    return np.array(rows, dtype=np.float64)


def load_labels(path, n: int | None = None) -> np.ndarray:
    labels = []
    for lineno, raw in enumerate(_read_lines(path), start=1):
        line = raw.strip()
        if not line:
            continue
        if line not in ("0", "1"):
            raise ParseError(f"label must be 0 or 1, got {line!r}", path, lineno)
        labels.append(int(line))
    if n is not None and len(labels) != n:
        raise ParseError(f"{len(labels)} labels for {n} nodes", path)
    return np.array(labels, dtype=np.int64)


def load_edges(path, n: int) -> np.ndarray:
    edges = []
    self_loops = 0
    for lineno, raw in enumerate(_read_lines(path), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"expected two node ids, got {line!r}", path, lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"non-integer node id in {line!r}", path, lineno) from None
        for x in (u, v):
            if not 0 <= x < n:
                raise ParseError(f"node id {x} out of range for n={n}", path, lineno)
        if u == v:
            self_loops += 1
            continue
        edges.append((u, v))
    if self_loops:
        logger.warning("%s: dropped %d self-loop(s)", path, self_loops)
    return np.array(edges, dtype=np.int64).reshape(-1, 2)


def load_graph(edge_path, feature_path, label_path=None) -> AttributedGraph:
    """Read a graph; ``n`` is the number of feature rows."""
    X = load_features(feature_path)
    n = X.shape[0]
    edges = load_edges(edge_path, n)
    labels = None if label_path is None else load_labels(label_path, n)
    return AttributedGraph.from_edges(n, edges, X, labels)


def save_graph(g: AttributedGraph, edge_path, feature_path, label_path=None) -> None:
    with open(edge_path, "w", encoding="utf-8") as fh:
        for u, v in g.edges():
            fh.write(f"{u} {v}\n")
    with open(feature_path, "w", encoding="utf-8") as fh:
        for row in g.features:
            fh.write(",".join(fmt_float(x) for x in row) + "\n")
    if label_path is not None:
        labels = g.ground_truth if g.ground_truth is not None else np.zeros(g.n, dtype=np.int64)
        save_labels(labels, label_path)


def save_labels(labels, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for y in np.asarray(labels, dtype=np.int64):
            fh.write(f"{int(y)}\n")


GRAPH_FILES = ("edges.txt", "features.csv", "labels.txt")


def save_graph_dir(g: AttributedGraph, directory) -> tuple[Path, Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = tuple(directory / name for name in GRAPH_FILES)
    save_graph(g, *paths)
    return paths


def load_graph_dir(directory) -> AttributedGraph:
    directory = Path(directory)
    e, f, l = (directory / name for name in GRAPH_FILES)
    return load_graph(e, f, l if l.exists() else None)


# ----------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class SynthSpec:
    """Planted-partition generator settings."""

    n: int = 500
    d: int = 32
    communities: int = 4
    p_in: float = 0.15
    p_out: float = 0.01
    feature_noise: float = 0.1
    seed: int = 0

    def check(self) -> None:
        if self.n < 1 or self.d < 1:
            raise SpecError(f"n and d must be >= 1, got n={self.n}, d={self.d}")
        if self.communities < 1:
            raise SpecError(f"communities must be >= 1, got {self.communities}")
        if not 0.0 <= self.p_out <= self.p_in <= 1.0:
            raise SpecError(f"need 0 <= p_out <= p_in <= 1, got p_in={self.p_in}, p_out={self.p_out}")
        if self.feature_noise < 0:
            raise SpecError(f"feature_noise must be >= 0, got {self.feature_noise}")


def community_assignment(spec: SynthSpec) -> np.ndarray:
    rng = np.random.default_rng([spec.seed, 1])
    return rng.permutation(np.arange(spec.n) % spec.communities)


def generate_synthetic(spec: SynthSpec) -> AttributedGraph:
    """Planted-partition graph with community-direction features.

    Nodes are split into balanced communities (random assignment). Community
    ``c`` has mean feature vector ``e_(c mod d)``; each row adds isotropic
    Gaussian noise with standard deviation ``feature_noise``.
    """
    spec.check()
    comm = community_assignment(spec)
    rng = np.random.default_rng([spec.seed, 2])
    n = spec.n
    iu, ju = np.triu_indices(n, k=1)
    p = np.where(comm[iu] == comm[ju], spec.p_in, spec.p_out)
    keep = rng.random(iu.size) < p
    edges = np.column_stack([iu[keep], ju[keep]])
    means = np.zeros((n, spec.d))
    means[np.arange(n), comm % spec.d] = 1.0
    frng = np.random.default_rng([spec.seed, 3])
    X = means + spec.feature_noise * frng.standard_normal((n, spec.d))
    return AttributedGraph.from_edges(n, edges, X, np.zeros(n, dtype=np.int64))


def expected_edge_stats(spec: SynthSpec) -> tuple[float, float]:
    """Mean and variance of the edge count given the community assignment."""
    comm = community_assignment(spec)
    sizes = np.bincount(comm, minlength=spec.communities)
    pairs_in = float(np.sum(sizes * (sizes - 1) / 2))
    pairs_out = spec.n * (spec.n - 1) / 2 - pairs_in
    mean = pairs_in * spec.p_in + pairs_out * spec.p_out
    var = pairs_in * spec.p_in * (1 - spec.p_in) + pairs_out * spec.p_out * (1 - spec.p_out)
    return mean, var
