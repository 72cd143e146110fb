"""Anomaly injection: build an augmented copy of a graph with per-node anomaly labels.

Four injections are available. Structural ones connect a group of nodes into a
clique or drop every edge of a node; feature ones overwrite a node's row with
the most distant row among a random candidate pool, or multiply the row by a
constant. The same machinery produces the contrastive training view and
labelled evaluation benchmarks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BudgetError, ContractError, SpecError
from .graphdata import AttributedGraph, save_graph_dir

STRUCTURAL_KINDS = ("clique", "isolate")
FEATURE_KINDS = ("copy", "scale")
PROVENANCE_FILE = "provenance.jsonl"


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class Injection:
    """One provenance record: what was injected where."""

    kind: str  # clique | isolate | feature_copy | feature_scale
    nodes: tuple[int, ...]
    params: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind, "nodes": list(self.nodes), "params": self.params}, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "Injection":
        rec = json.loads(line)
        return cls(rec["kind"], tuple(int(i) for i in rec["nodes"]), rec.get("params", {}))


@dataclass(frozen=True, eq=False)
class AugmentedView:
    """Augmented graph, its binary labels and the list of injections that produced it.

    ``graph.ground_truth`` is set to ``labels`` so a saved view doubles as a
    labelled benchmark.
    """

    graph: AttributedGraph
    labels: np.ndarray
    provenance: tuple[Injection, ...] = ()

    def affected_nodes(self) -> set[int]:
        return {i for rec in self.provenance for i in rec.nodes}


@dataclass(frozen=True)
class AugmentConfig:
    """Injection budget and per-kind parameters.

    ``base_count`` is the anomaly budget in nodes (``None`` means 5% of n).
    ``round(structure_rate * base_count)`` nodes receive structural
    anomalies and ``round(feature_rate * base_count)`` feature anomalies.
    """

    structure_rate: float = 0.5
    feature_rate: float = 0.5
    base_count: int | None = None
    clique_size: int = 10
    candidate_size: int = 50
    scale_factor: float = 10.0
    seed: int = 0

    def check(self) -> None:
        for name in ("structure_rate", "feature_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise SpecError(f"{name} must be in [0, 1], got {v}")
        if self.base_count is not None and self.base_count < 0:
            raise SpecError(f"base_count must be >= 0, got {self.base_count}")
        if self.clique_size < 2:
            raise SpecError(f"clique_size must be >= 2, got {self.clique_size}")
        if self.candidate_size < 1:
            raise SpecError(f"candidate_size must be >= 1, got {self.candidate_size}")
        if not self.scale_factor > 0:
            raise SpecError(f"scale_factor must be > 0, got {self.scale_factor}")

    def budget(self, n: int) -> int:
        return self.base_count if self.base_count is not None else max(1, round_half_up(0.05 * n))

    def counts(self, n: int) -> tuple[int, int]:
        base = self.budget(n)
        return round_half_up(self.structure_rate * base), round_half_up(self.feature_rate * base)


def _view(g: AttributedGraph, neighbors, features, affected, record) -> AugmentedView:
    labels = np.zeros(g.n, dtype=np.int64)
    labels[list(affected)] = 1
    graph = AttributedGraph(tuple(neighbors), features, labels)
    return AugmentedView(graph, labels, (record,))


def inject_structural(g: AttributedGraph, kind: str, targets) -> AugmentedView:
    """Connect ``targets`` into a clique, or disconnect a single target node."""
    targets = [int(t) for t in np.atleast_1d(targets)]
    if any(not 0 <= t < g.n for t in targets):
        raise ContractError(f"target outside [0, {g.n})")
    neighbors = list(g.neighbors)
    if kind == "clique":
        if len(targets) > g.n:
            raise BudgetError(f"clique of {len(targets)} nodes does not fit in n={g.n}")
        if len(set(targets)) != len(targets) or len(targets) < 2:
            raise ContractError("clique needs at least 2 distinct nodes")
        members = set(targets)
        for t in targets:
            neighbors[t] = np.union1d(neighbors[t], np.array(sorted(members - {t}), dtype=np.int64))
        record = Injection("clique", tuple(sorted(targets)), {"size": len(targets)})
    elif kind == "isolate":
        if len(targets) != 1:
            raise ContractError("isolate takes exactly one target")
        (t,) = targets
        for j in neighbors[t]:
            neighbors[j] = neighbors[j][neighbors[j] != t]
        record = Injection("isolate", (t,), {"removed_edges": int(len(neighbors[t]))})
        neighbors[t] = np.zeros(0, dtype=np.int64)
    else:
        raise ContractError(f"unknown structural kind {kind!r}; expected one of {STRUCTURAL_KINDS}")
    return _view(g, neighbors, g.features, targets, record)


def inject_feature(
    g: AttributedGraph,
    kind: str,
    target: int,
    rng: np.random.Generator | None = None,
    candidate_size: int = 50,
    scale_factor: float = 10.0,
) -> AugmentedView:
    """Replace ``target``'s features by the farthest of ``candidate_size`` random rows, or scale them."""
    target = int(target)
    if not 0 <= target < g.n:
        raise ContractError(f"target {target} outside [0, {g.n})")
    X = g.features.copy()
    if kind == "copy":
        if candidate_size >= g.n:
            raise BudgetError(f"candidate_size={candidate_size} needs at least {candidate_size + 1} nodes, n={g.n}")
        if rng is None:
            raise ContractError("copy needs an rng")
        others = np.delete(np.arange(g.n), target)
        pool = rng.choice(others, size=candidate_size, replace=False)
        dist = np.linalg.norm(X[pool] - X[target], axis=1)
        src = int(pool[np.argmax(dist)])
        X[target] = X[src]
        record = Injection(
            "feature_copy", (target,), {"source": src, "candidates": int(candidate_size), "distance": float(dist.max())}
        )
    elif kind == "scale":
        if not np.any(X[target]):
            raise ContractError(f"scaling the all-zero row of node {target} changes nothing")
        X[target] = X[target] * scale_factor
        record = Injection("feature_scale", (target,), {"factor": float(scale_factor)})
    else:
        raise ContractError(f"unknown feature kind {kind!r}; expected one of {FEATURE_KINDS}")
    return _view(g, g.neighbors, X, [target], record)


def compose(base: AttributedGraph, views) -> AugmentedView:
    """Chain of deltas to one view: the last graph, OR of labels, concatenated provenance."""
    labels = np.zeros(base.n, dtype=np.int64)
    provenance = []
    graph = base
    for v in views:
        labels |= v.labels
        provenance.extend(v.provenance)
        graph = v.graph
    graph = AttributedGraph(graph.neighbors, graph.features, labels.copy())
    return AugmentedView(graph, labels, tuple(provenance))


def structural_schedule(budget: int, clique_size: int) -> list[str]:
    """Alternate clique/isolate events until ``budget`` nodes are used.

    A clique that would overshoot the remaining budget is replaced by an
    isolation, so the schedule always touches exactly ``budget`` nodes.
    """
    kinds = []
    left = budget
    want_clique = True
    while left > 0:
        if want_clique and clique_size <= left:
            kinds.append("clique")
            left -= clique_size
        else:
            kinds.append("isolate")
            left -= 1
        want_clique = not want_clique
    return kinds


def make_view(g: AttributedGraph, cfg: AugmentConfig) -> AugmentedView:
    """Inject the configured anomalies on distinct, uniformly drawn nodes.

    Structural events alternate clique/isolate and feature events alternate
    copy/scale. Isolation targets must have at least one edge and scale
    targets a non-zero row; ineligible draws are skipped so every labelled
    node actually changes.
    """
    cfg.check()
    n_struct, n_feat = cfg.counts(g.n)
    struct_kinds = structural_schedule(n_struct, cfg.clique_size)
    feat_kinds = [FEATURE_KINDS[k % 2] for k in range(n_feat)]
    if n_struct + n_feat > g.n:
        raise BudgetError(f"{n_struct + n_feat} affected nodes requested but n={g.n}")
    if "copy" in feat_kinds and cfg.candidate_size >= g.n:
        raise BudgetError(f"candidate_size={cfg.candidate_size} needs n > {cfg.candidate_size}, n={g.n}")

    rng = np.random.default_rng([cfg.seed, 11])
    order = rng.permutation(g.n)
    used = np.zeros(g.n, dtype=bool)
    current = g

    def draw(count, eligible=None):
        picked = []
        for v in order:
            if len(picked) == count:
                break
            if used[v] or (eligible is not None and not eligible(v)):
                continue
            picked.append(int(v))
        if len(picked) < count:
            raise BudgetError("not enough eligible nodes left for the requested injections")
        used[picked] = True
        return picked

    deltas = []
    for kind in struct_kinds:
        if kind == "clique":
            targets = draw(cfg.clique_size)
        else:
            targets = draw(1, lambda v: len(current.neighbors[v]) > 0)
        deltas.append(inject_structural(current, kind, targets))
        current = deltas[-1].graph
    for kind in feat_kinds:
        if kind == "scale":
            (target,) = draw(1, lambda v: bool(np.any(current.features[v])))
        else:
            (target,) = draw(1)
        deltas.append(inject_feature(current, kind, target, rng, cfg.candidate_size, cfg.scale_factor))
        current = deltas[-1].graph
    if not deltas:
        labels = np.zeros(g.n, dtype=np.int64)
        return AugmentedView(AttributedGraph(g.neighbors, g.features.copy(), labels.copy()), labels, ())
    return compose(g, deltas)


def save_view(view: AugmentedView, directory) -> Path:
    """Write the graph files (labels = view labels) plus a provenance sidecar."""
    directory = Path(directory)
    save_graph_dir(view.graph, directory)
    path = directory / PROVENANCE_FILE
    with open(path, "w", encoding="utf-8") as fh:
        for rec in view.provenance:
            fh.write(rec.to_json() + "\n")
    return path


def load_provenance(path) -> list[Injection]:
    with open(path, encoding="utf-8") as fh:
        return [Injection.from_json(line) for line in fh if line.strip()]
