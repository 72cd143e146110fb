"""Finite-difference check of the full training objective on a small random instance."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import numcore as nc
from .augment import AugmentConfig, make_view
from .graphdata import AttributedGraph
from .model import GraphTensors, init_params
from .trainer import TrainConfig, epoch_loss

DEFAULT_TOL = 1e-3


@dataclass(frozen=True)
class GradcheckSpec:
    n: int = 12
    d: int = 8
    hidden: int = 8
    edge_prob: float = 0.3
    step: float = 1e-5
    seed: int = 0
    ablation: str = "full"


@dataclass
class GradcheckReport:
    errors: dict[str, float]
    tol: float

    @property
    def max_error(self) -> float:
        return max(self.errors.values())

    @property
    def ok(self) -> bool:
        return self.max_error < self.tol

    def lines(self) -> list[str]:
        out = [f"{name} {err:.3e}" for name, err in sorted(self.errors.items())]
        out.append(f"max {self.max_error:.3e} tol {self.tol:.0e} {'PASS' if self.ok else 'FAIL'}")
        return out


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    """Normwise relative error ||a - b|| / (||a|| + ||b||); 0 when both vanish."""
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    return 0.0 if denom == 0 else float(np.linalg.norm(a - b) / denom)


def random_instance(spec: GradcheckSpec) -> AttributedGraph:
    rng = np.random.default_rng([spec.seed, 41])
    iu, ju = np.triu_indices(spec.n, 1)
    keep = rng.random(iu.size) < spec.edge_prob
    X = rng.uniform(-1.0, 1.0, (spec.n, spec.d))
    return AttributedGraph.from_edges(spec.n, np.column_stack([iu[keep], ju[keep]]), X)


def run_gradcheck(spec: GradcheckSpec = GradcheckSpec(), cfg: TrainConfig | None = None, tol: float = DEFAULT_TOL):
    """Compare analytic and central-difference gradients of the training loss for every parameter.

    Parameters are perturbed away from the initialisation so that biases and
    the attention vector are not sitting at zero.
    """
    g = random_instance(spec)
    cfg = cfg or TrainConfig()
    cfg = replace(
        cfg,
        hidden=spec.hidden,
        seed=spec.seed,
        ablation=spec.ablation,
        augment=replace(cfg.augment, base_count=4, clique_size=3, candidate_size=5),
    )
    cfg.check()
    ocfg = cfg.objective()
    main = GraphTensors.of(g)
    aug, labels = None, None
    if cfg.ablation != "no_contrastive":
        view = make_view(g, cfg.view_config(0))
        aug, labels = GraphTensors.of(view.graph), view.labels

    rng = np.random.default_rng([spec.seed, 42])
    params = init_params(spec.n, spec.d, spec.hidden, spec.seed)
    params = {k: v + 0.1 * rng.standard_normal(v.shape) for k, v in params.items()}

    tape = nc.Tape()
    loss, _, _ = epoch_loss(main, aug, labels, {k: tape.param(v, name=k) for k, v in params.items()}, ocfg)
    analytic = nc.backward(tape, loss)

    def value() -> float:
        t = nc.Tape()
        out, _, _ = epoch_loss(main, aug, labels, {k: t.const(v) for k, v in params.items()}, ocfg)
        return float(out.value[0, 0])

    errors = {}
    for name, x in params.items():
        num = np.zeros_like(x)
        for idx in np.ndindex(x.shape):
            old = x[idx]
            x[idx] = old + spec.step
            up = value()
            x[idx] = old - spec.step
            down = value()
            x[idx] = old
            num[idx] = (up - down) / (2 * spec.step)
        errors[name] = rel_error(analytic[name], num)
    return GradcheckReport(errors, tol)
