"""Loss terms and anomaly scores.

Differentiable losses take :class:`~dcor.model.Reconstruction` objects and
return 1 x 1 tape variables; :func:`anomaly_scores` and :func:`row_distance`
work on plain arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numcore as nc
from .errors import ContractError, DimensionError, SpecError
from .model import GraphTensors, Reconstruction

CONTRAST_TARGETS = ("recon_vs_recon", "data_vs_recon")
REDUCTIONS = ("sum", "mean")


@dataclass(frozen=True)
class ObjectiveConfig:
    alpha: float = 0.5
    margin: float = 0.5
    lambda_rec: float = 0.5
    lambda_sc: float = 0.5
    contrast_target: str = "recon_vs_recon"
    reduction: str = "sum"

    def check(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise SpecError(f"alpha must be in [0, 1], got {self.alpha}")
        if not self.margin > 0:
            raise SpecError(f"margin must be > 0, got {self.margin}")
        if self.lambda_rec < 0 or self.lambda_sc < 0:
            raise SpecError("loss weights must be non-negative")
        if self.contrast_target not in CONTRAST_TARGETS:
            raise SpecError(f"contrast_target must be one of {CONTRAST_TARGETS}, got {self.contrast_target!r}")
        if self.reduction not in REDUCTIONS:
            raise SpecError(f"reduction must be one of {REDUCTIONS}, got {self.reduction!r}")


@dataclass(frozen=True)
class LossBreakdown:
    L_rec: float
    L_struct: float
    L_feat: float
    L_sc: float
    L_total: float


def row_distance(u, v) -> float:
    """Euclidean distance divided by sqrt(len)."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape or u.size == 0:
        raise DimensionError(f"row_distance needs equal non-empty lengths, got {u.size} and {v.size}")
    return float(np.linalg.norm(u - v) / np.sqrt(u.size))


def row_distances(U, V) -> nc.Var:
    """Per-row :func:`row_distance` as an n x 1 tape variable."""
    diff = nc.sub(U, V)
    cols = diff.shape[1]
    return nc.scale(nc.sqrt(nc.row_sum(nc.mul(diff, diff))), 1.0 / np.sqrt(cols))


def _sq_frobenius(diff: nc.Var) -> nc.Var:
    return nc.sum_all(nc.mul(diff, diff))


def reconstruction_loss(g: GraphTensors, rec: Reconstruction, alpha: float, reduction: str = "sum") -> nc.Var:
    """alpha * ||A - A_hat||_F^2 + (1 - alpha) * ||X - X_hat||_F^2.

    ``reduction="mean"`` divides each squared norm by its number of entries.
    """
    if rec.A_hat.shape != g.A.shape or rec.X_hat.shape != g.X.shape:
        raise DimensionError(f"reconstruction shapes {rec.A_hat.shape}, {rec.X_hat.shape} do not match graph")
    s = _sq_frobenius(nc.sub(g.A, rec.A_hat))
    a = _sq_frobenius(nc.sub(g.X, rec.X_hat))
    if reduction == "mean":
        s = nc.scale(s, 1.0 / g.A.size)
        a = nc.scale(a, 1.0 / g.X.size)
    elif reduction != "sum":
        raise SpecError(f"reduction must be 'sum' or 'mean', got {reduction!r}")
    return nc.add(nc.scale(s, alpha), nc.scale(a, 1.0 - alpha))


def margin_loss(dist: nc.Var, labels, margin: float) -> nc.Var:
    """Mean over nodes of ``d`` for label 0 and ``max(0, margin - d)`` for label 1."""
    y = np.asarray(labels, dtype=np.float64).reshape(-1, 1)
    if y.shape != dist.shape:
        raise ContractError(f"{y.shape[0]} labels for {dist.shape[0]} nodes")
    hinge = nc.relu(nc.add_scalar(nc.scale(dist, -1.0), margin))
    per_node = nc.add(nc.mul(dist, 1.0 - y), nc.mul(hinge, y))
    return nc.scale(nc.sum_all(per_node), 1.0 / y.shape[0])


def contrastive_loss(
    main_rec: Reconstruction,
    aug_rec: Reconstruction,
    labels,
    g: GraphTensors,
    cfg: ObjectiveConfig,
) -> tuple[nc.Var, nc.Var, nc.Var]:
    """(L_struct, L_feat, L_sc) from the augmented view's pseudo-labels."""
    labels = np.asarray(labels)
    if labels.shape != (g.n,):
        raise ContractError(f"{labels.size} labels for {g.n} nodes")
    if cfg.contrast_target == "recon_vs_recon":
        ref_A, ref_X = main_rec.A_hat, main_rec.X_hat
    else:
        ref_A, ref_X = g.A, g.X
    l_struct = margin_loss(row_distances(ref_A, aug_rec.A_hat), labels, cfg.margin)
    l_feat = margin_loss(row_distances(ref_X, aug_rec.X_hat), labels, cfg.margin)
    return l_struct, l_feat, nc.add(l_struct, l_feat)


def total_loss(l_rec, l_sc, lambda_rec: float, lambda_sc: float):
    """Weighted sum; works on tape variables or floats."""
    if lambda_rec < 0 or lambda_sc < 0:
        raise SpecError("loss weights must be non-negative")
    if isinstance(l_rec, nc.Var):
        return nc.add(nc.scale(l_rec, lambda_rec), nc.scale(l_sc, lambda_sc))
    return lambda_rec * l_rec + lambda_sc * l_sc


def anomaly_scores(A, X, A_hat, X_hat, alpha: float) -> np.ndarray:
    """alpha * ||A_i - A_hat_i|| + (1 - alpha) * ||X_i - X_hat_i|| per node."""
    A, X, A_hat, X_hat = (np.asarray(m, dtype=np.float64) for m in (A, X, A_hat, X_hat))
    if A.shape != A_hat.shape or X.shape != X_hat.shape or A.shape[0] != X.shape[0]:
        raise DimensionError(f"score inputs disagree: A {A.shape}/{A_hat.shape}, X {X.shape}/{X_hat.shape}")
    return alpha * np.linalg.norm(A - A_hat, axis=1) + (1.0 - alpha) * np.linalg.norm(X - X_hat, axis=1)
