"""Training loop, AUC evaluation and node ranking."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.stats import rankdata

from . import numcore as nc
from .augment import AugmentConfig, AugmentedView, make_view
from .errors import ContractError, SpecError, TrainingDivergedError, UndefinedAUCError
from .graphdata import AttributedGraph, fmt_float, validate
from .model import GraphTensors, forward, init_params, reconstruct
from .objective import (
    LossBreakdown,
    ObjectiveConfig,
    anomaly_scores,
    contrastive_loss,
    reconstruction_loss,
    total_loss,
)

logger = logging.getLogger(__name__)

ABLATIONS = ("full", "feature_aug_only", "adjacency_aug_only", "no_contrastive")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    lr: float = 0.01
    hidden: int = 128
    alpha: float = 0.5
    margin: float = 0.5
    lambda_rec: float = 0.5
    lambda_sc: float = 0.5
    contrast_target: str = "recon_vs_recon"
    reduction: str = "mean"  # per-entry averages keep L_rec on the scale of L_sc
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    seed: int = 0
    ablation: str = "full"
    resample_view_every: int | None = None
    grad_clip: float | None = None

    def check(self) -> None:
        if self.epochs < 1:
            raise SpecError(f"epochs must be >= 1, got {self.epochs}")
        if not self.lr > 0:
            raise SpecError(f"lr must be > 0, got {self.lr}")
        if self.hidden < 1:
            raise SpecError(f"hidden must be >= 1, got {self.hidden}")
        if self.ablation not in ABLATIONS:
            raise SpecError(f"ablation must be one of {ABLATIONS}, got {self.ablation!r}")
        if self.resample_view_every is not None and self.resample_view_every < 1:
            raise SpecError("resample_view_every must be >= 1")
        if self.grad_clip is not None and not self.grad_clip > 0:
            raise SpecError("grad_clip must be > 0")
        self.objective().check()
        self.augment.check()

    def objective(self) -> ObjectiveConfig:
        lambda_sc = 0.0 if self.ablation == "no_contrastive" else self.lambda_sc
        return ObjectiveConfig(self.alpha, self.margin, self.lambda_rec, lambda_sc, self.contrast_target, self.reduction)

    def view_config(self, block: int = 0) -> AugmentConfig:
        """Augmentation settings for the ``block``-th training view, ablation applied."""
        aug = self.augment
        if self.ablation == "feature_aug_only":
            aug = replace(aug, structure_rate=0.0)
        elif self.ablation == "adjacency_aug_only":
            aug = replace(aug, feature_rate=0.0)
        seed = int(np.random.SeedSequence([self.seed, aug.seed, 31, block]).generate_state(1)[0])
        return replace(aug, seed=seed)


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    L_rec: float
    L_struct: float
    L_feat: float
    L_sc: float
    L_total: float
    auc: float | None = None

    @property
    def losses(self) -> LossBreakdown:
        return LossBreakdown(self.L_rec, self.L_struct, self.L_feat, self.L_sc, self.L_total)

    def to_line(self) -> str:
        parts = [f'"epoch": {self.epoch}']
        for key in ("L_rec", "L_struct", "L_feat", "L_sc", "L_total"):
            parts.append(f'"{key}": {fmt_float(getattr(self, key))}')
        parts.append('"auc": ' + ("null" if self.auc is None else fmt_float(self.auc)))
        return "{" + ", ".join(parts) + "}"

    @classmethod
    def from_line(cls, line: str) -> "EpochMetrics":
        return cls(**json.loads(line))


def write_metrics(history, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for m in history:
            fh.write(m.to_line() + "\n")


def read_metrics(path) -> list[EpochMetrics]:
    with open(path, encoding="utf-8") as fh:
        return [EpochMetrics.from_line(line) for line in fh if line.strip()]


def evaluate_auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(anomaly scored above normal), ties count one half."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ContractError(f"{scores.size} scores for {labels.size} labels")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUCError("AUC needs both anomalous and normal labels")
    ranks = rankdata(scores, method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def rank_nodes(scores) -> np.ndarray:
    """Node ids by descending score; ties go to the lower id."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    return np.lexsort((np.arange(scores.size), -scores))


def _has_both_classes(labels) -> bool:
    return labels is not None and 0 < int(np.sum(labels)) < len(labels)


def score_graph(g: AttributedGraph, params: dict[str, np.ndarray], alpha: float) -> np.ndarray:
    rec = reconstruct(g, params)
    return anomaly_scores(g.adjacency(), g.features, rec["A_hat"], rec["X_hat"], alpha)


def epoch_loss(main: GraphTensors, aug: GraphTensors | None, labels, p: dict[str, nc.Var], ocfg: ObjectiveConfig):
    """Training objective on one tape: (loss var, [L_rec, L_struct, L_feat, L_sc, L_total], main reconstruction).

    ``aug=None`` skips the augmented forward pass and reports zero contrastive terms.
    """
    rec = forward(main, p)
    l_rec = reconstruction_loss(main, rec, ocfg.alpha, ocfg.reduction)
    if aug is None:
        L_rec = float(l_rec.value[0, 0])
        return nc.scale(l_rec, ocfg.lambda_rec), [L_rec, 0.0, 0.0, 0.0, total_loss(L_rec, 0.0, ocfg.lambda_rec, 0.0)], rec
    l_struct, l_feat, l_sc = contrastive_loss(rec, forward(aug, p), labels, main, ocfg)
    loss = total_loss(l_rec, l_sc, ocfg.lambda_rec, ocfg.lambda_sc)
    return loss, [float(v.value[0, 0]) for v in (l_rec, l_struct, l_feat, l_sc, loss)], rec


def train(
    g: AttributedGraph,
    cfg: TrainConfig,
    observer: Callable[[EpochMetrics], None] | None = None,
) -> tuple[dict[str, np.ndarray], list[EpochMetrics]]:
    """Full-batch training on ``g``; returns the final parameters and per-epoch metrics.

    Metrics of epoch ``k`` are measured before that epoch's parameter
    update. When ``g.ground_truth`` holds both classes, each record also
    carries the AUC of the current anomaly scores.
    """
    problems = validate(g)
    if problems:
        raise ContractError("invalid graph: " + "; ".join(problems[:5]))
    cfg.check()
    ocfg = cfg.objective()
    contrastive = cfg.ablation != "no_contrastive"
    main = GraphTensors.of(g)
    truth = g.ground_truth if _has_both_classes(g.ground_truth) else None

    params = init_params(g.n, g.d, cfg.hidden, cfg.seed)
    state = nc.AdamState()
    view: AugmentedView | None = None
    aug: GraphTensors | None = None
    history: list[EpochMetrics] = []

    for epoch in range(cfg.epochs):
        if contrastive and (view is None or (cfg.resample_view_every and epoch % cfg.resample_view_every == 0)):
            block = 0 if not cfg.resample_view_every else epoch // cfg.resample_view_every
            view = make_view(g, cfg.view_config(block))
            aug = GraphTensors.of(view.graph)

        tape = nc.Tape()
        p = {k: tape.param(v, name=k) for k, v in params.items()}
        loss, vals, rec = epoch_loss(main, aug, None if view is None else view.labels, p, ocfg)
        if not all(np.isfinite(vals)):
            raise TrainingDivergedError(epoch, f"losses {vals}")

        auc = None
        if truth is not None:
            s = anomaly_scores(main.A, main.X, rec.A_hat.value, rec.X_hat.value, cfg.alpha)
            auc = evaluate_auc(s, truth)
        record = EpochMetrics(epoch, *vals, auc=auc)
        history.append(record)
        if observer is not None:
            observer(record)

        grads = nc.backward(tape, loss)
        if cfg.grad_clip is not None:
            norm = np.sqrt(sum(float(np.sum(gr * gr)) for gr in grads.values()))
            if norm > cfg.grad_clip:
                grads = {k: gr * (cfg.grad_clip / norm) for k, gr in grads.items()}
        params, state = nc.adam_step(params, grads, state, cfg.lr)
        if not all(np.all(np.isfinite(v)) for v in params.values()):
            raise TrainingDivergedError(epoch, "non-finite parameters after update")
    return params, history
