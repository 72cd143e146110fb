"""Command-line entry point: ``dcor {synth,augment,train,score,eval,gradcheck}``.

Every command reads an optional flat ``key = value`` config file, applies
``--set key=value`` overrides and ``--seed``, writes the fully resolved
config next to its outputs and exits non-zero on any validation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .augment import AugmentConfig, make_view, save_view
from .errors import DcorError
from .graphdata import SynthSpec, fmt_float, generate_synthetic, load_graph_dir, normalize_features, save_graph_dir
from .gradcheck import GradcheckSpec, run_gradcheck
from .model import load_checkpoint, save_checkpoint
from .trainer import ABLATIONS, TrainConfig, evaluate_auc, rank_nodes, score_graph, train, write_metrics

logger = logging.getLogger("dcor")

RESOLVED_FILE = "resolved_config.txt"
METRICS_FILE = "metrics.jsonl"
CHECKPOINT_FILE = "checkpoint.txt"
SCORES_FILE = "scores.txt"
AUC_FILE = "auc.json"
GRADCHECK_FILE = "gradcheck.txt"


class ConfigError(DcorError):
    def __init__(self, key: str, message: str):
        super().__init__(f"config key {key!r}: {message}")
        self.key = key


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _optional(kind):
    def parse(text: str):
        return None if text.lower() in ("none", "") else kind(text)

    return parse


_TYPES = {
    "int": int,
    "float": float,
    "str": str,
    "bool": _parse_bool,
    "int?": _optional(int),
    "float?": _optional(float),
    "str?": _optional(str),
}


@dataclass(frozen=True)
class Key:
    name: str
    kind: str
    default: object
    help: str


_SYNTH, _AUG, _TRAIN = SynthSpec(), AugmentConfig(), TrainConfig()

KEYS = (
    Key("seed", "int", 0, "master seed; --seed overrides"),
    # synthetic graph
    Key("n", "int", _SYNTH.n, "synth: node count"),
    Key("d", "int", _SYNTH.d, "synth: feature count"),
    Key("communities", "int", _SYNTH.communities, "synth: planted communities"),
    Key("p_in", "float", _SYNTH.p_in, "synth: within-community edge probability"),
    Key("p_out", "float", _SYNTH.p_out, "synth: between-community edge probability"),
    Key("feature_noise", "float", _SYNTH.feature_noise, "synth: feature noise std"),
    # anomaly injection (augment command and the training view)
    Key("structure_rate", "float", _AUG.structure_rate, "share of the budget given to structural anomalies"),
    Key("feature_rate", "float", _AUG.feature_rate, "share of the budget given to feature anomalies"),
    Key("base_count", "int?", _AUG.base_count, "anomaly budget in nodes; none = 5% of n"),
    Key("clique_size", "int", _AUG.clique_size, "nodes per injected clique"),
    Key("candidate_size", "int", _AUG.candidate_size, "candidate pool for feature copying"),
    Key("scale_factor", "float", _AUG.scale_factor, "multiplier for feature scaling"),
    # training
    Key("epochs", "int", _TRAIN.epochs, "training epochs"),
    Key("lr", "float", _TRAIN.lr, "Adam learning rate"),
    Key("hidden", "int", _TRAIN.hidden, "embedding dimension h"),
    Key("alpha", "float", _TRAIN.alpha, "structure/attribute trade-off"),
    Key("margin", "float", _TRAIN.margin, "contrastive margin m"),
    Key("lambda_rec", "float", _TRAIN.lambda_rec, "reconstruction loss weight"),
    Key("lambda_sc", "float", _TRAIN.lambda_sc, "contrastive loss weight"),
    Key("contrast_target", "str", _TRAIN.contrast_target, "recon_vs_recon or data_vs_recon"),
    Key("reduction", "str", _TRAIN.reduction, "reconstruction loss reduction: sum or mean"),
    Key("ablation", "str", _TRAIN.ablation, "one of " + ", ".join(ABLATIONS) + "; --ablation overrides"),
    Key("resample_view_every", "int?", _TRAIN.resample_view_every, "redraw the training view every k epochs"),
    Key("grad_clip", "float?", _TRAIN.grad_clip, "global gradient-norm clip"),
    Key("normalize", "bool", False, "min-max scale features before training/scoring"),
    # io
    Key("graph", "str?", None, "input graph directory; --graph overrides"),
    Key("checkpoint", "str?", None, "checkpoint file for score; --checkpoint overrides"),
    Key("scores", "str?", None, "scores file for eval; --scores overrides"),
)
KEY_INDEX = {k.name: k for k in KEYS}


def _format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


class RunConfig(dict):
    """Resolved key/value settings with typed values."""

    @classmethod
    def defaults(cls) -> "RunConfig":
        return cls({k.name: k.default for k in KEYS})

    def set(self, key: str, text: str, where: str = "") -> None:
        if key not in KEY_INDEX:
            raise ConfigError(key, f"unknown key{where}")
        try:
            self[key] = _TYPES[KEY_INDEX[key].kind](text.strip())
        except ValueError as exc:
            raise ConfigError(key, f"{exc}{where}") from None

    @classmethod
    def load(cls, path) -> "RunConfig":
        cfg = cls.defaults()
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(line, f"expected 'key = value' at {path}:{lineno}")
                key, value = (s.strip() for s in line.split("=", 1))
                cfg.set(key, value, f" at {path}:{lineno}")
        return cfg

    def dump(self) -> str:
        return "".join(f"{k.name} = {_format_value(self[k.name])}\n" for k in KEYS)

    # typed views -------------------------------------------------------------

    def synth_spec(self) -> SynthSpec:
        return _checked(SynthSpec(*(self[f.name] for f in fields(SynthSpec))))

    def augment_config(self) -> AugmentConfig:
        names = [f.name for f in fields(AugmentConfig) if f.name != "seed"]
        return _checked(AugmentConfig(**{n: self[n] for n in names}, seed=self["seed"]))

    def train_config(self) -> TrainConfig:
        names = [f.name for f in fields(TrainConfig) if f.name not in ("augment", "seed")]
        return _checked(TrainConfig(**{n: self[n] for n in names}, augment=self.augment_config(), seed=self["seed"]))


def _checked(obj):
    obj.check()
    return obj


# ----------------------------------------------------------------------------
# commands


def _require(cfg: RunConfig, key: str) -> Path:
    if cfg[key] is None:
        raise ConfigError(key, f"required; pass --{key} or set it in the config")
    path = Path(cfg[key])
    if not path.exists():
        raise ConfigError(key, f"{path} does not exist")
    return path


def _input_graph(cfg: RunConfig):
    g = load_graph_dir(_require(cfg, "graph"))
    return normalize_features(g) if cfg["normalize"] else g


def cmd_synth(cfg: RunConfig, out: Path) -> int:
    g = generate_synthetic(cfg.synth_spec())
    save_graph_dir(g, out)
    logger.info("synth: n=%d d=%d edges=%d -> %s", g.n, g.d, g.num_edges, out)
    return 0


def cmd_augment(cfg: RunConfig, out: Path) -> int:
    g = load_graph_dir(_require(cfg, "graph"))
    view = make_view(g, cfg.augment_config())
    save_view(view, out)
    logger.info("augment: %d anomalous nodes from %d injections -> %s", view.labels.sum(), len(view.provenance), out)
    return 0


def cmd_train(cfg: RunConfig, out: Path) -> int:
    g = _input_graph(cfg)
    tcfg = cfg.train_config()

    def observe(m):
        if m.epoch % 20 == 0 or m.epoch == tcfg.epochs - 1:
            auc = "" if m.auc is None else f" auc={m.auc:.4f}"
            logger.info("epoch %d L_total=%.6g L_rec=%.6g L_sc=%.6g%s", m.epoch, m.L_total, m.L_rec, m.L_sc, auc)

    params, history = train(g, tcfg, observer=observe)
    write_metrics(history, out / METRICS_FILE)
    save_checkpoint(params, out / CHECKPOINT_FILE)
    return 0


def cmd_score(cfg: RunConfig, out: Path) -> int:
    g = _input_graph(cfg)
    params = load_checkpoint(_require(cfg, "checkpoint"))
    scores = score_graph(g, params, cfg["alpha"])
    order = rank_nodes(scores)
    with open(out / SCORES_FILE, "w", encoding="utf-8") as fh:
        for rank, node in enumerate(order, 1):
            fh.write(f"{node} {fmt_float(scores[node])} {rank}\n")
    return 0


def read_scores(path) -> np.ndarray:
    rows = [line.split() for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]
    scores = np.full(len(rows), np.nan)
    for node, score, _ in rows:
        scores[int(node)] = float(score)
    if np.isnan(scores).any():
        raise ConfigError("scores", f"{path} does not hold one score per node 0..{len(rows) - 1}")
    return scores


def cmd_eval(cfg: RunConfig, out: Path) -> int:
    g = load_graph_dir(_require(cfg, "graph"))
    if g.ground_truth is None:
        raise ConfigError("graph", "eval needs labels.txt in the graph directory")
    scores = read_scores(_require(cfg, "scores"))
    if scores.size != g.n:
        raise ConfigError("scores", f"{scores.size} scores for {g.n} nodes")
    auc = evaluate_auc(scores, g.ground_truth)
    report = {"auc": auc, "n": g.n, "n_anomalous": int(g.ground_truth.sum())}
    (out / AUC_FILE).write_text(json.dumps(report, sort_keys=True) + "\n", encoding="utf-8")
    logger.info("eval: auc=%.6f", auc)
    return 0


def cmd_gradcheck(cfg: RunConfig, out: Path) -> int:
    report = run_gradcheck(GradcheckSpec(seed=cfg["seed"], ablation=cfg["ablation"]), cfg.train_config())
    text = "\n".join(report.lines()) + "\n"
    (out / GRADCHECK_FILE).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0 if report.ok else 1


COMMANDS = {
    "synth": (cmd_synth, "generate a planted-partition attributed graph"),
    "augment": (cmd_augment, "inject labelled anomalies into a graph"),
    "train": (cmd_train, "train the model; writes checkpoint and per-epoch metrics"),
    "score": (cmd_score, "score and rank every node with a trained checkpoint"),
    "eval": (cmd_eval, "AUC of a scores file against the graph's labels"),
    "gradcheck": (cmd_gradcheck, "finite-difference check of the training gradients"),
}


def build_parser() -> argparse.ArgumentParser:
    keys = "\n".join(f"  {k.name:<20} {_format_value(k.default):<15} {k.help}" for k in KEYS)
    parser = argparse.ArgumentParser(
        prog="dcor",
        description="Dual-autoencoder graph anomaly detection with contrastive learning.",
        epilog="config keys (key = value, one per line):\n" + keys,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", type=Path, help="flat key = value config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", type=Path, required=True, help="output directory (created if missing)")
        p.add_argument("--ablation", choices=ABLATIONS, help="override the config ablation")
        p.add_argument("--graph", help="input graph directory")
        p.add_argument("--checkpoint", help="checkpoint file (score)")
        p.add_argument("--scores", help="scores file (eval)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return parser


def resolve(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig.defaults()
    for item in args.set:
        if "=" not in item:
            raise ConfigError(item, "--set expects KEY=VALUE")
        key, value = item.split("=", 1)
        cfg.set(key.strip(), value, " (from --set)")
    for key in ("seed", "ablation", "graph", "checkpoint", "scores"):
        value = getattr(args, key)
        if value is not None:
            cfg[key] = value
    cfg.train_config()  # validate every typed section up front
    cfg.synth_spec()
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s", stream=sys.stderr)
    try:
        cfg = resolve(args)
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / RESOLVED_FILE).write_text(cfg.dump(), encoding="utf-8")
        return COMMANDS[args.command][0](cfg, args.out)
    except (DcorError, OSError) as exc:
        parser.print_usage(sys.stderr)
        print(f"dcor {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
