import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcor.augment import AugmentConfig, make_view
from dcor.errors import ContractError, SpecError, TrainingDivergedError, UndefinedAUCError
from dcor.graphdata import SynthSpec, generate_synthetic
from dcor.model import save_checkpoint
from dcor.trainer import (
    EpochMetrics,
    TrainConfig,
    evaluate_auc,
    rank_nodes,
    read_metrics,
    train,
    write_metrics,
)


def brute_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p, q in itertools.product(pos, neg))
    return total / (len(pos) * len(neg))


@pytest.fixture(scope="module")
def small_graph():
    g = generate_synthetic(SynthSpec(n=60, d=6, communities=3, p_in=0.2, p_out=0.02, seed=4))
    return make_view(g, AugmentConfig(base_count=8, clique_size=4, candidate_size=20, seed=99)).graph


def small_cfg(**kw):
    base = dict(epochs=15, hidden=8, augment=AugmentConfig(base_count=6, clique_size=3, candidate_size=20))
    base.update(kw)
    return TrainConfig(**base)


def test_auc_examples():
    assert evaluate_auc([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == 1.0
    assert evaluate_auc([0.3] * 5, [1, 0, 1, 0, 0]) == 0.5
    assert evaluate_auc([0.1, 0.9], [1, 0]) == 0.0
    assert evaluate_auc([0.5, 0.5, 0.1], [1, 0, 0]) == 0.75


def test_auc_errors():
    with pytest.raises(UndefinedAUCError):
        evaluate_auc([0.1, 0.2], [0, 0])
    with pytest.raises(UndefinedAUCError):
        evaluate_auc([0.1, 0.2], [1, 1])
    with pytest.raises(ContractError):
        evaluate_auc([0.1, 0.2, 0.3], [1, 0])


def test_auc_matches_brute_force_on_random_instances():
    rng = np.random.default_rng(2024)
    values = []
    for _ in range(1000):
        n = int(rng.integers(2, 51))
        labels = rng.integers(0, 2, n)
        labels[rng.integers(n)] = 1 - labels[0] if labels.min() == labels.max() else labels[0]
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        scores = rng.random(n)
        got = evaluate_auc(scores, labels)
        assert got == brute_auc(scores, labels)
        values.append(got)
    assert abs(np.mean(values) - 0.5) < 0.02


@settings(max_examples=200, deadline=None)
@given(data=st.lists(st.tuples(st.integers(0, 4), st.integers(0, 1)), min_size=2, max_size=30))
def test_auc_with_ties_matches_brute_force(data):
    scores, labels = (np.array(x) for x in zip(*data))
    if labels.min() == labels.max():
        return
    assert evaluate_auc(scores / 4.0, labels) == brute_auc(scores / 4.0, labels)


def test_auc_invariant_under_increasing_transform(rng):
    scores = rng.standard_normal(40)
    labels = (rng.random(40) < 0.3).astype(int)
    labels[:2] = [0, 1]
    base = evaluate_auc(scores, labels)
    for f in (np.exp, lambda s: 3 * s + 7, lambda s: s**3, np.arctan):
        assert evaluate_auc(f(scores), labels) == base


def test_rank_nodes():
    np.testing.assert_array_equal(rank_nodes([0.1, 0.9, 0.5]), [1, 2, 0])
    np.testing.assert_array_equal(rank_nodes([0.2, 0.7, 0.2, 0.7]), [1, 3, 0, 2])
    scores = np.random.default_rng(0).random(25)
    order = rank_nodes(scores)
    for k in (1, 5, 25):
        assert set(order[:k]) == set(np.argsort(-scores)[:k])


def test_config_validation():
    for kw in (dict(epochs=0), dict(lr=0.0), dict(ablation="none"), dict(hidden=0), dict(alpha=2.0), dict(margin=-1.0)):
        with pytest.raises(SpecError):
            TrainConfig(**kw).check()
    assert TrainConfig().objective().lambda_sc == 0.5
    assert TrainConfig(ablation="no_contrastive").objective().lambda_sc == 0.0
    assert TrainConfig(ablation="feature_aug_only").view_config().structure_rate == 0.0
    assert TrainConfig(ablation="adjacency_aug_only").view_config().feature_rate == 0.0


def test_defaults():
    cfg = TrainConfig()
    assert (cfg.epochs, cfg.lr, cfg.hidden, cfg.margin) == (200, 0.01, 128, 0.5)


def test_training_descends_and_keeps_identities(small_graph):
    params, hist = train(small_graph, small_cfg(epochs=40))
    assert len(hist) == 40
    assert hist[-1].L_total < hist[0].L_total
    for m in hist:
        assert m.L_sc == m.L_struct + m.L_feat
        assert m.L_total == 0.5 * m.L_rec + 0.5 * m.L_sc
        assert m.auc is not None and 0.0 <= m.auc <= 1.0


def test_no_contrastive_reports_zero_contrast(small_graph):
    _, hist = train(small_graph, small_cfg(ablation="no_contrastive"))
    assert all(m.L_sc == 0.0 and m.L_struct == 0.0 and m.L_feat == 0.0 for m in hist)
    assert all(m.L_total == 0.5 * m.L_rec for m in hist)


def test_no_contrastive_equals_pure_autoencoder(small_graph):
    # the contrastive branch does not touch params when lambda_sc = 0
    a, _ = train(small_graph, small_cfg(ablation="no_contrastive"))
    b, _ = train(small_graph, small_cfg(ablation="no_contrastive", augment=AugmentConfig(base_count=1, seed=5)))
    assert all(a[k].tobytes() == b[k].tobytes() for k in a)


@pytest.mark.parametrize("ablation", ["feature_aug_only", "adjacency_aug_only"])
def test_restricted_ablations_run(small_graph, ablation):
    _, hist = train(small_graph, small_cfg(ablation=ablation, epochs=5))
    assert len(hist) == 5


def test_training_is_deterministic(small_graph, tmp_path):
    outputs = []
    for k in range(2):
        params, hist = train(small_graph, small_cfg(resample_view_every=5))
        write_metrics(hist, tmp_path / f"m{k}.jsonl")
        save_checkpoint(params, tmp_path / f"c{k}.txt")
        outputs.append(((tmp_path / f"m{k}.jsonl").read_bytes(), (tmp_path / f"c{k}.txt").read_bytes()))
    assert outputs[0] == outputs[1]
    assert read_metrics(tmp_path / "m0.jsonl") == hist


def test_seed_changes_run(small_graph):
    _, a = train(small_graph, small_cfg(epochs=3, seed=0))
    _, b = train(small_graph, small_cfg(epochs=3, seed=1))
    assert a[0].L_total != b[0].L_total


def test_observer_sees_every_epoch(small_graph):
    seen = []
    train(small_graph, small_cfg(epochs=4), observer=seen.append)
    assert [m.epoch for m in seen] == [0, 1, 2, 3]


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_reports_epoch(small_graph):
    with pytest.raises(TrainingDivergedError) as err:
        train(small_graph, small_cfg(lr=1e300, epochs=5))
    assert err.value.epoch >= 0


def test_metrics_line_format():
    m = EpochMetrics(3, 0.1, 0.2, 0.3, 0.5, 0.30000000000000004, None)
    line = m.to_line()
    assert '"auc": null' in line and "0.30000000000000004" in line
    assert EpochMetrics.from_line(line) == m
