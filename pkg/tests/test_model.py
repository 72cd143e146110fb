import numpy as np
import pytest

from dcor import numcore as nc
from dcor.errors import DimensionError, ParseError
from dcor.graphdata import AttributedGraph
from dcor.model import (
    GraphTensors,
    attribute_decode,
    attribute_encode,
    forward,
    init_params,
    load_checkpoint,
    param_shapes,
    reconstruct,
    save_checkpoint,
    structure_decode,
    structure_encode,
)

from conftest import central_diff, random_graph, rel_err


def vars_of(tape, params):
    return {k: tape.param(v, name=k) for k, v in params.items()}


def test_shapes_with_h128(rng):
    g = random_graph(rng, 20, 6)
    params = init_params(20, 6, 128, seed=0)
    rec = reconstruct(g, params)
    assert rec["Z_V"].shape == (20, 128)
    assert rec["Z_A"].shape == (6, 128)
    assert rec["A_hat"].shape == (20, 20)
    assert rec["X_hat"].shape == (20, 6)


@pytest.mark.parametrize("n,d,h", [(1, 1, 1), (1, 3, 2), (4, 1, 5), (7, 3, 1)])
def test_shape_contract_small(n, d, h, rng):
    g = random_graph(rng, n, d)
    rec = reconstruct(g, init_params(n, d, h, seed=1))
    assert rec["A_hat"].shape == (n, n) and rec["X_hat"].shape == (n, d)
    assert rec["Z_V"].shape == (n, h) and rec["Z_A"].shape == (d, h)


def test_single_node_embedding_is_dense_layer(rng):
    g = AttributedGraph.from_edges(1, [], rng.random((1, 3)))
    params = init_params(1, 3, 4, seed=2)
    params["b_V1"] = rng.standard_normal((1, 4))
    tape = nc.Tape()
    z = structure_encode(g, {k: tape.const(v) for k, v in params.items()}).value
    expected = g.features @ params["W_V1"] + params["b_V1"]
    expected = np.where(expected > 0, expected, nc.LEAKY_SLOPE * expected)
    np.testing.assert_allclose(z, expected, rtol=0, atol=1e-15)


def test_isolated_node_keeps_own_embedding(path_graph):
    params = init_params(5, 2, 3, seed=0)
    tape = nc.Tape()
    z = structure_encode(path_graph, {k: tape.const(v) for k, v in params.items()}).value
    own = path_graph.features[4] @ params["W_V1"] + params["b_V1"][0]
    own = np.where(own > 0, own, nc.LEAKY_SLOPE * own)
    np.testing.assert_allclose(z[4], own, atol=1e-15)


def test_attention_matches_dense_reference(rng):
    g = random_graph(rng, 9, 4, p=0.4)
    h = 3
    params = init_params(9, 4, h, seed=5)
    params["a"] = rng.standard_normal((2 * h, 1))
    tape = nc.Tape()
    z = structure_encode(g, {k: tape.const(v) for k, v in params.items()}).value
    # dense oracle with an explicit neighbourhood mask
    zt = g.features @ params["W_V1"] + params["b_V1"]
    zt = np.where(zt > 0, zt, 0.2 * zt)
    P = zt @ params["W_V2"]
    mask = g.adjacency() + np.eye(9) > 0
    E = np.full((9, 9), -np.inf)
    for i in range(9):
        for j in range(9):
            if mask[i, j]:
                s = float(np.concatenate([P[i], P[j]]) @ params["a"][:, 0])
                E[i, j] = s if s > 0 else 0.2 * s
    G = np.exp(E - E.max(axis=1, keepdims=True))
    G /= G.sum(axis=1, keepdims=True)
    np.testing.assert_allclose(z, G @ zt, rtol=1e-12, atol=1e-14)


def test_identical_nodes_get_identical_embeddings():
    # nodes 1 and 2 both connect to 0 and 3, with equal features
    X = np.array([[1.0, 0.0], [0.5, 0.5], [0.5, 0.5], [0.0, 1.0]])
    g = AttributedGraph.from_edges(4, [(0, 1), (0, 2), (1, 3), (2, 3)], X)
    rec = reconstruct(g, init_params(4, 2, 6, seed=3))
    np.testing.assert_array_equal(rec["Z_V"][1], rec["Z_V"][2])


def test_zero_embedding_decodes_to_half():
    tape = nc.Tape()
    z = tape.const(np.zeros((4, 3)))
    np.testing.assert_array_equal(structure_decode(z).value, np.full((4, 4), 0.5))
    np.testing.assert_array_equal(attribute_decode(z, tape.const(np.ones((5, 3)))).value, np.zeros((4, 5)))


def test_decoder_symmetry_and_range(rng):
    tape = nc.Tape()
    A = structure_decode(tape.const(rng.standard_normal((30, 7)) * 3)).value
    assert np.max(np.abs(A - A.T)) <= 1e-12
    # large logits round to exactly 0 or 1 in float64
    assert np.all((A >= 0) & (A <= 1))
    A = structure_decode(tape.const(rng.standard_normal((30, 7)) * 0.5)).value
    assert np.all((A > 0) & (A < 1))


def test_attribute_decode_identity_factor(rng):
    tape = nc.Tape()
    z = rng.standard_normal((5, 4))
    out = attribute_decode(tape.const(z), tape.const(np.eye(4))).value
    np.testing.assert_array_equal(out, z)


def test_attribute_decode_shape_error():
    tape = nc.Tape()
    with pytest.raises(DimensionError):
        attribute_decode(tape.const(np.zeros((3, 2))), tape.const(np.zeros((4, 5))))


def test_zero_features_attribute_encoder(rng):
    g = AttributedGraph.from_edges(5, [(0, 1)], np.zeros((5, 3)))
    params = init_params(5, 3, 4, seed=0)
    tape = nc.Tape()
    z = attribute_encode(g, {k: tape.const(v) for k, v in params.items()}).value
    # sigma(0) = 0 and zero biases, so Z_A is the affine image of zero: b_A2
    np.testing.assert_array_equal(z, np.zeros((3, 4)))


def test_transductive_shape_error(rng):
    g = random_graph(rng, 6, 2)
    params = init_params(7, 2, 3, seed=0)
    tape = nc.Tape()
    with pytest.raises(DimensionError, match="W_A1"):
        attribute_encode(g, {k: tape.const(v) for k, v in params.items()})
    with pytest.raises(DimensionError):
        reconstruct(g, params)


def test_forward_deterministic(rng):
    g = random_graph(rng, 10, 3)
    params = init_params(10, 3, 4, seed=9)
    a, b = reconstruct(g, params), reconstruct(g, params)
    for k in a:
        assert a[k].tobytes() == b[k].tobytes()


def test_init_deterministic_and_shaped():
    a, b = init_params(8, 3, 5, seed=4), init_params(8, 3, 5, seed=4)
    assert all(a[k].tobytes() == b[k].tobytes() for k in a)
    assert {k: v.shape for k, v in a.items()} == param_shapes(8, 3, 5)
    assert not np.array_equal(a["W_V1"], init_params(8, 3, 5, seed=5)["W_V1"])


def test_permutation_equivariance(rng):
    n, d, h = 11, 4, 5
    g = random_graph(rng, n, d, p=0.35)
    params = init_params(n, d, h, seed=6)
    perm = rng.permutation(n)
    inv = np.argsort(perm)
    # node perm[k] becomes node k
    edges = [(inv[u], inv[v]) for u, v in g.edges()]
    g_p = AttributedGraph.from_edges(n, edges, g.features[perm])
    params_p = dict(params, W_A1=params["W_A1"][perm])
    r, rp = reconstruct(g, params), reconstruct(g_p, params_p)
    np.testing.assert_allclose(rp["Z_V"], r["Z_V"][perm], atol=1e-12)
    np.testing.assert_allclose(rp["A_hat"], r["A_hat"][np.ix_(perm, perm)], atol=1e-12)
    np.testing.assert_allclose(rp["X_hat"], r["X_hat"][perm], atol=1e-12)
    np.testing.assert_allclose(rp["Z_A"], r["Z_A"], atol=1e-12)


def test_forward_gradients_match_finite_differences(rng):
    n, d, h = 7, 3, 4
    g = random_graph(rng, n, d, p=0.4)
    t = GraphTensors.of(g)
    params = init_params(n, d, h, seed=8)
    params["a"] = rng.standard_normal((2 * h, 1))
    params = {k: v + 0.1 * rng.standard_normal(v.shape) for k, v in params.items()}
    WA = rng.standard_normal((n, n))
    WX = rng.standard_normal((n, d))

    def scalar(tape, p):
        rec = forward(t, p)
        return nc.add(nc.sum_all(nc.mul(rec.A_hat, tape.const(WA))), nc.sum_all(nc.mul(rec.X_hat, tape.const(WX))))

    tape = nc.Tape()
    grads = nc.backward(tape, scalar(tape, vars_of(tape, params)))

    def f():
        tp = nc.Tape()
        return float(scalar(tp, {k: tp.const(v) for k, v in params.items()}).value[0, 0])

    for name, value in params.items():
        num = central_diff(f, value)
        assert rel_err(grads[name], num) < 1e-6, name


def test_checkpoint_round_trip_exact(tmp_path):
    params = init_params(6, 3, 4, seed=1)
    params["b_A2"] = np.array([[np.pi, -1e-300, 1e300, 0.1]])
    path = tmp_path / "ck.txt"
    save_checkpoint(params, path)
    back = load_checkpoint(path)
    assert set(back) == set(params)
    for k in params:
        assert back[k].shape == params[k].shape
        assert back[k].tobytes() == params[k].tobytes()
    save_checkpoint(back, tmp_path / "ck2.txt")
    assert (tmp_path / "ck2.txt").read_bytes() == path.read_bytes()


def test_checkpoint_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("hello\n")
    with pytest.raises(ParseError):
        load_checkpoint(bad)
    bad.write_text("dcor-checkpoint 1\nparam a 2 1\n0.5\n")
    with pytest.raises(ParseError, match="truncated"):
        load_checkpoint(bad)
