"""
Reverse-mode gradients on a tape
================================

Every operation in ``dcor.numcore`` appends a node to a tape. ``backward``
walks the tape in reverse and hands each node's output gradient to its
vector-Jacobian product. This script differentiates a small attention
layer and compares the result with central finite differences.
"""

import numpy as np

from dcor import numcore as nc

rng = np.random.default_rng(0)

# a 4-node graph stored as CSR with self-loops: row i lists N(i) including i
indptr = np.array([0, 2, 5, 7, 8])
dst = np.array([0, 1, 0, 1, 2, 1, 2, 3])
src = np.repeat(np.arange(4), np.diff(indptr))

X = rng.standard_normal((4, 3))
W0 = rng.standard_normal((3, 2))
a0 = rng.standard_normal((4, 1))


def layer(tape, W, a):
    z = nc.leaky_relu(nc.matmul(tape.const(X), W))
    s_src = nc.matmul(z, nc.gather_rows(a, np.arange(2)))
    s_dst = nc.matmul(z, nc.gather_rows(a, np.arange(2, 4)))
    e = nc.leaky_relu(nc.add(nc.gather_rows(s_src, src), nc.gather_rows(s_dst, dst)))
    gamma = nc.segment_softmax(e, indptr)
    out = nc.segment_sum(nc.scale_rows(nc.gather_rows(z, dst), gamma), indptr)
    return nc.sum_all(nc.mul(out, out))


tape = nc.Tape()
loss = layer(tape, tape.param(W0, name="W"), tape.param(a0, name="a"))
grads = nc.backward(tape, loss)
print("loss", loss.value[0, 0])
print("tape length", len(tape.nodes))

# finite differences, one entry at a time
def numeric(which):
    base = {"W": W0, "a": a0}
    out = np.zeros_like(base[which])
    for idx in np.ndindex(out.shape):
        vals = []
        for step in (1e-6, -1e-6):
            p = {k: v.copy() for k, v in base.items()}
            p[which][idx] += step
            t = nc.Tape()
            vals.append(layer(t, t.const(p["W"]), t.const(p["a"])).value[0, 0])
        out[idx] = (vals[0] - vals[1]) / 2e-6
    return out


for name in ("W", "a"):
    num = numeric(name)
    err = np.linalg.norm(grads[name] - num) / (np.linalg.norm(grads[name]) + np.linalg.norm(num))
    print(f"{name}: relative error {err:.2e}")

# Adam on the same loss: a few steps should lower it
params = {"W": W0.copy(), "a": a0.copy()}
state = nc.AdamState()
for step in range(50):
    t = nc.Tape()
    l = layer(t, t.param(params["W"], name="W"), t.param(params["a"], name="a"))
    params, state = nc.adam_step(params, nc.backward(t, l), state, lr=0.05)
    if step % 10 == 0:
        print(f"step {step:2d} loss {l.value[0, 0]:.5f}")
