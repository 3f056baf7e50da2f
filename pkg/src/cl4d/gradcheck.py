"""Finite-difference verification of every differentiable op and of the full model + loss."""

from __future__ import annotations

import time

import numpy as np

from . import autograd as ag
from .contrastive import info_nce_loss
from .model import ModelConfig, encode_batch, init_parameters, parameter_layout


def _leaf(rng, *shape):
    return ag.Tensor(rng.standard_normal(shape), requires_grad=True)


def _unit(rng, n, d):
    x = rng.standard_normal((n, d))
    return ag.Tensor(x / np.linalg.norm(x, axis=1, keepdims=True), requires_grad=True)


def _probe(rng, shape):
    """Fixed random projection turning an op output into a scalar."""
    return rng.standard_normal(shape)


def _times(y: ag.Tensor, w) -> ag.Tensor:
    """<y, w> as a [1, 1] tensor."""
    flat = ag.reshape(y, (1, -1))
    return ag.matmul(flat, ag.Tensor(np.asarray(w, dtype=np.float64).reshape(-1, 1)))


def op_cases(seed: int = 0):
    """(name, fn, params) triples; ``fn()`` returns a scalar built from ``params``."""
    rng = np.random.default_rng(seed)
    cases = []

    def add_case(name, build, params):
        out_shape = build().data.shape
        w = _probe(rng, out_shape)
        cases.append((name, lambda: ag.sum_all(_times(build(), w)), params))

    a, b = _leaf(rng, 3, 4), _leaf(rng, 4, 5)
    add_case("matmul", lambda: ag.matmul(a, b), [a, b])
    a3, b3 = _leaf(rng, 2, 3, 4), _leaf(rng, 2, 4, 2)
    add_case("matmul_batched", lambda: ag.matmul(a3, b3), [a3, b3])
    x = _leaf(rng, 3, 4)
    add_case("transpose", lambda: ag.transpose(x), [x])
    p, q = _leaf(rng, 3, 4), _leaf(rng, 3, 4)
    add_case("add", lambda: ag.add(p, q), [p, q])
    xb, bias = _leaf(rng, 2, 3, 4), _leaf(rng, 4)
    add_case("add_bias", lambda: ag.add_bias(xb, bias), [xb, bias])
    xs = _leaf(rng, 3, 4)
    add_case("scale", lambda: ag.scale(xs, -2.5), [xs])
    xm = _leaf(rng, 3, 4)
    cases.append(("mean", lambda: ag.mean(xm), [xm]))
    xr = _leaf(rng, 2, 6)
    add_case("reshape", lambda: ag.reshape(xr, (3, 4)), [xr])
    c1, c2 = _leaf(rng, 3, 1), _leaf(rng, 3, 4)
    add_case("concat_cols", lambda: ag.concat_cols(c1, c2), [c1, c2])
    r1, r2 = _leaf(rng, 4, 5), _leaf(rng, 4, 5)
    add_case("rowdot", lambda: ag.rowdot(r1, r2), [r1, r2])
    xsm = _leaf(rng, 3, 5)
    add_case("softmax_rows", lambda: ag.softmax_rows(xsm), [xsm])
    xl, g, bl = _leaf(rng, 2, 3, 6), _leaf(rng, 6), _leaf(rng, 6)
    add_case("layer_norm", lambda: ag.layer_norm(xl, g, bl), [xl, g, bl])
    xg = _leaf(rng, 3, 5)
    add_case("gelu", lambda: ag.gelu(xg), [xg])
    table = _leaf(rng, 7, 4)
    ids = rng.integers(0, 7, size=(2, 5))
    add_case("embedding_lookup", lambda: ag.embedding_lookup(table, ids), [table])
    xh = _leaf(rng, 2, 3, 8)
    add_case("split_merge_heads", lambda: ag.merge_heads(ag.split_heads(xh, 2)), [xh])
    xp = _leaf(rng, 2, 5, 4)
    pw = np.abs(rng.standard_normal((2, 5)))
    add_case("weighted_pool", lambda: ag.weighted_pool(xp, pw), [xp])
    qa, ka, va = _leaf(rng, 2, 2, 5, 3), _leaf(rng, 2, 2, 5, 3), _leaf(rng, 2, 2, 5, 3)
    add_case("causal_attention", lambda: ag.causal_attention(qa, ka, va), [qa, ka, va])
    km = np.array([[True, True, True, False, False], [False, True, True, True, True]])
    qm, kmm, vm = _leaf(rng, 2, 2, 5, 3), _leaf(rng, 2, 2, 5, 3), _leaf(rng, 2, 2, 5, 3)
    add_case("causal_attention_masked", lambda: ag.causal_attention(qm, kmm, vm, key_mask=km), [qm, kmm, vm])
    xn = _leaf(rng, 3, 4)
    add_case("l2_normalize", lambda: ag.l2_normalize(xn), [xn])
    u, v = _leaf(rng, 3, 4), _leaf(rng, 3, 4)
    add_case("cosine", lambda: ag.cosine(u, v), [u, v])
    logits = _leaf(rng, 4, 6)
    targets = rng.integers(0, 6, size=4)
    add_case("cross_entropy_rows", lambda: ag.cross_entropy_rows(logits, targets), [logits])
    logits2, extra = _leaf(rng, 4, 6), _leaf(rng, 4, 1)
    ev = np.array([True, False, True, True])
    add_case("cross_entropy_rows_extra", lambda: ag.cross_entropy_rows(logits2, targets, extra=extra, extra_valid=ev),
             [logits2, extra])
    Q, C, H = _unit(rng, 4, 6), _unit(rng, 4, 6), _unit(rng, 4, 6)
    cases.append(("info_nce", lambda: info_nce_loss(Q, C, H, temperature=0.5).total, [Q, C, H]))
    return cases


def check_ops(seed: int = 0, eps: float = 1e-5) -> dict:
    return {name: ag.finite_diff_check(fn, params, eps=eps) for name, fn, params in op_cases(seed)}


def model_case(n_layers=2, d_model=16, n_heads=2, T=8, n=4, vocab_size=40, temperature=0.05, seed=0,
               pooling="mean", pad_side="right", pad_policy="masked"):
    """Full encoder + InfoNCE (with hard negatives) at f64 on random token batches."""
    cfg = ModelConfig(vocab_size=vocab_size, n_layers=n_layers, n_heads=n_heads, d_model=d_model, d_ff=4 * d_model,
                      max_len=T, pooling=pooling, pad_side=pad_side, pad_policy=pad_policy, seed=seed)
    params = init_parameters(cfg).astype(np.float64, requires_grad=True)
    rng = np.random.default_rng(seed + 1)

    def batch():
        n_real = rng.integers(3, T + 1, size=n)
        ids = np.zeros((n, T), dtype=np.int64)
        for i, m in enumerate(n_real):
            body = rng.integers(3, vocab_size, size=m)
            body[0], body[-1] = 1, 2
            if pad_side == "right":
                ids[i, :m] = body
            else:
                ids[i, T - m:] = body
        return ids, n_real, pad_side

    bq, bc, bh = batch(), batch(), batch()

    def f():
        Q = encode_batch(params, bq, cfg)
        C = encode_batch(params, bc, cfg)
        H = encode_batch(params, bh, cfg)
        return info_nce_loss(Q, C, H, temperature=temperature).total

    return cfg, f, [t for _, t in params.items()]


def check_model(eps: float = 1e-5, guard: float = 1e-8, **kwargs) -> dict:
    """Per-tensor errors of the full model + loss.

    ``normwise`` is the largest per-tensor ``||a - n|| / max(||a||, ||n||)``.
    ``elementwise`` is the largest single-entry relative error; entries whose
    true gradient is below roughly 1e-6 are dominated by f64 rounding in the
    loss at this eps, so this figure is informative rather than a pass/fail gate.
    """
    cfg, f, params = model_case(**kwargs)
    names = [n for n, _ in parameter_layout(cfg)]
    per_tensor = {}
    worst_elem = 0.0
    for name, (a, n) in zip(names, ag.finite_diff_gradients(f, params, eps)):
        per_tensor[name] = ag.normwise_error(a, n, guard)
        worst_elem = max(worst_elem, float(ag.relative_error(a, n, guard).max()))
    return {"normwise": max(per_tensor.values()), "elementwise": worst_elem, "per_tensor": per_tensor}


def run_suite(seed: int = 0) -> dict:
    t0 = time.perf_counter()
    ops = check_ops(seed)
    t1 = time.perf_counter()
    full = check_model(seed=seed)
    t2 = time.perf_counter()
    return {"ops": ops, "ops_max": max(ops.values()), "model_normwise": full["normwise"],
            "model_elementwise": full["elementwise"],
            "seconds": {"ops": round(t1 - t0, 3), "model": round(t2 - t1, 3)}}
