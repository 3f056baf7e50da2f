"""A small reverse-mode autodiff engine over numpy arrays.

Only the operations needed by the decoder encoder and the contrastive loss are
provided. Operations are recorded on the active :class:`Tape` (if any input
requires a gradient); ``Tape.backward`` replays them in exact reverse order and
accumulates gradients additively into leaf tensors.

Outside a ``with Tape():`` block nothing is recorded, which is how inference
runs without bookkeeping.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ShapeError, ZeroVector

_TAPES: list["Tape"] = []

NORM_EPS = 1e-12


def mask_value(dtype) -> float:
    """Large negative logit used in place of -inf for masked attention keys."""
    return -1e18 if np.dtype(dtype) == np.float64 else -1e9


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_produced")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = np.ascontiguousarray(arr)
        self.grad = None
        self.requires_grad = requires_grad
        self._produced = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self):
        return self.data

    def item(self):
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def backward(self):
        if not _TAPES:
            raise RuntimeError("backward() needs an active Tape; call tape.backward(loss) instead")
        _TAPES[-1].backward(self)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"


class _Node:
    __slots__ = ("out", "inputs", "backward")

    def __init__(self, out, inputs, backward):
        self.out = out
        self.inputs = inputs
        self.backward = backward


class Tape:
    """Ordered record of differentiable operations.

    Usage::

        with Tape() as tape:
            loss = f(params)
        tape.backward(loss)
    """

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self):
        _TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _TAPES.remove(self)
        return False

    def record(self, out, inputs, backward):
        self.nodes.append(_Node(out, inputs, backward))

    def backward(self, loss: Tensor, seed=None):
        if seed is None:
            if loss.data.size != 1:
                raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
            seed = np.ones_like(loss.data)
        grads = {id(loss): np.asarray(seed, dtype=loss.dtype)}
        leaves = {}
        for node in reversed(self.nodes):
            g = grads.pop(id(node.out), None)
            if g is None:
                continue
            for inp, gi in zip(node.inputs, node.backward(g)):
                if gi is None or not inp.requires_grad:
                    continue
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + gi
                else:
                    grads[key] = gi
                if not inp._produced:
                    leaves[key] = inp
        if not loss._produced and loss.requires_grad:
            leaves[id(loss)] = loss
        for key, leaf in leaves.items():
            g = grads[key]
            leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g


def backward(loss: Tensor):
    """Populate ``.grad`` on every leaf that ``loss`` depends on."""
    loss.backward()


def _result(data, inputs, backward_fn):
    out = Tensor(data)
    tape = _TAPES[-1] if _TAPES else None
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out._produced = True
        tape.record(out, inputs, backward_fn)
    return out


def _swap(a):
    return np.swapaxes(a, -1, -2)


# ---------------------------------------------------------------- linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """``a[..., m, k] @ b[k, n]`` or batched ``a[..., m, k] @ b[..., k, n]``."""
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul shape mismatch {a.shape} @ {b.shape}")
    if b.ndim > 2 and a.shape[:-2] != b.shape[:-2]:
        raise ShapeError(f"batched matmul needs equal batch dims, got {a.shape} and {b.shape}")
    A, B = a.data, b.data

    def bw(g):
        ga = g @ _swap(B)
        if B.ndim == 2:
            gb = A.reshape(-1, A.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        else:
            gb = _swap(A) @ g
        return ga, gb

    return _result(A @ B, (a, b), bw)


def transpose(x: Tensor) -> Tensor:
    """Swap the two trailing axes."""
    return _result(np.ascontiguousarray(_swap(x.data)), (x,), lambda g: (_swap(g),))


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add needs equal shapes, got {a.shape} and {b.shape}")
    return _result(a.data + b.data, (a, b), lambda g: (g, g))


def add_bias(x: Tensor, bias: Tensor) -> Tensor:
    """Add a vector over the last axis of every row; the only broadcast the engine supports."""
    if bias.ndim != 1 or x.shape[-1] != bias.shape[0]:
        raise ShapeError(f"bias of shape {bias.shape} does not fit {x.shape}")

    def bw(g):
        return g, g.reshape(-1, g.shape[-1]).sum(axis=0)

    return _result(x.data + bias.data, (x, bias), bw)


def scale(x: Tensor, c: float) -> Tensor:
    return _result(x.data * c, (x,), lambda g: (g * c,))


def sum_all(x: Tensor) -> Tensor:
    shape = x.shape
    return _result(np.asarray(x.data.sum()), (x,), lambda g: (np.full(shape, g, dtype=x.dtype),))


def mean(x: Tensor) -> Tensor:
    n = x.data.size
    shape = x.shape
    return _result(np.asarray(x.data.mean()), (x,), lambda g: (np.full(shape, g / n, dtype=x.dtype),))


def reshape(x: Tensor, shape) -> Tensor:
    old = x.shape
    return _result(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),))


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate two matrices with equal row counts along the last axis."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] != b.shape[0]:
        raise ShapeError(f"concat_cols needs [n, *] operands, got {a.shape} and {b.shape}")
    k = a.shape[1]
    return _result(np.concatenate([a.data, b.data], axis=1), (a, b), lambda g: (g[:, :k], g[:, k:]))


def rowdot(a: Tensor, b: Tensor) -> Tensor:
    """Row-wise inner products of two [n, d] matrices, returned as [n, 1]."""
    if a.shape != b.shape or a.ndim != 2:
        raise ShapeError(f"rowdot needs equal [n, d] shapes, got {a.shape} and {b.shape}")
    A, B = a.data, b.data

    def bw(g):
        return g * B, g * A

    return _result(np.einsum("nd,nd->n", A, B)[:, None], (a, b), bw)


# ---------------------------------------------------------------- nonlinearities


def softmax_rows(x: Tensor) -> Tensor:
    """Softmax over the last axis, stabilised by subtracting the row max."""
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)

    def bw(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return _result(y, (x,), bw)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    X = x.data
    mu = X.mean(axis=-1, keepdims=True)
    xc = X - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + bias.data
    d = X.shape[-1]

    def bw(g):
        gg = g.reshape(-1, d)
        g_gain = (gg * xhat.reshape(-1, d)).sum(axis=0)
        g_bias = gg.sum(axis=0)
        gx_hat = g * gain.data
        gx = inv * (
            gx_hat
            - gx_hat.mean(axis=-1, keepdims=True)
            - xhat * (gx_hat * xhat).mean(axis=-1, keepdims=True)
        )
        return gx, g_gain, g_bias

    return _result(out, (x, gain, bias), bw)


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(x: Tensor) -> Tensor:
    """GELU, tanh approximation."""
    X = x.data
    X2 = X * X
    t = np.tanh(_GELU_C * X * (1.0 + 0.044715 * X2))
    y = 0.5 * X * (1.0 + t)

    def bw(g):
        du = _GELU_C * (1.0 + 3 * 0.044715 * X2)
        return (g * (0.5 * (1.0 + t) + 0.5 * X * (1.0 - t * t) * du),)

    return _result(y, (x,), bw)


# ---------------------------------------------------------------- indexing / shaping


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Gather rows of ``table[V, d]`` for an integer array ``ids`` of any shape."""
    ids = np.asarray(ids, dtype=np.int64)
    V = table.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= V):
        raise ShapeError(f"token id out of range [0, {V})")

    def bw(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids.reshape(-1), g.reshape(-1, table.shape[1]))
        return (gt,)

    return _result(table.data[ids], (table,), bw)


def split_heads(x: Tensor, n_heads: int) -> Tensor:
    """[B, T, d] -> [B, H, T, d/H]"""
    B, T, d = x.shape
    if d % n_heads:
        raise ShapeError(f"d_model {d} not divisible by {n_heads} heads")
    y = np.ascontiguousarray(x.data.reshape(B, T, n_heads, d // n_heads).transpose(0, 2, 1, 3))
    return _result(y, (x,), lambda g: (g.transpose(0, 2, 1, 3).reshape(B, T, d),))


def merge_heads(x: Tensor) -> Tensor:
    """[B, H, T, dh] -> [B, T, H*dh]"""
    B, H, T, dh = x.shape
    y = np.ascontiguousarray(x.data.transpose(0, 2, 1, 3).reshape(B, T, H * dh))
    return _result(y, (x,), lambda g: (g.reshape(B, T, H, dh).transpose(0, 2, 1, 3),))


def weighted_pool(x: Tensor, weights) -> Tensor:
    """Per-row weighted sum over time: ``x[B, T, d]``, constant ``weights[B, T]`` -> [B, d].

    Last-token pooling is a one-hot weight row, mean pooling a uniform one.
    """
    W = np.asarray(weights, dtype=x.dtype)
    if W.shape != x.shape[:2]:
        raise ShapeError(f"pool weights {W.shape} do not match states {x.shape}")
    y = np.einsum("bt,btd->bd", W, x.data)
    return _result(y, (x,), lambda g: (W[:, :, None] * g[:, None, :],))


# ---------------------------------------------------------------- attention


def attention_mask(T: int, key_mask=None, batch: int = 1):
    """Boolean [B, T, T] visibility: causal, minus masked keys, self always visible."""
    causal = np.tril(np.ones((T, T), dtype=bool))
    if key_mask is None:
        return np.broadcast_to(causal, (batch, T, T))
    km = np.asarray(key_mask, dtype=bool)
    allowed = causal[None, :, :] & km[:, None, :]
    allowed |= np.eye(T, dtype=bool)[None]
    return allowed


def causal_attention(q: Tensor, k: Tensor, v: Tensor, key_mask=None, scale_: float | None = None) -> Tensor:
    """Scaled dot-product attention with a causal mask.

    ``q, k, v`` are [B, H, T, dh]. ``key_mask`` is an optional boolean [B, T]
    where False marks keys no query may attend to (except itself, so a row is
    never empty). Disallowed logits are set to a large negative constant.
    """
    if not (q.shape == k.shape == v.shape) or q.ndim != 4:
        raise ShapeError(f"attention needs equal [B, H, T, dh] operands, got {q.shape}, {k.shape}, {v.shape}")
    B, H, T, dh = q.shape
    if scale_ is None:
        scale_ = 1.0 / math.sqrt(dh)
    allowed = attention_mask(T, key_mask, B)[:, None, :, :]
    Q, K, V = q.data, k.data, v.data
    logits = (Q @ _swap(K)) * scale_
    logits = np.where(allowed, logits, mask_value(Q.dtype))
    logits = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(logits)
    P = e / e.sum(axis=-1, keepdims=True)
    out = P @ V

    def bw(g):
        gV = _swap(P) @ g
        gP = g @ _swap(V)
        gS = P * (gP - (gP * P).sum(axis=-1, keepdims=True)) * scale_
        return gS @ K, _swap(gS) @ Q, gV

    return _result(out, (q, k, v), bw)


# ---------------------------------------------------------------- similarity / loss


def l2_normalize(x: Tensor) -> Tensor:
    """Scale every row of ``x[n, d]`` to unit L2 norm."""
    X = x.data
    norm = np.sqrt((X * X).sum(axis=-1, keepdims=True))
    if np.any(norm < NORM_EPS):
        raise ZeroVector("cannot normalise a zero-norm vector")
    y = X / norm

    def bw(g):
        return ((g - y * (g * y).sum(axis=-1, keepdims=True)) / norm,)

    return _result(y, (x,), bw)


def cosine(u: Tensor, v: Tensor) -> Tensor:
    """Cosine similarity of two vectors, as a scalar tensor."""
    U, W = u.data.ravel(), v.data.ravel()
    if U.shape != W.shape:
        raise ShapeError(f"cosine needs equal lengths, got {u.shape} and {v.shape}")
    nu, nv = np.linalg.norm(U), np.linalg.norm(W)
    if nu < NORM_EPS or nv < NORM_EPS:
        raise ZeroVector("cosine of a zero-norm vector is undefined")
    c = float(U @ W) / (nu * nv)
    c = min(1.0, max(-1.0, c))

    def bw(g):
        gu = g * (W / (nu * nv) - c * U / (nu * nu))
        gv = g * (U / (nu * nv) - c * W / (nv * nv))
        return gu.reshape(u.shape), gv.reshape(v.shape)

    return _result(np.asarray(c, dtype=u.dtype), (u, v), bw)


def cross_entropy_rows(logits: Tensor, targets, valid=None, extra: Tensor | None = None, extra_valid=None) -> Tensor:
    """Per-row ``-log softmax(logits)[target]`` with log-sum-exp stabilisation.

    ``valid`` is an optional boolean mask of the same shape; invalid entries are
    excluded from the normaliser. ``extra`` ([n, 1]) adds one more normaliser
    term per row (rows where ``extra_valid`` is False skip it). It is folded in
    with ``logaddexp`` after the main log-sum-exp, so adding it can never lower
    a row's value, not even by rounding. Returns a [n] tensor.
    """
    L = logits.data
    n = L.shape[0]
    tgt = np.asarray(targets, dtype=np.int64)
    if valid is None:
        Lm = L
    else:
        Lm = np.where(valid, L, -np.inf)
    mx = Lm.max(axis=1, keepdims=True)
    e = np.exp(Lm - mx)
    s = e.sum(axis=1, keepdims=True)
    lse = (mx + np.log(s))[:, 0]
    rows = np.arange(n)
    if extra is None:
        p = e / s
        out = lse - L[rows, tgt]

        def bw(g):
            gl = p * g[:, None]
            gl[rows, tgt] -= g
            return (gl,)

        return _result(out, (logits,), bw)

    x = extra.data.reshape(n)
    ev = np.ones(n, dtype=bool) if extra_valid is None else np.asarray(extra_valid, dtype=bool)
    lse = np.where(ev, np.logaddexp(lse, x), lse)
    out = lse - L[rows, tgt]
    p = np.exp(Lm - lse[:, None])
    px = np.where(ev, np.exp(x - lse), 0.0)

    def bw_extra(g):
        gl = p * g[:, None]
        gl[rows, tgt] -= g
        return gl, (px * g).reshape(extra.data.shape)

    return _result(out, (logits, extra), bw_extra)


# ---------------------------------------------------------------- gradient checking


def relative_error(analytic, numeric, guard: float = 1e-8):
    """Elementwise ``|a - n| / max(|a|, |n|, guard)``."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), guard)


def finite_diff_gradients(f, params, eps: float = 1e-5, indices=None) -> list:
    """Tape gradients and central differences for ``params``.

    ``f`` is a zero-argument callable returning a scalar Tensor built from
    ``params`` (all f64, ``requires_grad=True``). Returns one ``(analytic,
    numeric)`` pair of flat arrays per parameter. ``indices`` optionally
    restricts each parameter to a subset of flat positions (a list parallel to
    ``params``).
    """
    for p in params:
        if p.dtype != np.float64:
            raise TypeError("finite differences require float64 parameters")
        p.grad = None
    with Tape() as tape:
        loss = f()
    tape.backward(loss)
    out = []
    for i, p in enumerate(params):
        analytic = np.zeros(p.data.size) if p.grad is None else p.grad.reshape(-1)
        flat = p.data.reshape(-1)
        positions = np.arange(flat.size) if indices is None else np.asarray(indices[i], dtype=np.int64)
        numeric = np.empty(len(positions))
        for j, pos in enumerate(positions):
            orig = flat[pos]
            flat[pos] = orig + eps
            up = f().item()
            flat[pos] = orig - eps
            down = f().item()
            flat[pos] = orig
            numeric[j] = (up - down) / (2 * eps)
        out.append((analytic[positions].copy(), numeric))
    return out


def finite_diff_check(f, params, eps: float = 1e-5, guard: float = 1e-8, indices=None) -> float:
    """Maximum elementwise relative error between tape gradients and central differences."""
    worst = 0.0
    for analytic, numeric in finite_diff_gradients(f, params, eps, indices):
        if analytic.size:
            worst = max(worst, float(relative_error(analytic, numeric, guard).max()))
    return worst


def normwise_error(analytic, numeric, guard: float = 1e-8) -> float:
    """``||a - n|| / max(||a||, ||n||, guard)`` over a whole gradient tensor."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return float(np.linalg.norm(a - n) / max(np.linalg.norm(a), np.linalg.norm(n), guard))
