"""Decoder-only transformer used as a shared-weight dual encoder.

One :class:`Parameters` store encodes both queries and code. Hidden states of the
last layer are pooled (last token or mean) and L2-normalised.

Two pad policies are supported:

* ``masked``: pads are never attended to and positions count real tokens only,
  so the pooled vector does not depend on pad side or pad amount.
* ``naive``: pads are ordinary tokens at physical positions; this reproduces
  the padding/pooling asymmetries seen with off-the-shelf causal models.
"""

from __future__ import annotations

import json
import math
import os
import struct
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import autograd as ag
from .errors import CheckpointError, ShapeError, ZeroVector
from .tokenizer import Encoded, Vocab, encode, stack

POOLINGS = ("mean", "last")
PAD_SIDES = ("left", "right")
PAD_POLICIES = ("masked", "naive")

CKPT_MAGIC = b"CL4D"
CKPT_VERSION = 1
LN_EPS = 1e-5


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    n_layers: int = 2
    n_heads: int = 2
    d_model: int = 64
    d_ff: int = 256
    max_len: int = 64
    pooling: str = "mean"
    pad_side: str = "right"
    pad_policy: str = "masked"
    seed: int = 0

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model={self.d_model} is not divisible by n_heads={self.n_heads}")
        if self.max_len < 3:
            raise ValueError("max_len must be >= 3")
        if self.pooling not in POOLINGS:
            raise ValueError(f"pooling must be one of {POOLINGS}, got {self.pooling!r}")
        if self.pad_side not in PAD_SIDES:
            raise ValueError(f"pad_side must be one of {PAD_SIDES}, got {self.pad_side!r}")
        if self.pad_policy not in PAD_POLICIES:
            raise ValueError(f"pad_policy must be one of {PAD_POLICIES}, got {self.pad_policy!r}")


def _layer_shapes(cfg: ModelConfig):
    d, f = cfg.d_model, cfg.d_ff
    return [
        ("ln1_g", (d,)), ("ln1_b", (d,)),
        ("wq", (d, d)), ("wk", (d, d)), ("wv", (d, d)), ("wo", (d, d)),
        ("ln2_g", (d,)), ("ln2_b", (d,)),
        ("w1", (d, f)), ("b1", (f,)), ("w2", (f, d)), ("b2", (d,)),
    ]


def parameter_layout(cfg: ModelConfig) -> list[tuple[str, tuple]]:
    """Names and shapes in the fixed checkpoint order."""
    layout = [("tok_emb", (cfg.vocab_size, cfg.d_model)), ("pos_emb", (cfg.max_len, cfg.d_model))]
    for i in range(cfg.n_layers):
        layout += [(f"layers.{i}.{name}", shape) for name, shape in _layer_shapes(cfg)]
    layout += [("ln_f_g", (cfg.d_model,)), ("ln_f_b", (cfg.d_model,))]
    return layout


def parameter_count(cfg: ModelConfig) -> int:
    d, f, L = cfg.d_model, cfg.d_ff, cfg.n_layers
    per_layer = 4 * d * d + 2 * d * f + f + d + 4 * d
    return cfg.vocab_size * d + cfg.max_len * d + L * per_layer + 2 * d


class Parameters:
    """The single learnable-parameter store shared by the query and code encoders."""

    def __init__(self, tensors: "OrderedDict[str, ag.Tensor]"):
        self.tensors = tensors

    def __getitem__(self, name) -> ag.Tensor:
        return self.tensors[name]

    def __iter__(self):
        return iter(self.tensors.values())

    def items(self):
        return self.tensors.items()

    def names(self):
        return list(self.tensors)

    @property
    def dtype(self):
        return next(iter(self.tensors.values())).dtype

    def count(self) -> int:
        return sum(t.data.size for t in self)

    def astype(self, dtype, requires_grad=None) -> "Parameters":
        return Parameters(OrderedDict(
            (k, ag.Tensor(t.data.astype(dtype), requires_grad=t.requires_grad if requires_grad is None else requires_grad))
            for k, t in self.items()
        ))

    def copy(self) -> "Parameters":
        return self.astype(self.dtype)

    def zero_grad(self):
        for t in self:
            t.grad = None


def init_parameters(cfg: ModelConfig, dtype=np.float32) -> Parameters:
    """Weights ~ N(0, 0.02), biases 0, layer-norm gains 1, deterministic in ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    tensors = OrderedDict()
    for name, shape in parameter_layout(cfg):
        leaf = name.rsplit(".", 1)[-1]
        if leaf.endswith("_g"):
            arr = np.ones(shape)
        elif leaf.endswith("_b") or leaf in ("b1", "b2"):
            arr = np.zeros(shape)
        else:
            arr = rng.normal(0.0, 0.02, size=shape)
        tensors[name] = ag.Tensor(arr.astype(dtype), requires_grad=True)
    return Parameters(tensors)


# ---------------------------------------------------------------- forward


def positions_and_mask(ids, n_real, pad_side: str, pad_policy: str):
    """Position ids [B, T] and key mask [B, T] (None under the naive policy)."""
    B, T = ids.shape
    if pad_policy == "naive":
        return np.broadcast_to(np.arange(T), (B, T)), None
    phys = np.arange(T)[None, :]
    n = np.asarray(n_real)[:, None]
    if pad_side == "left":
        start = T - n
        real = phys >= start
        pos = np.where(real, phys - start, 0)
    else:
        real = phys < n
        pos = np.where(real, phys, 0)
    return pos, real


def _as_arrays(batch):
    if isinstance(batch, tuple):
        return batch
    return stack(list(batch))


def forward(params: Parameters, batch, cfg: ModelConfig) -> ag.Tensor:
    """Last-layer hidden states [B, T, d_model] for a padded batch.

    ``batch`` is a list of :class:`Encoded` or an ``(ids, n_real, pad_side)`` tuple.
    """
    ids, n_real, pad_side = _as_arrays(batch)
    B, T = ids.shape
    if T > cfg.max_len:
        raise ShapeError(f"sequence length {T} exceeds max_len {cfg.max_len}")
    if np.any(n_real < 1) or np.any(n_real > T):
        raise ShapeError("n_real must lie in [1, T]")
    pos, key_mask = positions_and_mask(ids, n_real, pad_side, cfg.pad_policy)
    x = ag.add(ag.embedding_lookup(params["tok_emb"], ids), ag.embedding_lookup(params["pos_emb"], pos))
    for i in range(cfg.n_layers):
        p = f"layers.{i}."
        h = ag.layer_norm(x, params[p + "ln1_g"], params[p + "ln1_b"], LN_EPS)
        q = ag.split_heads(ag.matmul(h, params[p + "wq"]), cfg.n_heads)
        k = ag.split_heads(ag.matmul(h, params[p + "wk"]), cfg.n_heads)
        v = ag.split_heads(ag.matmul(h, params[p + "wv"]), cfg.n_heads)
        a = ag.causal_attention(q, k, v, key_mask, 1.0 / math.sqrt(cfg.d_model // cfg.n_heads))
        x = ag.add(x, ag.matmul(ag.merge_heads(a), params[p + "wo"]))
        h = ag.layer_norm(x, params[p + "ln2_g"], params[p + "ln2_b"], LN_EPS)
        h = ag.gelu(ag.add_bias(ag.matmul(h, params[p + "w1"]), params[p + "b1"]))
        x = ag.add(x, ag.add_bias(ag.matmul(h, params[p + "w2"]), params[p + "b2"]))
    return ag.layer_norm(x, params["ln_f_g"], params["ln_f_b"], LN_EPS)


def pool_weights(n_real, T: int, pad_side: str, pooling: str, pad_policy: str) -> np.ndarray:
    n_real = np.asarray(n_real)
    B = n_real.shape[0]
    W = np.zeros((B, T))
    rows = np.arange(B)
    if pad_policy == "naive":
        if pooling == "last":
            W[:, T - 1] = 1.0
        else:
            W[:] = 1.0 / T
        return W
    phys = np.arange(T)[None, :]
    if pad_side == "left":
        real = phys >= (T - n_real)[:, None]
        last = np.full(B, T - 1)
    else:
        real = phys < n_real[:, None]
        last = n_real - 1
    if pooling == "last":
        W[rows, last] = 1.0
    else:
        # boolean-mask assignment walks row-major, the same order np.repeat fills
        W[real] = np.repeat(1.0 / n_real, n_real)
    return W


def pool(states: ag.Tensor, batch, pooling: str, pad_policy: str, normalize: bool = True) -> ag.Tensor:
    """Pool [B, T, d] states to [B, d]; unit-normalised unless ``normalize`` is False."""
    ids, n_real, pad_side = _as_arrays(batch)
    W = pool_weights(n_real, ids.shape[1], pad_side, pooling, pad_policy)
    pooled = ag.weighted_pool(states, W)
    return ag.l2_normalize(pooled) if normalize else pooled


def encode_batch(params: Parameters, batch, cfg: ModelConfig) -> ag.Tensor:
    """Forward + pool + normalise; differentiable when called under a Tape."""
    return pool(forward(params, batch, cfg), batch, cfg.pooling, cfg.pad_policy)


def encode_texts(texts, vocab: Vocab, cfg: ModelConfig) -> list[Encoded]:
    return [encode(t, vocab, cfg.max_len, cfg.pad_side) for t in texts]


def embed(params: Parameters, texts, vocab: Vocab, cfg: ModelConfig, threads: int = 1, chunk: int = 64) -> np.ndarray:
    """Unit-norm embeddings [N, d_model] for ``texts``.

    Work is cut into fixed ``chunk``-sized batches regardless of ``threads``, so
    the output is bit-identical for any thread count.
    """
    texts = list(texts)
    if not texts:
        return np.zeros((0, cfg.d_model), dtype=params.dtype)
    encoded = encode_texts(texts, vocab, cfg)
    pieces = [encoded[i:i + chunk] for i in range(0, len(encoded), chunk)]

    def run(piece):
        return encode_batch(params, piece, cfg).data

    if threads > 1 and len(pieces) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool_:
            out = list(pool_.map(run, pieces))
    else:
        out = [run(p) for p in pieces]
    return np.concatenate(out, axis=0)


class Encoder:
    """Parameters + vocabulary + config: the thing evaluation and mining call."""

    def __init__(self, params: Parameters, vocab: Vocab, config: ModelConfig, name: str = "model", threads: int = 1):
        self.params = params
        self.vocab = vocab
        self.config = config
        self.name = name
        self.threads = threads

    def embed(self, texts) -> np.ndarray:
        return embed(self.params, texts, self.vocab, self.config, threads=self.threads)

    def with_settings(self, **changes) -> "Encoder":
        """Same parameter store, different pooling/padding settings."""
        return Encoder(self.params, self.vocab, replace(self.config, **changes), self.name, self.threads)

    def settings(self) -> dict:
        c = self.config
        return {"pooling": c.pooling, "pad_side": c.pad_side, "pad_policy": c.pad_policy}

    @classmethod
    def load(cls, ckpt_path, vocab_path, threads: int = 1) -> "Encoder":
        params, cfg, _ = load_checkpoint(ckpt_path)
        vocab = Vocab.load(vocab_path)
        if vocab.size != cfg.vocab_size:
            raise CheckpointError(f"vocab has {vocab.size} tokens but checkpoint expects {cfg.vocab_size}")
        return cls(params, vocab, cfg, name=os.path.basename(str(ckpt_path)), threads=threads)


def check_unit_norm(vectors, tol: float = 1e-5):
    norms = np.linalg.norm(vectors, axis=-1)
    if np.any(np.abs(norms - 1.0) > tol):
        raise ZeroVector(f"embedding norms deviate from 1 by up to {np.abs(norms - 1).max():.3g}")


# ---------------------------------------------------------------- checkpoints
#
# Layout (all integers little-endian):
#   b"CL4D" | u32 format version | u32 header length | header (UTF-8 JSON) | blobs
# The header holds {"config": ModelConfig, "tensors": [{"name", "shape", "offset",
# "nbytes"}], "meta": {...}}; offsets are relative to the first blob byte. Blobs are
# f32 little-endian, row-major, in parameter_layout order.


def save_checkpoint(path, params: Parameters, cfg: ModelConfig, meta: dict | None = None):
    manifest = []
    blobs = []
    offset = 0
    for name, shape in parameter_layout(cfg):
        arr = np.ascontiguousarray(params[name].data, dtype="<f4")
        if arr.shape != tuple(shape):
            raise CheckpointError(f"{name} has shape {arr.shape}, expected {shape}")
        raw = arr.tobytes()
        manifest.append({"name": name, "shape": list(shape), "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps({"config": asdict(cfg), "tensors": manifest, "meta": meta or {}}, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(CKPT_MAGIC)
        f.write(struct.pack("<II", CKPT_VERSION, len(header)))
        f.write(header)
        for raw in blobs:
            f.write(raw)


def read_checkpoint_header(path) -> dict:
    with open(path, "rb") as f:
        if f.read(4) != CKPT_MAGIC:
            raise CheckpointError(f"{path} is not a checkpoint (bad magic)")
        version, hlen = struct.unpack("<II", f.read(8))
        if version != CKPT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        header = json.loads(f.read(hlen))
    header["_data_start"] = 12 + hlen
    return header


def load_checkpoint(path):
    """Returns ``(params, config, header)``; parameters come back as float32."""
    header = read_checkpoint_header(path)
    cfg = ModelConfig(**header["config"])
    with open(path, "rb") as f:
        f.seek(header["_data_start"])
        data = f.read()
    tensors = OrderedDict()
    expected = dict(parameter_layout(cfg))
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        if expected.get(entry["name"]) != shape:
            raise CheckpointError(f"unexpected tensor {entry['name']} {shape}")
        raw = data[entry["offset"]: entry["offset"] + entry["nbytes"]]
        arr = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float32)
        tensors[entry["name"]] = ag.Tensor(arr, requires_grad=True)
    if list(tensors) != [n for n, _ in parameter_layout(cfg)]:
        raise CheckpointError("checkpoint tensors are incomplete or out of order")
    return Parameters(tensors), cfg, header
