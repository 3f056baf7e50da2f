"""InfoNCE training of the dual encoder with in-batch and mined hard negatives."""

from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import autograd as ag
from .errors import DataError, NormError, TemperatureError
from .model import ModelConfig, Parameters, encode_batch, encode_texts, init_parameters, save_checkpoint
from .tokenizer import Vocab, stack

log = logging.getLogger(__name__)

# settings for fine-tuning billion-parameter pretrained checkpoints; the defaults
# below are tuned for small randomly initialised models
LARGE_MODEL_LR = 2e-5
LARGE_MODEL_BATCH_SIZE = 64
LARGE_MODEL_EPOCHS = 2


@dataclass(frozen=True)
class TrainConfig:
    temperature: float = 0.05
    lr: float = 3e-4
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 32
    epochs: int = 2
    use_in_batch: bool = True
    use_hard_negatives: bool = True
    seed: int = 0
    grad_clip_norm: float = 1.0

    def __post_init__(self):
        if not self.temperature > 0:
            raise TemperatureError(f"temperature must be > 0, got {self.temperature}")
        if self.use_in_batch and self.batch_size < 2:
            raise ValueError("in-batch negatives need batch_size >= 2")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")


@dataclass
class LossBreakdown:
    total: ag.Tensor
    per_example: np.ndarray
    pos_sim: float
    neg_sim: float

    @property
    def value(self) -> float:
        return self.total.item()


def _tensor(x):
    return x if isinstance(x, ag.Tensor) else ag.Tensor(np.asarray(x))


def similarity_matrix(Q, C) -> np.ndarray:
    """Cosine similarities S[i, j] = cos(Q_i, C_j)."""
    Q = np.asarray(Q, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    nq = np.linalg.norm(Q, axis=1, keepdims=True)
    nc = np.linalg.norm(C, axis=1, keepdims=True)
    if np.any(nq < ag.NORM_EPS) or np.any(nc < ag.NORM_EPS):
        raise ag.ZeroVector("zero-norm row in similarity_matrix")
    return (Q / nq) @ (C / nc).T


def _check_unit(t: ag.Tensor, name: str, tol: float = 1e-4):
    norms = np.linalg.norm(t.data, axis=1)
    if np.any(np.abs(norms - 1.0) > tol):
        raise NormError(f"rows of {name} must be unit-norm (max deviation {np.abs(norms - 1).max():.3g})")


def info_nce_loss(Q, C, H=None, temperature: float = 0.05, use_in_batch: bool = True, hard_valid=None) -> LossBreakdown:
    """Query-to-code InfoNCE over unit-norm embeddings.

    For row i the normaliser holds every in-batch code (positive included) plus
    row i's own hard negative only. ``hard_valid`` ([n] bool) drops the hard term
    for rows that have none. Without in-batch negatives the normaliser keeps the
    positive term and the hard term.
    """
    if not temperature > 0:
        raise TemperatureError(f"temperature must be > 0, got {temperature}")
    Q, C = _tensor(Q), _tensor(C)
    n = Q.shape[0]
    _check_unit(Q, "Q")
    _check_unit(C, "C")
    if use_in_batch:
        logits = ag.matmul(Q, ag.transpose(C))
        targets = np.arange(n)
    else:
        logits = ag.rowdot(Q, C)
        targets = np.zeros(n, dtype=np.int64)
    sims = logits.data
    neg = [sims[~np.eye(n, dtype=bool)]] if use_in_batch else []
    if H is not None:
        H = _tensor(H)
        _check_unit(H, "H")
        hard = ag.rowdot(Q, H)
        hv = np.ones(n, dtype=bool) if hard_valid is None else np.asarray(hard_valid, dtype=bool)
        neg.append(hard.data[hv, 0])
        # the hard term joins after the in-batch log-sum-exp: adding it never lowers a row, even in rounding
        per = ag.cross_entropy_rows(ag.scale(logits, 1.0 / temperature), targets,
                                    extra=ag.scale(hard, 1.0 / temperature), extra_valid=hv)
    else:
        per = ag.cross_entropy_rows(ag.scale(logits, 1.0 / temperature), targets)
    pos = sims[np.arange(n), targets]
    negs = np.concatenate(neg) if neg else np.zeros(0)
    return LossBreakdown(
        total=ag.mean(per),
        per_example=per.data.copy(),
        pos_sim=float(pos.mean()),
        neg_sim=float(negs.mean()) if negs.size else float("nan"),
    )


# ---------------------------------------------------------------- optimiser


@dataclass
class AdamState:
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    t: int = 0


def clip_grad_norm(grads: Sequence[np.ndarray], max_norm: float):
    """Scale ``grads`` in place so their global L2 norm is at most ``max_norm``."""
    total = math.sqrt(sum(float((g.astype(np.float64) ** 2).sum()) for g in grads))
    if max_norm > 0 and total > max_norm:
        factor = max_norm / total
        for g in grads:
            g *= factor
    return total


def adamw_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState, cfg: TrainConfig, step_t: int | None = None):
    """One AdamW update with decoupled weight decay, applied in place.

    ``theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta)``
    after clipping the global gradient norm to ``cfg.grad_clip_norm``.
    """
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.t = state.t + 1 if step_t is None else step_t
    t = state.t
    grads = [np.array(g, dtype=p.dtype) for p, g in zip(params, grads)]
    clip_grad_norm(grads, cfg.grad_clip_norm)
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / c1
        v_hat = v / c2
        p -= cfg.lr * (m_hat / (np.sqrt(v_hat) + cfg.adam_eps) + cfg.weight_decay * p)
    return params, state


# ---------------------------------------------------------------- training loop


@dataclass
class TrainResult:
    params: Parameters
    curve: list  # (step, total, pos_sim, neg_sim)
    checkpoints: list


def _batch_arrays(encoded, idx):
    return stack([encoded[i] for i in idx])


def train(
    pairs,
    vocab: Vocab,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    hard_negatives: Mapping[str, str] | None = None,
    out_dir=None,
    params: Parameters | None = None,
    max_steps: int | None = None,
    log_every: int = 0,
) -> TrainResult:
    """Contrastive training over the full (mixed-language) pair list.

    Each epoch is a seeded shuffle cut into ceil(N / batch_size) batches. A
    checkpoint is written at every epoch end (and as ``final.ckpt``) when
    ``out_dir`` is given. ``params`` continues from an existing store instead of
    initialising from ``model_cfg.seed``.
    """
    pairs = list(pairs)
    if not pairs:
        raise DataError("training set is empty")
    N = len(pairs)
    index = {p.id: i for i, p in enumerate(pairs)}
    use_hn = train_cfg.use_hard_negatives and hard_negatives is not None
    hn_idx = np.full(N, -1, dtype=np.int64)
    if use_hn:
        for pid, cid in hard_negatives.items():
            if pid not in index:
                continue
            if cid not in index:
                raise DataError(f"hard negative {cid!r} for pair {pid!r} is not in the training codebase")
            if cid == pid:
                raise DataError(f"pair {pid!r} lists its own code as a hard negative")
            hn_idx[index[pid]] = index[cid]

    q_enc = encode_texts([p.query for p in pairs], vocab, model_cfg)
    c_enc = encode_texts([p.code for p in pairs], vocab, model_cfg)
    if params is None:
        params = init_parameters(model_cfg)
    names = params.names()
    tensors = [params[n] for n in names]
    state = AdamState()
    rng = np.random.default_rng(train_cfg.seed)
    steps_per_epoch = math.ceil(N / train_cfg.batch_size)
    curve, ckpts = [], []
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)

    step = 0
    epochs_done = 0
    done = False
    for epoch in range(train_cfg.epochs):
        order = rng.permutation(N)
        for b in range(steps_per_epoch):
            idx = order[b * train_cfg.batch_size:(b + 1) * train_cfg.batch_size]
            params.zero_grad()
            with ag.Tape() as tape:
                Q = encode_batch(params, _batch_arrays(q_enc, idx), model_cfg)
                C = encode_batch(params, _batch_arrays(c_enc, idx), model_cfg)
                H, hv = None, None
                if use_hn:
                    hv = hn_idx[idx] >= 0
                    src = np.where(hv, hn_idx[idx], idx)
                    if hv.any():
                        H = encode_batch(params, _batch_arrays(c_enc, src), model_cfg)
                loss = info_nce_loss(Q, C, H, train_cfg.temperature, train_cfg.use_in_batch, hv)
            tape.backward(loss.total)
            grads = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in tensors]
            adamw_step([t.data for t in tensors], grads, state, train_cfg)
            step += 1
            curve.append((step, loss.value, loss.pos_sim, loss.neg_sim))
            if log_every and step % log_every == 0:
                log.info("step %d loss %.4f pos %.3f neg %.3f", step, loss.value, loss.pos_sim, loss.neg_sim)
            if max_steps is not None and step >= max_steps:
                done = True
                break
        epochs_done = epoch + 1
        if out_dir is not None:
            path = os.path.join(out_dir, f"epoch_{epoch + 1}.ckpt")
            save_checkpoint(path, params, model_cfg, {"epoch": epoch + 1, "step": step})
            ckpts.append(path)
        if done:
            break
    params.zero_grad()
    if out_dir is not None:
        path = os.path.join(out_dir, "final.ckpt")
        save_checkpoint(path, params, model_cfg, {"epoch": epochs_done, "step": step})
        ckpts.append(path)
    return TrainResult(params, curve, ckpts)


def write_loss_curve(path, curve):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["step", "total", "pos_sim", "neg_sim"])
        for step, total, pos, neg in curve:
            w.writerow([step, repr(float(total)), repr(float(pos)), repr(float(neg))])
