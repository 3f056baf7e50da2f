"""Hard-negative mining: for each query, the nearest non-gold code in the codebase."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .corpus import code_key
from .errors import DuplicateIdError, Exhausted

log = logging.getLogger(__name__)

DEFAULT_NEAR_DUP = 0.98


class EmbeddingIndex:
    """Exact (exhaustive) cosine index over unit-norm rows."""

    def __init__(self, ids, matrix):
        ids = list(ids)
        matrix = np.asarray(matrix)
        if len(set(ids)) != len(ids):
            seen, dup = set(), None
            for i in ids:
                if i in seen:
                    dup = i
                    break
                seen.add(i)
            raise DuplicateIdError(f"duplicate id {dup!r} in index")
        if matrix.ndim != 2 or matrix.shape[0] != len(ids):
            if not ids and matrix.size == 0:
                matrix = matrix.reshape(0, matrix.shape[-1] if matrix.ndim == 2 else 0)
            else:
                raise ValueError(f"{len(ids)} ids but matrix of shape {matrix.shape}")
        if len(ids):
            norms = np.linalg.norm(matrix, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-5):
                raise ValueError("index rows must be unit-norm within 1e-5")
        self.ids = ids
        self.matrix = matrix
        self._pos = {i: k for k, i in enumerate(ids)}

    def __len__(self):
        return len(self.ids)

    def position(self, id_):
        return self._pos[id_]

    def scores(self, query_embedding) -> np.ndarray:
        if not self.ids:
            raise Exhausted("index is empty")
        return self.matrix @ np.asarray(query_embedding, dtype=self.matrix.dtype)


def build_index(ids, embeddings) -> EmbeddingIndex:
    return EmbeddingIndex(ids, embeddings)


def select_best(scores, ids, exclusions=frozenset(), near_dup_threshold: float = DEFAULT_NEAR_DUP, allowed=None):
    """Argmax of ``scores`` over allowed candidates; equal scores go to the smallest id.

    ``allowed`` is an optional precomputed boolean mask; ``exclusions`` are ids.
    """
    s = np.asarray(scores, dtype=np.float64)
    if allowed is None:
        allowed = np.fromiter((i not in exclusions for i in ids), dtype=bool, count=len(ids))
    else:
        allowed = np.array(allowed, dtype=bool)
    if near_dup_threshold > 0:
        allowed &= s <= near_dup_threshold
    if not allowed.any():
        raise Exhausted("every candidate was excluded")
    best = s[allowed].max()
    tied = np.flatnonzero(allowed & (s == best))
    return min(ids[k] for k in tied), float(best)


def mine(query_embedding, index: EmbeddingIndex, exclusions=frozenset(), near_dup_threshold: float = DEFAULT_NEAR_DUP):
    """Nearest allowed code to the query.

    ``exclusions`` holds the gold id and every id whose normalised code equals the
    gold code's; candidates scoring above ``near_dup_threshold`` (when > 0) are
    also skipped as probable false negatives.
    """
    return select_best(index.scores(query_embedding), index.ids, exclusions, near_dup_threshold)


# ---------------------------------------------------------------- miner models


class TfidfMiner:
    """Model-free cold-start miner: TF-IDF cosine over code tokens."""

    name = "tfidf"

    def __init__(self):
        from sklearn.feature_extraction.text import TfidfVectorizer

        self._vec = TfidfVectorizer(token_pattern=r"[A-Za-z_][A-Za-z0-9_]*|\d+", lowercase=True, dtype=np.float64)
        self._codes = None

    def fit(self, codes):
        self._codes = self._vec.fit_transform(list(codes))
        return self

    def scores(self, queries) -> np.ndarray:
        q = self._vec.transform(list(queries))
        return np.asarray((q @ self._codes.T).todense())


class ModelMiner:
    """Miner backed by an encoder checkpoint (e.g. a one-epoch in-batch bootstrap)."""

    def __init__(self, encoder, name: str | None = None):
        self.encoder = encoder
        self.name = name or f"model:{encoder.name}"
        self.index = None

    def fit(self, codes):
        emb = self.encoder.embed(list(codes))
        self.index = EmbeddingIndex(range(len(emb)), emb)
        return self

    def scores(self, queries) -> np.ndarray:
        return self.encoder.embed(list(queries)) @ self.index.matrix.T


@dataclass
class HardNegativeMap:
    miner: str
    entries: dict = field(default_factory=dict)  # pair id -> (code id, score)
    skipped: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {k: v[0] for k, v in self.entries.items()}

    def __len__(self):
        return len(self.entries)

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for pid in sorted(self.entries):
                cid, score = self.entries[pid]
                f.write(json.dumps({"pair_id": pid, "negative_code_id": cid, "score": score, "miner": self.miner}))
                f.write("\n")

    @classmethod
    def load(cls, path) -> "HardNegativeMap":
        entries, miners = {}, set()
        with open(path, encoding="utf-8") as f:
            for line in f:
                if not line.strip():
                    continue
                obj = json.loads(line)
                entries[obj["pair_id"]] = (obj["negative_code_id"], obj["score"])
                miners.add(obj["miner"])
        return cls(miner=",".join(sorted(miners)), entries=entries)


def mine_all(pairs, miner, near_dup_threshold: float = DEFAULT_NEAR_DUP, threads: int = 1, chunk: int = 256) -> HardNegativeMap:
    """Mine one hard negative per pair against the codes of ``pairs``.

    Pairs whose every candidate is excluded are skipped with a warning.
    """
    pairs = sorted(pairs, key=lambda p: p.id)
    ids = [p.id for p in pairs]
    pos = {pid: k for k, pid in enumerate(ids)}
    keys = [code_key(p.code) for p in pairs]
    same_code: dict = {}
    for pid, k in zip(ids, keys):
        same_code.setdefault(k, set()).add(pid)
    miner.fit([p.code for p in pairs])
    result = HardNegativeMap(miner=miner.name)
    blocks = [pairs[i:i + chunk] for i in range(0, len(pairs), chunk)]

    def run(block):
        S = miner.scores([p.query for p in block])
        out = []
        for p, row in zip(block, S):
            allowed = np.ones(len(ids), dtype=bool)
            allowed[[pos[i] for i in same_code[code_key(p.code)]]] = False
            allowed[pos[p.id]] = False
            try:
                out.append((p.id, select_best(row, ids, near_dup_threshold=near_dup_threshold, allowed=allowed)))
            except Exhausted:
                out.append((p.id, None))
        return out

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(run, blocks))
    else:
        results = [run(b) for b in blocks]
    for block in results:
        for pid, hit in block:
            if hit is None:
                log.warning("no hard negative for pair %s: every candidate excluded", pid)
                result.skipped.append(pid)
            else:
                result.entries[pid] = (hit[0], float(hit[1]))
    return result
