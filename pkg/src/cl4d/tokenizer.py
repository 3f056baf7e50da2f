"""Byte-level BPE vocabulary and fixed-length encoding."""

from __future__ import annotations

import heapq
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import EmptyCorpus, ShapeError

PAD, BOS, EOS = 0, 1, 2
N_SPECIAL = 3
BYTE_OFFSET = N_SPECIAL
MIN_VOCAB = 256 + N_SPECIAL

# Chunks never cross identifier / number / punctuation / whitespace boundaries.
# Every character matches some branch, so concatenating the chunks restores the text.
_CHUNK = re.compile(r" ?[A-Za-z_][A-Za-z0-9_]*| ?[0-9]+| ?[^\sA-Za-z0-9_]+|\s+(?!\S)|\s+")


def pretokenize(text: str) -> list[bytes]:
    return [m.group().encode("utf-8") for m in _CHUNK.finditer(text)]


@dataclass(eq=False)
class Vocab:
    merges: list[tuple[bytes, bytes]]
    _ranks: dict = field(init=False, repr=False)
    _tokens: list = field(init=False, repr=False)
    _ids: dict = field(init=False, repr=False)
    _cache: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.merges = [(bytes(a), bytes(b)) for a, b in self.merges]
        self._ranks = {pair: i for i, pair in enumerate(self.merges)}
        self._tokens = [b"", b"", b""] + [bytes([i]) for i in range(256)] + [a + b for a, b in self.merges]
        self._ids = {}
        for i, tok in enumerate(self._tokens[N_SPECIAL:], start=N_SPECIAL):
            self._ids.setdefault(tok, i)
        self._cache = {}

    @property
    def size(self) -> int:
        return MIN_VOCAB + len(self.merges)

    def __len__(self):
        return self.size

    def __eq__(self, other):
        return isinstance(other, Vocab) and self.merges == other.merges

    def token_bytes(self, i: int) -> bytes:
        return self._tokens[i]

    def tokenize(self, text: str) -> list[int]:
        """Token ids for ``text`` without specials."""
        out = []
        for chunk in pretokenize(text):
            ids = self._cache.get(chunk)
            if ids is None:
                ids = self._encode_chunk(chunk)
                self._cache[chunk] = ids
            out.extend(ids)
        return out

    def _encode_chunk(self, chunk: bytes) -> tuple:
        parts = [bytes([b]) for b in chunk]
        ranks = self._ranks
        while len(parts) > 1:
            best, best_rank = None, None
            for pair in zip(parts, parts[1:]):
                r = ranks.get(pair)
                if r is not None and (best_rank is None or r < best_rank):
                    best, best_rank = pair, r
            if best is None:
                break
            parts = _merge_symbols(parts, best)
        return tuple(self._ids[p] for p in parts)

    def to_json(self) -> dict:
        return {
            "format": "cl4d-bpe",
            "version": 1,
            "size": self.size,
            "specials": {"PAD": PAD, "BOS": BOS, "EOS": EOS},
            # bytes are stored as latin-1 strings: one code point per byte, lossless
            "merges": [[a.decode("latin-1"), b.decode("latin-1")] for a, b in self.merges],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Vocab":
        vocab = cls([(a.encode("latin-1"), b.encode("latin-1")) for a, b in obj["merges"]])
        if obj.get("size", vocab.size) != vocab.size:
            raise ValueError(f"vocab size {obj['size']} disagrees with {len(vocab.merges)} merges")
        return vocab

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json(), f, ensure_ascii=True, indent=1)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "Vocab":
        with open(path, encoding="utf-8") as f:
            return cls.from_json(json.load(f))


def _merge_symbols(parts, pair):
    a, b = pair
    out = []
    i = 0
    n = len(parts)
    while i < n:
        if i < n - 1 and parts[i] == a and parts[i + 1] == b:
            out.append(a + b)
            i += 2
        else:
            out.append(parts[i])
            i += 1
    return out


def build_vocab(corpus: Iterable[str], target_size: int = 4096, seed: int = 0, min_frequency: int = 2) -> Vocab:
    """Greedy byte-level BPE.

    Each step merges the most frequent adjacent pair, ties going to the
    lexicographically smaller pair. Stops at ``target_size`` or when no pair
    occurs at least ``min_frequency`` times. The procedure has no random
    choices; ``seed`` is accepted so every artifact builder shares one signature.
    """
    if target_size < MIN_VOCAB:
        raise ValueError(f"target_size must be >= {MIN_VOCAB}, got {target_size}")
    counts: Counter = Counter()
    seen = False
    for text in corpus:
        seen = True
        counts.update(pretokenize(text))
    if not seen or not counts:
        raise EmptyCorpus("cannot build a vocabulary from an empty corpus")

    words = [[bytes([b]) for b in w] for w in sorted(counts)]
    freqs = [counts[w] for w in sorted(counts)]
    pair_counts: Counter = Counter()
    where: dict = {}
    for idx, (syms, fr) in enumerate(zip(words, freqs)):
        for pair in zip(syms, syms[1:]):
            pair_counts[pair] += fr
            where.setdefault(pair, set()).add(idx)
    heap = [(-c, p) for p, c in pair_counts.items()]
    heapq.heapify(heap)

    merges = []
    while MIN_VOCAB + len(merges) < target_size and heap:
        negc, pair = heapq.heappop(heap)
        if pair_counts.get(pair, 0) != -negc:
            continue  # stale entry
        if -negc < min_frequency:
            break
        merges.append(pair)
        changed = set()
        for idx in sorted(where.pop(pair, ())):
            syms, fr = words[idx], freqs[idx]
            for p in zip(syms, syms[1:]):
                pair_counts[p] -= fr
                changed.add(p)
            syms = _merge_symbols(syms, pair)
            words[idx] = syms
            for p in zip(syms, syms[1:]):
                pair_counts[p] += fr
                changed.add(p)
                where.setdefault(p, set()).add(idx)
        pair_counts.pop(pair, None)
        for p in changed:
            c = pair_counts.get(p, 0)
            if c > 0:
                heapq.heappush(heap, (-c, p))
            else:
                pair_counts.pop(p, None)
    return Vocab(merges)


@dataclass(frozen=True)
class Encoded:
    ids: tuple
    n_real: int
    pad_side: str

    @property
    def max_len(self) -> int:
        return len(self.ids)

    @property
    def real_ids(self) -> tuple:
        if self.pad_side == "left":
            return self.ids[len(self.ids) - self.n_real:]
        return self.ids[: self.n_real]


def encode(text: str, vocab: Vocab, max_len: int, pad_side: str = "right") -> Encoded:
    """``BOS tokens EOS`` truncated from the right (EOS kept) and padded to ``max_len``."""
    if max_len < 3:
        raise ValueError("max_len must be >= 3")
    if pad_side not in ("left", "right"):
        raise ValueError(f"pad_side must be 'left' or 'right', got {pad_side!r}")
    toks = vocab.tokenize(text)[: max_len - 2]
    real = [BOS, *toks, EOS]
    pads = [PAD] * (max_len - len(real))
    ids = pads + real if pad_side == "left" else real + pads
    return Encoded(tuple(ids), len(real), pad_side)


def decode(ids, vocab: Vocab) -> str:
    data = b"".join(vocab.token_bytes(int(i)) for i in ids if int(i) >= N_SPECIAL)
    return data.decode("utf-8", errors="replace")


def stack(batch: list[Encoded]):
    """Pack a list of Encoded into ``(ids[B, T], n_real[B], pad_side)``."""
    if not batch:
        raise ValueError("empty batch")
    sides = {e.pad_side for e in batch}
    lens = {e.max_len for e in batch}
    if len(sides) != 1 or len(lens) != 1:
        raise ShapeError("batch mixes pad sides or sequence lengths")
    ids = np.array([e.ids for e in batch], dtype=np.int64)
    n_real = np.array([e.n_real for e in batch], dtype=np.int64)
    return ids, n_real, batch[0].pad_side
