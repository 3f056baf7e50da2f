"""Synthetic, separable (query, code) corpus used for end-to-end training checks.

Each pair is keyed by two factors ``(a, b)``. The query names them with
natural-language words and the code names them with unrelated identifiers, so
a randomly initialised encoder sees no overlap between the two sides; the
mapping must be learned. Held-out pairs are unseen factor combinations.
"""

from __future__ import annotations

import random
import string

from .corpus import BimodalPair

N_A = 16
N_B = 32

_QUERY_TEMPLATES = (
    "compute the {a} {b}",
    "return {a} for the {b}",
    "get the {b} {a}",
    "build {a} from {b}",
)


def _words(rng: random.Random, n: int, taken: set, length: int) -> list[str]:
    out = []
    while len(out) < n:
        w = "".join(rng.choice(string.ascii_lowercase) for _ in range(length))
        if w not in taken:
            taken.add(w)
            out.append(w)
    return out


def synthetic_pairs(n_a: int = N_A, n_b: int = N_B, seed: int = 0) -> list[BimodalPair]:
    """``n_a * n_b`` keyed pairs (512 by default), deterministic in ``seed``."""
    rng = random.Random(seed)
    taken: set = set()
    qa, qb = _words(rng, n_a, taken, 5), _words(rng, n_b, taken, 5)
    ca, cb = _words(rng, n_a, taken, 4), _words(rng, n_b, taken, 4)
    pairs = []
    for i in range(n_a):
        for j in range(n_b):
            template = _QUERY_TEMPLATES[(i + j) % len(_QUERY_TEMPLATES)]
            query = template.format(a=qa[i], b=qb[j])
            code = f"def fn(x):\n    y = {ca[i]}(x)\n    return y.{cb[j]}()"
            pairs.append(BimodalPair.make("python", query, code, {"repo": "synthetic", "path": "synthetic.py", "name": f"k{i}_{j}"}))
    return pairs


def held_out_split(pairs, n_test: int = 128, seed: int = 0):
    """Seeded (train, test) split; every test pair is a factor combination absent from train."""
    pairs = list(pairs)
    order = list(range(len(pairs)))
    random.Random(seed).shuffle(order)
    cut = len(pairs) - n_test
    return [pairs[i] for i in order[:cut]], [pairs[i] for i in order[cut:]]
