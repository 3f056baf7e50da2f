"""Retrieval evaluation: MRR code search, MAP clone detection, ablations, 2-D projection."""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DuplicateIdError

log = logging.getLogger(__name__)


@dataclass
class SearchEvalSet:
    queries: list  # (query text, gold code id, language)
    pool: list  # (code id, code text, language)

    def __post_init__(self):
        self.queries = [tuple(q) + ("",) * (3 - len(q)) for q in self.queries]
        self.pool = [tuple(c) + ("",) * (3 - len(c)) for c in self.pool]
        ids = [c[0] for c in self.pool]
        if len(set(ids)) != len(ids):
            raise DuplicateIdError("pool ids must be unique")
        known = set(ids)
        missing = [q[1] for q in self.queries if q[1] not in known]
        if missing:
            raise DataError(f"gold id {missing[0]!r} is not in the pool")

    @classmethod
    def from_pairs(cls, pairs) -> "SearchEvalSet":
        pairs = list(pairs)
        return cls([(p.query, p.id, p.language) for p in pairs], [(p.id, p.code, p.language) for p in pairs])

    @classmethod
    def load(cls, queries_path, pool_path) -> "SearchEvalSet":
        queries = [(o["query"], o["gold_id"], o.get("language", "")) for o in _read_jsonl(queries_path)]
        pool = [(o["id"], o["code"], o.get("language", "")) for o in _read_jsonl(pool_path)]
        return cls(queries, pool)


@dataclass
class CloneEvalSet:
    items: list  # (id, code text, class label)

    def __post_init__(self):
        self.items = [tuple(i) for i in self.items]
        ids = [i[0] for i in self.items]
        if len(set(ids)) != len(ids):
            raise DuplicateIdError("clone item ids must be unique")

    @classmethod
    def load(cls, path) -> "CloneEvalSet":
        return cls([(o["id"], o["code"], str(o["label"])) for o in _read_jsonl(path)])


def _read_jsonl(path):
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


@dataclass
class Metrics:
    metric: str
    value: float
    n: int
    per_language: dict = field(default_factory=dict)
    skipped: int = 0
    model: str = ""
    settings: dict = field(default_factory=dict)
    per_query: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"metric": self.metric, "value": self.value, "n": self.n, "per_language": self.per_language,
                "skipped": self.skipped, "model": self.model, "settings": self.settings}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------- ranking


def rank(query_embedding, pool_index) -> list:
    """Pool ids by descending cosine; ties by ascending id."""
    scores = pool_index.scores(query_embedding)
    return [pool_index.ids[k] for k in rank_order(scores, pool_index.ids)]


def rank_order(scores, ids) -> np.ndarray:
    id_rank = np.empty(len(ids), dtype=np.int64)
    id_rank[np.argsort(np.array(ids, dtype=object), kind="stable")] = np.arange(len(ids))
    return np.lexsort((id_rank, -np.asarray(scores, dtype=np.float64)))


def gold_rank(scores, ids, gold_pos: int) -> int:
    """1-based rank of ``gold_pos`` in the ranking ``rank_order`` would produce."""
    s = np.asarray(scores, dtype=np.float64)
    g = s[gold_pos]
    gold_id = ids[gold_pos]
    ahead = int((s > g).sum())
    ties = np.flatnonzero(s == g)
    ahead += sum(1 for k in ties if ids[k] < gold_id)
    return ahead + 1


def mean_reciprocal_rank(ranks) -> float:
    ranks = list(ranks)
    return float(sum(1.0 / r for r in ranks) / len(ranks)) if ranks else 0.0


def average_precision(relevant_flags) -> float:
    """AP of one ranked list given per-position relevance (True = relevant)."""
    hits, total = 0, 0.0
    for k, rel in enumerate(relevant_flags, start=1):
        if rel:
            hits += 1
            total += hits / k
    return total / hits if hits else 0.0


def _by_language(values, langs) -> dict:
    groups = defaultdict(list)
    for v, lang in zip(values, langs):
        if lang:
            groups[lang].append(v)
    return {k: float(np.mean(v)) for k, v in sorted(groups.items())}


def _model_id(model) -> str:
    return getattr(model, "name", type(model).__name__)


def _settings(model) -> dict:
    return model.settings() if hasattr(model, "settings") else {}


def candidate_positions(n_pool: int, gold_pos: int, pool_size: int, seed: int, k: int) -> np.ndarray:
    """Gold plus ``pool_size - 1`` distractors drawn from query ``k``'s own seeded stream."""
    others = np.delete(np.arange(n_pool), gold_pos)
    take = min(pool_size - 1, len(others))
    picked = np.random.default_rng([seed, k]).choice(others, size=take, replace=False)
    return np.sort(np.append(picked, gold_pos))


def mrr_from_embeddings(Q, C, pool_ids, gold_positions, threads: int = 1, pool_size: int | None = None,
                        seed: int = 0) -> list:
    """Per-query 1-based gold ranks, over the full pool unless ``pool_size`` caps the candidates."""
    C = np.asarray(C)
    Q = np.asarray(Q)
    if pool_size is not None and pool_size < 1:
        raise ValueError("pool_size must be >= 1")

    def one(k):
        g = gold_positions[k]
        if pool_size is None or pool_size >= len(pool_ids):
            return gold_rank(C @ Q[k], pool_ids, g)
        cand = candidate_positions(len(pool_ids), g, pool_size, seed, k)
        return gold_rank(C[cand] @ Q[k], [pool_ids[c] for c in cand], int(np.flatnonzero(cand == g)[0]))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(one, range(len(Q))))
    return [one(k) for k in range(len(Q))]


def mrr(eval_set: SearchEvalSet, model, threads: int = 1, pool_size: int | None = None, seed: int = 0) -> Metrics:
    """Mean reciprocal rank of each gold code.

    The default ranks against the full pool; ``pool_size`` instead ranks each gold
    against a seeded sample of ``pool_size - 1`` distractors.
    """
    ids = [c[0] for c in eval_set.pool]
    pos = {i: k for k, i in enumerate(ids)}
    C = model.embed([c[1] for c in eval_set.pool])
    Q = model.embed([q[0] for q in eval_set.queries])
    ranks = mrr_from_embeddings(Q, C, ids, [pos[q[1]] for q in eval_set.queries], threads, pool_size, seed)
    rr = [1.0 / r for r in ranks]
    settings = _settings(model)
    if pool_size is not None:
        settings = {**settings, "pool_size": pool_size, "pool_seed": seed}
    return Metrics("mrr", mean_reciprocal_rank(ranks), len(rr), _by_language(rr, [q[2] for q in eval_set.queries]),
                   model=_model_id(model), settings=settings, per_query=rr)


def map_from_embeddings(E, ids, labels):
    """Per-query AP for clone retrieval; returns (aps, skipped_count)."""
    E = np.asarray(E)
    labels = list(labels)
    counts = defaultdict(int)
    for lab in labels:
        counts[lab] += 1
    aps, skipped = [], 0
    id_arr = np.array(list(ids), dtype=object)
    lab_arr = np.array(labels, dtype=object)
    for k in range(len(id_arr)):
        if counts[labels[k]] < 2:
            skipped += 1
            continue
        others = np.delete(np.arange(len(id_arr)), k)
        order = rank_order(E[others] @ E[k], list(id_arr[others]))
        rel = lab_arr[others][order] == labels[k]
        hits = np.cumsum(rel)
        positions = np.arange(1, len(rel) + 1)
        aps.append(float((hits[rel] / positions[rel]).sum() / hits[-1]))
    return aps, skipped


def map_clone(eval_set: CloneEvalSet, model) -> Metrics:
    """Mean average precision where each item queries all others; same label = relevant."""
    E = model.embed([i[1] for i in eval_set.items])
    aps, skipped = map_from_embeddings(E, [i[0] for i in eval_set.items], [i[2] for i in eval_set.items])
    if skipped:
        log.warning("skipped %d clone queries from single-member classes", skipped)
    value = float(np.mean(aps)) if aps else 0.0
    return Metrics("map", value, len(aps), skipped=skipped, model=_model_id(model), settings=_settings(model), per_query=aps)


# ---------------------------------------------------------------- ablations

GRID = (("left", "mean"), ("right", "mean"), ("left", "last"), ("right", "last"))
_POOL_LABEL = {"mean": "Avg", "last": "Last"}


def ablation_grid(encoder, eval_set: SearchEvalSet, pad_policy: str = "naive", threads: int = 1) -> list:
    """MRR of one parameter store under every pad side x pooling setting."""
    rows = []
    for side, pooling in GRID:
        variant = encoder.with_settings(pad_side=side, pooling=pooling, pad_policy=pad_policy)
        m = mrr(eval_set, variant, threads)
        rows.append({"pad_side": side, "pooling": pooling, "pad_policy": pad_policy,
                     "label": f"{side.capitalize()} padding + {_POOL_LABEL[pooling]}", "metrics": m})
    return rows


def grid_to_dict(rows) -> dict:
    return {"rows": [{"label": r["label"], "pad_side": r["pad_side"], "pooling": r["pooling"],
                      "pad_policy": r["pad_policy"], "mrr": r["metrics"].value,
                      "per_language": r["metrics"].per_language, "n": r["metrics"].n} for r in rows]}


def format_grid(rows) -> str:
    langs = sorted({lang for r in rows for lang in r["metrics"].per_language})
    head = ["Type"] + langs + (["Avg"] if langs else []) + ["All"]
    lines = ["\t".join(head)]
    for r in rows:
        per = r["metrics"].per_language
        cells = [f"{100 * per[lang]:.2f}" if lang in per else "-" for lang in langs]
        if langs:
            cells.append(f"{100 * np.mean([per[lang] for lang in langs if lang in per]):.2f}")
        lines.append("\t".join([r["label"], *cells, f"{100 * r['metrics'].value:.2f}"]))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- projection


def project_2d(embeddings, labels, projector=None) -> list:
    """PCA to two components.

    Components come from an exact symmetric eigendecomposition of the covariance;
    each component's sign is fixed so its largest-magnitude entry is positive.
    ``projector`` (a callable mapping [N, d] to [N, 2]) replaces PCA, e.g. t-SNE.
    """
    X = np.asarray(embeddings, dtype=np.float64)
    labels = list(labels)
    if X.ndim != 2 or X.shape[0] != len(labels):
        raise ValueError("embeddings must be [N, d] with one label per row")
    if projector is not None:
        P = np.asarray(projector(X), dtype=np.float64)
        if P.shape != (len(labels), 2):
            raise ValueError(f"projector returned shape {P.shape}, expected ({len(labels)}, 2)")
        return [(float(x), float(y), lab) for (x, y), lab in zip(P, labels)]
    Xc = X - X.mean(axis=0)
    cov = Xc.T @ Xc / max(len(X), 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(-vals, kind="stable")[:2]
    comps = vecs[:, order]
    if comps.shape[1] < 2:
        comps = np.pad(comps, ((0, 0), (0, 2 - comps.shape[1])))
    for j in range(comps.shape[1]):
        col = comps[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            comps[:, j] = -col
    P = Xc @ comps
    return [(float(x), float(y), lab) for (x, y), lab in zip(P, labels)]


def write_tsv(path, points):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("x\ty\tlabel\n")
        for x, y, lab in points:
            f.write(f"{x!r}\t{y!r}\t{lab}\n")


_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def write_svg(path, points, size: int = 480, margin: int = 20):
    from xml.sax.saxutils import escape

    xs = [p[0] for p in points] or [0.0]
    ys = [p[1] for p in points] or [0.0]
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    sx = (size - 2 * margin) / ((x1 - x0) or 1.0)
    sy = (size - 2 * margin) / ((y1 - y0) or 1.0)
    colours = {lab: _PALETTE[i % len(_PALETTE)] for i, lab in enumerate(sorted({p[2] for p in points}))}
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">',
           f'<rect width="{size}" height="{size}" fill="white"/>']
    for x, y, lab in points:
        cx = margin + (x - x0) * sx
        cy = size - margin - (y - y0) * sy
        out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="3" fill="{colours[lab]}"><title>{escape(str(lab))}</title></circle>')
    for i, (lab, col) in enumerate(colours.items()):
        out.append(f'<text x="{margin}" y="{margin + 12 * i}" font-size="10" fill="{col}">{escape(str(lab))}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(out) + "\n")
