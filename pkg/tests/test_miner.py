import numpy as np
import pytest
from hypothesis import given, strategies as st

from cl4d.corpus import BimodalPair, code_key
from cl4d.errors import DuplicateIdError, Exhausted
from cl4d.miner import HardNegativeMap, TfidfMiner, build_index, mine, mine_all, select_best


def unit_rows(rng, n, d):
    x = rng.standard_normal((n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def brute_force(q, ids, matrix, exclusions, threshold):
    best_id, best = None, None
    for i, row in zip(ids, matrix):
        s = float(sum(a * b for a, b in zip(row, q)))
        if i in exclusions or (threshold > 0 and s > threshold):
            continue
        if best is None or s > best or (s == best and i < best_id):
            best_id, best = i, s
    return best_id, best


def test_build_index_basics():
    rng = np.random.default_rng(0)
    m = unit_rows(rng, 3, 4)
    idx = build_index(["a", "b", "c"], m)
    assert len(idx) == 3 and idx.position("c") == 2
    assert idx.matrix.tobytes() == m.tobytes()
    with pytest.raises(DuplicateIdError):
        build_index(["a", "b", "a"], m)
    with pytest.raises(ValueError):
        build_index(["a", "b"], m)
    with pytest.raises(ValueError):
        build_index(["a"], np.array([[1.0, 1.0]]))


def test_empty_index_errors_on_query():
    idx = build_index([], np.zeros((0, 4)))
    assert len(idx) == 0
    with pytest.raises(Exhausted):
        mine(np.ones(4) / 2, idx)


def test_mine_skips_gold():
    # gold 0.9, others 0.8 and 0.2
    q = np.array([1.0, 0.0])
    m = np.array([[0.9, np.sqrt(1 - 0.81)], [0.8, 0.6], [0.2, np.sqrt(1 - 0.04)]])
    assert mine(q, build_index(["gold", "x", "y"], m), {"gold"})[0] == "x"


def test_tie_goes_to_smaller_id():
    q = np.array([1.0, 0.0])
    m = np.array([[0.5, np.sqrt(0.75)], [0.5, -np.sqrt(0.75)], [0.1, np.sqrt(0.99)]])
    assert mine(q, build_index(["zeta", "alpha", "mid"], m))[0] == "alpha"
    assert select_best([0.3, 0.3], ["b", "a"]) == ("a", 0.3)


def test_all_excluded_is_exhausted():
    idx = build_index(["a", "b"], np.eye(2))
    with pytest.raises(Exhausted):
        mine(np.array([1.0, 0.0]), idx, {"a", "b"})


def test_near_duplicate_threshold():
    q = np.array([1.0, 0.0])
    m = np.array([[0.99, np.sqrt(1 - 0.99**2)], [0.7, np.sqrt(0.51)]])
    idx = build_index(["near", "far"], m)
    assert mine(q, idx)[0] == "far"
    assert mine(q, idx, near_dup_threshold=0.0)[0] == "near"
    assert mine(q, idx, near_dup_threshold=-1)[0] == "near"
    with pytest.raises(Exhausted):
        mine(q, idx, {"far"})


@given(st.integers(0, 2**32 - 1), st.integers(1, 30), st.sampled_from([0.0, 0.5, 0.98]))
def test_mine_equals_brute_force(seed, n, threshold):
    rng = np.random.default_rng(seed)
    m = unit_rows(rng, n, 3)
    if n > 3:
        m[1] = m[0]  # exact score ties
    ids = [f"c{k:03d}" for k in rng.permutation(n)]
    q = unit_rows(rng, 1, 3)[0]
    excl = {i for i in ids if rng.random() < 0.3}
    want = brute_force(q, ids, m, excl, threshold)
    if want[0] is None:
        with pytest.raises(Exhausted):
            mine(q, build_index(ids, m), excl, threshold)
    else:
        got = mine(q, build_index(ids, m), excl, threshold)
        assert got[0] == want[0]
        assert got[1] == pytest.approx(want[1], abs=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_mine_invariant_to_index_order(seed):
    rng = np.random.default_rng(seed)
    m = unit_rows(rng, 12, 2)
    m[5] = m[2]
    ids = [f"c{k}" for k in range(12)]
    q = unit_rows(rng, 1, 2)[0]
    perm = rng.permutation(12)
    a = mine(q, build_index(ids, m), {"c0"})
    b = mine(q, build_index([ids[k] for k in perm], m[perm]), {"c0"})
    assert a[0] == b[0]


class FixedMiner:
    """Miner stub returning hand-made embeddings keyed by text."""

    name = "fixed"

    def __init__(self, vectors):
        self.vectors = vectors

    def fit(self, codes):
        self._codes = np.array([self.vectors[c] for c in codes])
        return self

    def scores(self, queries):
        return np.array([self.vectors[q] for q in queries]) @ self._codes.T


def pair(pid, query, code):
    return BimodalPair(pid, "python", query, code)


def test_perfect_model_mines_runner_up():
    angles = {"a": 0.0, "b": 0.3, "c": 1.0, "d": 2.0}
    vectors = {}
    for k, a in angles.items():
        vectors[f"q{k}"] = vectors[f"code {k}"] = np.array([np.cos(a), np.sin(a)])
    pairs = [pair(k, f"q{k}", f"code {k}") for k in angles]
    hn = mine_all(pairs, FixedMiner(vectors), near_dup_threshold=0.0)
    assert hn.as_dict() == {"a": "b", "b": "a", "c": "b", "d": "c"}
    for pid, (cid, score) in hn.entries.items():
        assert score == pytest.approx(np.cos(angles[pid] - angles[cid]))


def test_single_pair_is_skipped_with_warning(caplog):
    hn = mine_all([pair("only", "q", "code")], FixedMiner({"q": np.array([1.0]), "code": np.array([1.0])}))
    assert len(hn) == 0 and hn.skipped == ["only"]
    assert "only" in caplog.text


def test_same_normalised_code_is_never_mined():
    v = {"q1": np.array([1.0, 0.0]), "q2": np.array([0.0, 1.0]), "q3": np.array([0.6, 0.8]),
         "def f(x):\n    return x": np.array([1.0, 0.0]),
         "def f(x):\n\n    return x   ": np.array([0.8, 0.6]),
         "def g():\n    pass": np.array([0.0, 1.0])}
    pairs = [pair("p1", "q1", "def f(x):\n    return x"), pair("p2", "q2", "def g():\n    pass"),
             pair("p3", "q3", "def f(x):\n\n    return x   ")]
    assert code_key(pairs[0].code) == code_key(pairs[2].code)
    hn = mine_all(pairs, FixedMiner(v), near_dup_threshold=0.0)
    assert hn.as_dict()["p1"] == "p2"
    assert hn.as_dict()["p3"] == "p2"


@given(st.integers(0, 2**32 - 1))
def test_mine_all_invariants(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 25))
    codes = [f"code {int(k)}" for k in rng.integers(0, max(2, n // 2), size=n)]
    vectors = {}
    for k, c in enumerate(codes):
        vectors.setdefault(c, unit_rows(rng, 1, 3)[0])
        vectors[f"q{k}"] = unit_rows(rng, 1, 3)[0]
    pairs = [pair(f"id{k:02d}", f"q{k}", c) for k, c in enumerate(codes)]
    hn = mine_all(pairs, FixedMiner(vectors), near_dup_threshold=0.9)
    by_id = {p.id: p for p in pairs}
    for pid, (cid, _) in hn.entries.items():
        assert cid != pid and cid in by_id
        assert code_key(by_id[cid].code) != code_key(by_id[pid].code)
    assert set(hn.entries) | set(hn.skipped) == set(by_id)
    shuffled = [pairs[k] for k in rng.permutation(n)]
    assert mine_all(shuffled, FixedMiner(vectors), near_dup_threshold=0.9).entries == hn.entries


def test_mine_all_thread_independent():
    rng = np.random.default_rng(1)
    vectors, pairs = {}, []
    for k in range(40):
        vectors[f"q{k}"], vectors[f"c{k}"] = unit_rows(rng, 2, 4)
        pairs.append(pair(f"p{k:02d}", f"q{k}", f"c{k}"))
    a = mine_all(pairs, FixedMiner(vectors), threads=1)
    b = mine_all(pairs, FixedMiner(vectors), threads=4, chunk=7)
    assert a.entries == b.entries


def test_map_round_trip(tmp_path):
    hn = HardNegativeMap("tfidf", {"b": ("c", 0.25), "a": ("b", 0.5000000000000001)})
    path = tmp_path / "hn.jsonl"
    hn.save(path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith('{"pair_id": "a"')
    back = HardNegativeMap.load(path)
    assert back.entries == hn.entries and back.miner == "tfidf"


def test_tfidf_miner_prefers_shared_tokens():
    pairs = [pair("p1", "parse the invoice total", "def parse_invoice(total):\n    x = 1\n    return total"),
             pair("p2", "invoice total parser helper", "def invoice_total(parse):\n    y = 2\n    return parse"),
             pair("p3", "render a chart", "def chart():\n    draw()\n    return None")]
    hn = mine_all(pairs, TfidfMiner(), near_dup_threshold=0.0)
    assert hn.miner == "tfidf"
    assert hn.as_dict()["p1"] == "p2"
    m = TfidfMiner().fit([p.code for p in pairs])
    s = m.scores(["invoice"])
    assert s.shape == (1, 3) and s[0, 2] == 0.0
