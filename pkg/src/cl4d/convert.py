"""Best-effort converters from public benchmark dumps to the evaluation JSONL schemas.

Search: ``queries.jsonl`` rows ``{query, gold_id, language}`` plus ``pool.jsonl`` rows
``{id, code, language}``. Clone: ``clone.jsonl`` rows ``{id, code, label}``.

Supported inputs are the CodeXGLUE releases: CodeSearchNet (``code``,
``docstring``/``docstring_tokens``, ``url``), CoSQA (``idx``, ``doc``, ``code``,
``label``) and POJ-104 (``index``, ``code``, ``label``). Files may be JSON Lines
or a single JSON array.
"""

from __future__ import annotations

import json
import os

from .corpus import derive_query
from .errors import DataError

FORMATS = ("csn", "cosqa", "poj104")


def read_records(path) -> list:
    with open(path, encoding="utf-8") as f:
        text = f.read()
    if text.lstrip().startswith("["):
        return json.loads(text)
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def _unique(ids):
    seen = set()
    for i in ids:
        if i in seen:
            raise DataError(f"duplicate id {i!r} in input")
        seen.add(i)


def csn_to_search(records, language: str = ""):
    queries, pool = [], []
    for k, r in enumerate(records):
        lang = r.get("language", language)
        cid = str(r.get("url") or f"{lang}:{r.get('func_name', '')}:{k}")
        if r.get("docstring_tokens"):
            query = " ".join(r["docstring_tokens"])
        else:
            query = derive_query(r.get("docstring", "")) or ""
        code = r.get("code") or r.get("original_string", "")
        pool.append({"id": cid, "code": code, "language": lang})
        if query.strip():
            queries.append({"query": query, "gold_id": cid, "language": lang})
    _unique(p["id"] for p in pool)
    return queries, pool


def cosqa_to_search(records):
    """Queries are the positively labelled rows; every distinct code forms the pool."""
    queries, pool, by_code = [], [], {}
    for r in records:
        code = r["code"]
        if code not in by_code:
            by_code[code] = str(r["idx"])
            pool.append({"id": by_code[code], "code": code, "language": "python"})
        if int(r.get("label", 1)) == 1:
            queries.append({"query": r["doc"], "gold_id": by_code[code], "language": "python"})
    return queries, pool


def poj104_to_clone(records):
    items = [{"id": str(r["index"]), "code": r["code"], "label": str(r["label"])} for r in records]
    _unique(i["id"] for i in items)
    return items


def _write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False) + "\n")


def convert(fmt: str, in_path, out_dir, language: str = "") -> dict:
    """Write the converted files into ``out_dir``; returns ``{file name: row count}``."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {', '.join(FORMATS)}")
    try:
        records = read_records(in_path)
        if fmt == "poj104":
            items = poj104_to_clone(records)
        elif fmt == "csn":
            queries, pool = csn_to_search(records, language)
        else:
            queries, pool = cosqa_to_search(records)
    except json.JSONDecodeError as exc:
        raise DataError(f"{in_path}: not JSON or JSON Lines ({exc})") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{in_path}: record does not match the {fmt} layout ({exc!r})") from None
    os.makedirs(out_dir, exist_ok=True)
    if fmt == "poj104":
        _write_jsonl(os.path.join(out_dir, "clone.jsonl"), items)
        return {"clone.jsonl": len(items)}
    _write_jsonl(os.path.join(out_dir, "queries.jsonl"), queries)
    _write_jsonl(os.path.join(out_dir, "pool.jsonl"), pool)
    return {"queries.jsonl": len(queries), "pool.jsonl": len(pool)}
