"""Bimodal (query, code) corpus construction: extraction, filtering, dedup, split."""

from __future__ import annotations

import ast
import hashlib
import json
import logging
import math
import os
import random
import re
import textwrap
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

from .errors import ParseFailure, RatioError

log = logging.getLogger(__name__)

LANGUAGES = ("python", "java", "go", "php", "javascript", "ruby")

SUFFIXES = {
    "python": (".py",),
    "java": (".java",),
    "go": (".go",),
    "php": (".php",),
    "javascript": (".js", ".mjs", ".cjs"),
    "ruby": (".rb",),
}


@dataclass(frozen=True)
class SourceFunction:
    language: str
    repo: str
    path: str
    name: str
    code_text: str
    docstring: str
    start_line: int
    end_line: int

    def __post_init__(self):
        if self.language not in LANGUAGES:
            raise ValueError(f"unsupported language {self.language!r}")
        if not 1 <= self.start_line <= self.end_line:
            raise ValueError(f"bad line span {self.start_line}..{self.end_line}")
        if not self.code_text:
            raise ValueError("code_text must be non-empty")


def pair_id(language: str, query: str, code: str) -> str:
    h = hashlib.sha256()
    h.update(language.encode("utf-8"))
    h.update(b"\x00")
    h.update(query.encode("utf-8"))
    h.update(b"\x00")
    h.update(code.encode("utf-8"))
    return h.hexdigest()


@dataclass(frozen=True)
class BimodalPair:
    id: str
    language: str
    query: str
    code: str
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    @classmethod
    def make(cls, language, query, code, meta=None) -> "BimodalPair":
        if not query or "\n" in query:
            raise ValueError("query must be a non-empty single line")
        if not code:
            raise ValueError("code must be non-empty")
        return cls(pair_id(language, query, code), language, query, code, dict(meta or {}))

    def to_json(self) -> str:
        obj = {"id": self.id, "language": self.language, "query": self.query, "code": self.code,
               "meta": {k: self.meta[k] for k in sorted(self.meta)}}
        return json.dumps(obj, ensure_ascii=False)

    @classmethod
    def from_dict(cls, obj: dict) -> "BimodalPair":
        return cls(obj["id"], obj["language"], obj["query"], obj["code"], dict(obj.get("meta", {})))


def read_pairs(path) -> list[BimodalPair]:
    with open(path, encoding="utf-8") as f:
        return [BimodalPair.from_dict(json.loads(line)) for line in f if line.strip()]


def write_pairs(path, pairs: Iterable[BimodalPair]):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for p in pairs:
            f.write(p.to_json())
            f.write("\n")


# ---------------------------------------------------------------- queries

_LEAD = re.compile(r'^(?:/\*\*+|/\*|\*/|//+|#+|\*+|"""|\'\'\'|"+|\'+|\s)+')
_TRAIL = re.compile(r'(?:\*+/|"""|\'\'\'|"+|\'+|\s)+$')


def _strip_delimiters(line: str) -> str:
    line = _LEAD.sub("", line)
    line = _TRAIL.sub("", line)
    return line.strip()


def derive_query(docstring: str) -> str | None:
    """First non-empty docstring line with quote runs and comment sigils removed."""
    if not docstring:
        return None
    for line in docstring.splitlines():
        text = _strip_delimiters(line)
        if text:
            return text
    return None


# ---------------------------------------------------------------- extraction


_NEWLINE = re.compile(r"\r\n|\r|\n")


def _python_functions(text: str, path: str, repo: str) -> list[SourceFunction]:
    try:
        tree = ast.parse(text)
    except (SyntaxError, ValueError) as exc:
        raise ParseFailure(path, f"{type(exc).__name__}: {exc}") from None
    # the parser counts only \r\n, \r and \n as line breaks (not form feeds etc.)
    lines = _NEWLINE.split(text)
    nodes = [n for n in ast.walk(tree) if isinstance(n, (ast.FunctionDef, ast.AsyncFunctionDef))]
    nodes.sort(key=lambda n: (n.lineno, n.col_offset))
    out = []
    for node in nodes:
        docstring = ast.get_docstring(node, clean=False) or ""
        doc_node = node.body[0] if docstring else None
        code = _cut_python_docstring(lines, node, doc_node)
        out.append(SourceFunction("python", repo, path, node.name, code, docstring, node.lineno, node.end_lineno))
    return out


def _byte_col_to_char(line: str, col: int) -> int:
    return len(line.encode("utf-8")[:col].decode("utf-8", errors="ignore"))


def _cut_python_docstring(lines, node, doc_node) -> str:
    body = lines[node.lineno - 1: node.end_lineno]
    if doc_node is not None:
        s, e = doc_node.lineno - node.lineno, doc_node.end_lineno - node.lineno
        head = body[s][: _byte_col_to_char(body[s], doc_node.col_offset)]
        tail = body[e][_byte_col_to_char(body[e], doc_node.end_col_offset):]
        if not head.strip() and not tail.strip():
            body = body[:s] + body[e + 1:]
        else:
            rest = tail.lstrip()
            if rest.startswith(";"):
                rest = rest[1:].lstrip()
            if not head.strip():
                joined = head + rest
            else:
                joined = head.rstrip() + (" " + rest if rest else "")
            body = body[:s] + [joined] + body[e + 1:]
    return textwrap.dedent("\n".join(body)).strip("\n")


class PythonExtractor:
    """Built-in Python extractor on top of the stdlib parser; no grammar needed."""

    language = "python"

    def extract(self, file_text: str, path: str = "<string>", repo: str = "") -> list[SourceFunction]:
        return _python_functions(file_text, path, repo)


_EXTRACTORS: dict = {"python": PythonExtractor()}


def register_extractor(language: str, extractor):
    """Plug a backend exposing ``extract(file_text, path, repo)`` in for ``language``."""
    if language not in LANGUAGES:
        raise ValueError(f"unsupported language {language!r}")
    _EXTRACTORS[language] = extractor


def get_extractor(language: str, backend: str = "auto"):
    if language not in LANGUAGES:
        raise ValueError(f"unsupported language {language!r}")
    if backend == "builtin" or (backend == "auto" and language in _EXTRACTORS):
        if language not in _EXTRACTORS:
            raise ValueError(f"no built-in extractor for {language}")
        return _EXTRACTORS[language]
    from .extractors import TreeSitterExtractor

    return TreeSitterExtractor(language)


def extract_functions(file_text: str, language: str, path: str = "<string>", repo: str = "", backend: str = "auto") -> list[SourceFunction]:
    """All named functions and methods (nested included) in source order.

    Raises ParseFailure for files the parser rejects; callers that walk a tree
    log it and move on.
    """
    return get_extractor(language, backend).extract(file_text, path, repo)


def functions_to_pairs(functions: Iterable[SourceFunction]) -> list[BimodalPair]:
    pairs = []
    for fn in functions:
        query = derive_query(fn.docstring)
        if query is None:
            continue
        pairs.append(BimodalPair.make(fn.language, query, fn.code_text, {"repo": fn.repo, "path": fn.path, "name": fn.name}))
    return pairs


@dataclass
class ExtractionReport:
    files: int = 0
    functions: int = 0
    without_docstring: int = 0
    pairs: int = 0
    failures: list = field(default_factory=list)

    def to_dict(self):
        return {"files": self.files, "functions": self.functions, "without_docstring": self.without_docstring,
                "pairs": self.pairs, "parse_failures": [{"path": p, "reason": r} for p, r in self.failures]}


def source_files(root, language: str) -> list[str]:
    """Relative POSIX paths of ``language`` files under ``root``, sorted."""
    found = []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        for name in filenames:
            if name.endswith(SUFFIXES[language]):
                rel = os.path.relpath(os.path.join(dirpath, name), root)
                found.append(rel.replace(os.sep, "/"))
    return sorted(found)


def extract_tree(root, language: str, repo: str = "", threads: int = 1, backend: str = "auto"):
    """Extract pairs from every matching file under ``root``.

    Files are processed in parallel but merged in sorted path order.
    Returns ``(pairs, ExtractionReport)``.
    """
    extractor = get_extractor(language, backend)
    paths = source_files(root, language)
    repo = repo or os.path.basename(os.path.abspath(root))

    def work(rel):
        with open(os.path.join(root, rel), "rb") as f:
            raw = f.read()
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            return rel, None, f"not UTF-8: {exc}"
        try:
            return rel, extractor.extract(text, rel, repo), None
        except ParseFailure as exc:
            return rel, None, exc.reason

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(work, paths))
    else:
        results = [work(p) for p in paths]

    report = ExtractionReport(files=len(paths))
    pairs = []
    for rel, fns, err in results:
        if err is not None:
            log.warning("skipping %s: %s", rel, err)
            report.failures.append((rel, err))
            continue
        report.functions += len(fns)
        got = functions_to_pairs(fns)
        report.without_docstring += len(fns) - len(got)
        pairs.extend(got)
    report.pairs = len(pairs)
    return pairs, report


# ---------------------------------------------------------------- filtering

RULES = ("non-english", "short-query", "short-code", "long-code", "test-name", "constructor", "query-in-code")
CONSTRUCTOR_NAMES = frozenset({"__init__", "constructor", "__construct", "initialize"})


@dataclass(frozen=True)
class FilterConfig:
    min_query_tokens: int = 3
    min_code_lines: int = 3
    max_code_chars: int = 4096
    max_non_ascii_ratio: float = 0.5
    reject_test_names: bool = True
    reject_constructors: bool = True
    reject_query_in_code: bool = True


@dataclass
class FilterReport:
    input: int = 0
    kept: int = 0
    rejected: dict = field(default_factory=lambda: {r: 0 for r in RULES})

    def to_dict(self):
        return {"input": self.input, "kept": self.kept, "rejected": {r: self.rejected[r] for r in RULES}}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def non_ascii_ratio(text: str) -> float:
    chars = [c for c in text if not c.isspace()]
    if not chars:
        return 0.0
    return sum(ord(c) > 127 for c in chars) / len(chars)


def first_failing_rule(pair: BimodalPair, cfg: FilterConfig) -> str | None:
    name = pair.meta.get("name", "")
    if non_ascii_ratio(pair.query) > cfg.max_non_ascii_ratio:
        return "non-english"
    if len(pair.query.split()) < cfg.min_query_tokens:
        return "short-query"
    if sum(1 for line in pair.code.splitlines() if line.strip()) < cfg.min_code_lines:
        return "short-code"
    if len(pair.code) > cfg.max_code_chars:
        return "long-code"
    if cfg.reject_test_names and (name.startswith("test") or name.startswith("Test")):
        return "test-name"
    if cfg.reject_constructors and name in CONSTRUCTOR_NAMES:
        return "constructor"
    if cfg.reject_query_in_code and pair.query in pair.code:
        return "query-in-code"
    return None


def filter_pairs(pairs: Iterable[BimodalPair], rules: FilterConfig | None = None):
    """Keep pairs passing every rule; each rejection is charged to the first failing rule."""
    rules = rules or FilterConfig()
    report = FilterReport()
    kept = []
    for p in pairs:
        report.input += 1
        failed = first_failing_rule(p, rules)
        if failed is None:
            kept.append(p)
        else:
            report.rejected[failed] += 1
    report.kept = len(kept)
    return kept, report


# ---------------------------------------------------------------- dedup / split


def normalize_code(code: str) -> str:
    return " ".join(code.lower().split())


def code_key(code: str) -> str:
    return hashlib.sha256(normalize_code(code).encode("utf-8")).hexdigest()


def dedup(pairs: Iterable[BimodalPair]) -> list[BimodalPair]:
    """Drop pairs whose whitespace-collapsed, lowercased code was seen earlier."""
    seen = set()
    out = []
    for p in pairs:
        key = code_key(p.code)
        if key not in seen:
            seen.add(key)
            out.append(p)
    return out


def split_sizes(n: int, ratios) -> list[int]:
    ratios = [float(r) for r in ratios]
    if len(ratios) != 3 or any(not r > 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise RatioError(f"ratios must be three positive numbers summing to 1, got {ratios}")
    exact = [r * n for r in ratios]
    sizes = [math.floor(x + 1e-9) for x in exact]
    rest = n - sum(sizes)
    # largest fractional remainder first, earlier split on ties
    order = sorted(range(3), key=lambda i: (-(exact[i] - sizes[i]), i))
    for i in order[:rest]:
        sizes[i] += 1
    return sizes


def split(pairs, ratios=(0.8, 0.1, 0.1), seed: int = 0):
    """Seeded shuffle, then floor-then-distribute sizes. Returns (train, valid, test)."""
    pairs = list(pairs)
    sizes = split_sizes(len(pairs), ratios)
    order = list(range(len(pairs)))
    random.Random(seed).shuffle(order)
    a, b = sizes[0], sizes[0] + sizes[1]
    return ([pairs[i] for i in order[:a]], [pairs[i] for i in order[a:b]], [pairs[i] for i in order[b:]])
