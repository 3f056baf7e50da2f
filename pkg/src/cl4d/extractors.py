"""Grammar-backed function extraction via tree-sitter (optional dependency).

Install the ``grammars`` extra to enable Java, Go, PHP, JavaScript and Ruby;
Python has a built-in extractor and can also be parsed here for cross-checks.
"""

from __future__ import annotations

import importlib
import textwrap

from .corpus import SourceFunction
from .errors import ParseFailure

_GRAMMARS = {
    "python": ("tree_sitter_python", "language"),
    "java": ("tree_sitter_java", "language"),
    "go": ("tree_sitter_go", "language"),
    "php": ("tree_sitter_php", "language_php"),
    "javascript": ("tree_sitter_javascript", "language"),
    "ruby": ("tree_sitter_ruby", "language"),
}

FUNCTION_NODES = {
    "python": {"function_definition"},
    "java": {"method_declaration", "constructor_declaration"},
    "go": {"function_declaration", "method_declaration"},
    "php": {"function_definition", "method_declaration"},
    "javascript": {"function_declaration", "generator_function_declaration", "method_definition",
                   "function_expression", "function", "arrow_function", "generator_function"},
    "ruby": {"method", "singleton_method"},
}

COMMENT_NODES = {"comment", "block_comment", "line_comment"}
_JS_DECLS = {"lexical_declaration", "variable_declaration"}


def grammar_available(language: str) -> bool:
    try:
        _load_language(language)
        return True
    except ImportError:
        return False


def _load_language(language: str):
    import tree_sitter

    module, attr = _GRAMMARS[language]
    return tree_sitter.Language(getattr(importlib.import_module(module), attr)())


def _text(node) -> str:
    return node.text.decode("utf-8", errors="replace")


class TreeSitterExtractor:
    def __init__(self, language: str):
        if language not in _GRAMMARS:
            raise ValueError(f"unsupported language {language!r}")
        try:
            import tree_sitter

            self._parser = tree_sitter.Parser(_load_language(language))
        except ImportError as exc:
            raise ImportError(f"tree-sitter grammar for {language} is not installed ({exc}); "
                              "install the 'grammars' extra") from None
        self.language = language

    def extract(self, file_text: str, path: str = "<string>", repo: str = "") -> list[SourceFunction]:
        src = file_text.encode("utf-8")
        tree = self._parser.parse(src)
        root = tree.root_node
        if root.has_error:
            raise ParseFailure(path, "syntax error reported by the grammar")
        found = []
        stack = [root]
        while stack:
            node = stack.pop()
            if node.type in FUNCTION_NODES[self.language]:
                fn = self._function(node, src, path, repo)
                if fn is not None:
                    found.append((node.start_byte, fn))
            stack.extend(reversed(node.children))
        found.sort(key=lambda x: x[0])
        return [fn for _, fn in found]

    def _function(self, node, src: bytes, path: str, repo: str):
        name_node = node.child_by_field_name("name")
        code_node = node
        anchor = node
        if self.language == "javascript" and name_node is None:
            parent = node.parent
            if parent is not None and parent.type == "variable_declarator":
                name_node = parent.child_by_field_name("name")
                if parent.parent is not None and parent.parent.type in _JS_DECLS:
                    code_node = anchor = parent.parent
            elif parent is not None and parent.type == "pair":
                name_node = parent.child_by_field_name("key")
        if name_node is None:
            return None
        parent = anchor.parent
        if parent is not None and parent.type in ("export_statement", "decorated_definition"):
            anchor = parent

        if self.language == "python":
            docstring, doc_node = self._python_docstring(node)
        else:
            docstring, doc_node = self._leading_comment(anchor), None
        code = _node_code(code_node, src, doc_node)
        if not code.strip():
            return None
        return SourceFunction(self.language, repo, path, _text(name_node), code, docstring,
                              code_node.start_point[0] + 1, code_node.end_point[0] + 1)

    @staticmethod
    def _python_docstring(node):
        body = node.child_by_field_name("body")
        if body is None or not body.named_children:
            return "", None
        first = body.named_children[0]
        if first.type != "expression_statement" or len(first.named_children) != 1:
            return "", None
        string = first.named_children[0]
        if string.type != "string":
            return "", None
        content = "".join(_text(c) for c in string.named_children if c.type == "string_content")
        return content, first

    @staticmethod
    def _leading_comment(anchor) -> str:
        # a wrapper that starts exactly where the function does (Ruby's body_statement)
        # puts the comment one level up
        while anchor.prev_named_sibling is None and anchor.parent is not None \
                and anchor.parent.start_byte == anchor.start_byte and anchor.parent.parent is not None:
            anchor = anchor.parent
        parts = []
        nxt = anchor
        prev = anchor.prev_named_sibling
        while prev is not None and prev.type in COMMENT_NODES and prev.end_point[0] >= nxt.start_point[0] - 1:
            parts.append(_text(prev))
            nxt = prev
            prev = prev.prev_named_sibling
        return "\n".join(reversed(parts))


def _node_code(node, src: bytes, cut=None) -> str:
    """Source of ``node`` with ``cut`` (a docstring statement) removed, dedented."""
    line_start_byte = src.rfind(b"\n", 0, node.start_byte) + 1
    lead = src[line_start_byte:node.start_byte].decode("utf-8", errors="replace")
    if lead.strip():
        lead = " " * len(lead)
    if cut is None:
        text = src[node.start_byte:node.end_byte].decode("utf-8", errors="replace")
    else:
        before = src[node.start_byte:cut.start_byte].decode("utf-8", errors="replace")
        after = src[cut.end_byte:node.end_byte].decode("utf-8", errors="replace")
        head, sep, line_start = before.rpartition("\n")
        line_end, nl, tail = after.partition("\n")
        if not line_start.strip() and not line_end.strip():
            text = head + ("\n" + tail if nl else "")
        else:
            rest = line_end.lstrip()
            if rest.startswith(";"):
                rest = rest[1:].lstrip()
            if not line_start.strip():
                line = line_start + rest
            else:
                line = line_start.rstrip() + (" " + rest if rest else "")
            text = head + sep + line + ("\n" + tail if nl else "")
    return textwrap.dedent(lead + text).strip("\n")
