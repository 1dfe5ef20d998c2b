"""Seeded, reversible single-error injection via AST-guided span deletion.

Each mutation deletes exactly one contiguous byte span located through
the clang AST: an initializer clause, a user-defined type definition, a
binary operator token, or one parenthesis. Deleting raw spans (instead
of rewriting the tree and re-printing) preserves every untouched byte,
so reinserting the removed text reproduces the original exactly.

Deletions are not guaranteed to break compilation (dropping the
initializer of a later-assigned variable is legal C), so every
candidate is post-checked with the compile oracle and reselection
continues with further seeded draws until one breaks or the attempt
budget runs out.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from clang import cindex

from .compiledrv import CompilerConfig, compile_check
from .corpus import LangLabel
from .errors import ParseFailure, SpanMismatch

MAX_ATTEMPTS = 20

_BINARY_OPERATORS = {
    "+", "-", "*", "/", "%", "=", "<", ">", "<=", ">=", "==", "!=",
    "&&", "||", "&", "|", "^", "<<", ">>",
}

_TYPE_DECL_KINDS = {
    cindex.CursorKind.TYPEDEF_DECL,
    cindex.CursorKind.TYPE_ALIAS_DECL,
    cindex.CursorKind.STRUCT_DECL,
    cindex.CursorKind.UNION_DECL,
    cindex.CursorKind.ENUM_DECL,
    cindex.CursorKind.CLASS_DECL,
}


class MutationKind(Enum):
    DROP_VAR_INIT = "init"
    DROP_TYPEDEF = "typedef"
    DROP_OPERATOR = "op"
    DROP_PAREN = "paren"


def _dedupe(spans: list["NodeSpan"]) -> list["NodeSpan"]:
    seen: set[tuple[int, int]] = set()
    unique = []
    for span in sorted(spans, key=lambda s: (s.start, s.end)):
        key = (span.start, span.end)
        if key not in seen:
            seen.add(key)
            unique.append(span)
    return unique


@dataclass(frozen=True)
class MutationRecord:
    """One applied mutation: byte span [start, end) and the removed text."""

    kind: MutationKind
    span: tuple[int, int]
    removed: str
    seed: int
    snippet_id: str = ""

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "span": list(self.span),
            "removed": self.removed,
            "seed": self.seed,
            "snippet_id": self.snippet_id,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MutationRecord":
        return cls(
            kind=MutationKind(data["kind"]),
            span=(data["span"][0], data["span"][1]),
            removed=data["removed"],
            seed=data["seed"],
            snippet_id=data.get("snippet_id", ""),
        )


@dataclass(frozen=True)
class NodeSpan:
    """A queryable AST node class mapped to its byte span in the source."""

    node_class: str
    start: int
    end: int
    detail: str = ""


class SourceTree:
    """Parsed snippet with byte-span queries for the mutable node classes."""

    def __init__(self, source: str, lang: LangLabel):
        if lang not in (LangLabel.C, LangLabel.CPP):
            raise ValueError(f"AST mutation supports C and C++ only, got {lang}")
        self.source = source
        self.lang = lang
        self._bytes = source.encode("utf-8")
        filename = "snippet.c" if lang is LangLabel.C else "snippet.cpp"
        std = "gnu11" if lang is LangLabel.C else "gnu++14"
        try:
            index = cindex.Index.create()
            self._tu = index.parse(
                filename,
                args=[f"-std={std}"],
                unsaved_files=[(filename, self._bytes)],
            )
        except (cindex.TranslationUnitLoadError, cindex.LibclangError, OSError) as exc:
            raise ParseFailure(f"clang failed to parse snippet: {exc}") from exc
        if self._tu is None:
            raise ParseFailure("clang returned no translation unit")
        self._filename = filename
        self._tokens = list(self._tu.get_tokens(extent=self._tu.cursor.extent))

    def _in_main_file(self, cursor) -> bool:
        location_file = cursor.location.file
        return location_file is not None and location_file.name == self._filename

    def _walk(self):
        stack = list(self._tu.cursor.get_children())
        while stack:
            cursor = stack.pop()
            if self._in_main_file(cursor):
                yield cursor
                stack.extend(cursor.get_children())

    def text(self, start: int, end: int) -> str:
        return self._bytes[start:end].decode("utf-8")

    def identifiers(self) -> list[NodeSpan]:
        return [
            NodeSpan(
                "identifier",
                t.extent.start.offset,
                t.extent.end.offset,
                detail=t.spelling,
            )
            for t in self._tokens
            if t.kind == cindex.TokenKind.IDENTIFIER
        ]

    def initializer_spans(self) -> list[NodeSpan]:
        """Spans of ``= <expr>`` initializer clauses on variable declarations."""
        spans = []
        for cursor in self._walk():
            if cursor.kind != cindex.CursorKind.VAR_DECL:
                continue
            children = [c for c in cursor.get_children() if c.kind.is_expression()]
            if not children:
                continue
            init = children[-1]
            init_start = init.extent.start.offset
            init_end = init.extent.end.offset
            decl_start = cursor.extent.start.offset
            eq_offset = None
            for token in self._tokens:
                offset = token.extent.start.offset
                if offset < decl_start or offset >= init_start:
                    continue
                if token.kind == cindex.TokenKind.PUNCTUATION and token.spelling == "=":
                    eq_offset = offset  # keep the last '=' before the initializer
            if eq_offset is None:
                continue
            spans.append(
                NodeSpan("initializer", eq_offset, init_end, detail=cursor.spelling)
            )
        return _dedupe(spans)

    def type_definition_spans(self) -> list[NodeSpan]:
        """Spans of named user-defined type definitions, incl. trailing ';'."""
        spans = []
        for cursor in self._walk():
            if cursor.kind not in _TYPE_DECL_KINDS:
                continue
            if not cursor.is_definition() or not cursor.spelling:
                continue
            start = cursor.extent.start.offset
            end = cursor.extent.end.offset
            end = self._extend_through_semicolon(end)
            spans.append(NodeSpan("type-definition", start, end, detail=cursor.spelling))
        return _dedupe(spans)

    def binary_operator_spans(self) -> list[NodeSpan]:
        spans = []
        for cursor in self._walk():
            if cursor.kind != cindex.CursorKind.BINARY_OPERATOR:
                continue
            children = list(cursor.get_children())
            if len(children) != 2:
                continue
            left_end = children[0].extent.end.offset
            right_start = children[1].extent.start.offset
            for token in self._tokens:
                offset = token.extent.start.offset
                if offset < left_end or offset >= right_start:
                    continue
                if (
                    token.kind == cindex.TokenKind.PUNCTUATION
                    and token.spelling in _BINARY_OPERATORS
                ):
                    spans.append(
                        NodeSpan(
                            "binary-operator",
                            offset,
                            token.extent.end.offset,
                            detail=token.spelling,
                        )
                    )
                    break
        return _dedupe(spans)

    def paren_spans(self) -> list[NodeSpan]:
        return _dedupe(
            [
                NodeSpan(
                    "paren",
                    t.extent.start.offset,
                    t.extent.end.offset,
                    detail=t.spelling,
                )
                for t in self._tokens
                if t.kind == cindex.TokenKind.PUNCTUATION and t.spelling in ("(", ")")
            ]
        )

    def _extend_through_semicolon(self, end: int) -> int:
        following = [t for t in self._tokens if t.extent.start.offset >= end]
        if following:
            first = min(following, key=lambda t: t.extent.start.offset)
            if first.spelling == ";":
                return first.extent.end.offset
        return end

    def candidates(self, kind: MutationKind) -> list[NodeSpan]:
        if kind is MutationKind.DROP_VAR_INIT:
            return self.initializer_spans()
        if kind is MutationKind.DROP_TYPEDEF:
            spans = self.type_definition_spans()
            return [s for s in spans if self._name_referenced_outside(s)]
        if kind is MutationKind.DROP_OPERATOR:
            return self.binary_operator_spans()
        if kind is MutationKind.DROP_PAREN:
            return self.paren_spans()
        raise ValueError(f"unknown mutation kind: {kind}")

    def _name_referenced_outside(self, span: NodeSpan) -> bool:
        remainder = self.text(0, span.start) + self.text(span.end, len(self._bytes))
        return re.search(rf"\b{re.escape(span.detail)}\b", remainder) is not None


def build_ast(source: str, lang: LangLabel) -> SourceTree:
    """Parse a (compilable) snippet into a span-queryable syntax tree."""
    return SourceTree(source, lang)


def _delete_span(source_bytes: bytes, start: int, end: int) -> str:
    return (source_bytes[:start] + source_bytes[end:]).decode("utf-8")


def inject_error(
    source: str,
    lang: LangLabel,
    kind: MutationKind,
    seed: int,
    snippet_id: str = "",
    config: CompilerConfig | None = None,
    max_attempts: int = MAX_ATTEMPTS,
) -> Optional[tuple[str, MutationRecord]]:
    """Delete one seeded span of the given kind so the result no longer compiles.

    Candidates are drawn uniformly (seeded shuffle) and each deletion is
    post-checked with the compile oracle; still-compilable results are
    discarded and the next draw is tried, up to ``max_attempts``.
    Returns None when no eligible candidate exists (NotApplicable).
    ParseFailure propagates for snippets the embedded grammar rejects.
    """
    config = config or CompilerConfig()
    tree = build_ast(source, lang)
    candidates = sorted(tree.candidates(kind), key=lambda s: (s.start, s.end))
    if not candidates:
        return None
    rng = random.Random(seed)
    order = list(range(len(candidates)))
    rng.shuffle(order)
    source_bytes = source.encode("utf-8")
    for index in order[:max_attempts]:
        chosen = candidates[index]
        mutated = _delete_span(source_bytes, chosen.start, chosen.end)
        if mutated == source:
            continue
        outcome = compile_check(mutated, lang, config)
        if outcome.compilable:
            continue
        record = MutationRecord(
            kind=kind,
            span=(chosen.start, chosen.end),
            removed=tree.text(chosen.start, chosen.end),
            seed=seed,
            snippet_id=snippet_id,
        )
        return mutated, record
    return None


def verify_single_error(
    original: str,
    mutated: str,
    lang: LangLabel,
    config: CompilerConfig | None = None,
) -> bool:
    """True iff the mutated source fails to compile.

    "Single error" is enforced at the mutation level (one deleted span);
    one deletion may legitimately cascade into several diagnostics.
    """
    if mutated == original:
        return False
    return not compile_check(mutated, lang, config).compilable


def revert(mutated: str, record: MutationRecord) -> str:
    """Reinsert the removed span; byte-identical original by construction."""
    start, end = record.span
    removed_bytes = record.removed.encode("utf-8")
    if end - start != len(removed_bytes):
        raise SpanMismatch(
            f"span length {end - start} does not match removed text ({len(removed_bytes)} bytes)"
        )
    mutated_bytes = mutated.encode("utf-8")
    if start < 0 or start > len(mutated_bytes):
        raise SpanMismatch(f"span start {start} outside mutated source of {len(mutated_bytes)} bytes")
    return (mutated_bytes[:start] + removed_bytes + mutated_bytes[start:]).decode("utf-8")
