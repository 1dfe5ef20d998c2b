"""Code-snippet corpus ingestion, filtering, and JSONL persistence.

A corpus file holds one JSON object per line with fields
``{id, source, lang, origin}``; ``lang`` and ``origin`` may be absent.
Malformed lines are collected into a reject list rather than aborting
the whole ingest, because scraped corpora are dirty and partial
progress is useful.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence, Union


class LangLabel(Enum):
    """Programming-language labels; enum order is the fixed tie-break order."""

    C = "c"
    CPP = "cpp"
    PYTHON = "python"
    OBJECTIVE_C = "objective-c"
    ASSEMBLY = "assembly"
    JAVA = "java"
    GO = "go"
    CSHARP = "csharp"
    RUBY = "ruby"
    R = "r"
    UNKNOWN = "unknown"

    @classmethod
    def from_wire(cls, value: str) -> "LangLabel":
        try:
            return cls(value)
        except ValueError:
            raise ValueError(f"unrecognized lang string: {value!r}") from None

    @property
    def display_name(self) -> str:
        return _DISPLAY_NAMES[self]


_DISPLAY_NAMES = {
    LangLabel.C: "C",
    LangLabel.CPP: "C++",
    LangLabel.PYTHON: "Python",
    LangLabel.OBJECTIVE_C: "Objective-C",
    LangLabel.ASSEMBLY: "Assembly",
    LangLabel.JAVA: "Java",
    LangLabel.GO: "Go",
    LangLabel.CSHARP: "C#",
    LangLabel.RUBY: "Ruby",
    LangLabel.R: "R",
    LangLabel.UNKNOWN: "Unknown",
}

#: Labels that can be ordered compared by their position in the enum.
LABEL_ORDER = {label: i for i, label in enumerate(LangLabel)}


def approx_token_count(source: str) -> int:
    """Deterministic token estimate: ceil(byte length / 4).

    A fixed byte heuristic keeps length filtering model-independent; no
    real tokenizer is consulted.
    """
    return math.ceil(len(source.encode("utf-8")) / 4)


@dataclass(frozen=True)
class CodeSnippet:
    """One corpus entry. Immutable and safe to share across threads."""

    id: str
    source: str
    claimed_lang: LangLabel = LangLabel.UNKNOWN
    origin: str = ""

    def __post_init__(self):
        if not self.id:
            raise ValueError("snippet id must be non-empty")

    @property
    def approx_tokens(self) -> int:
        return approx_token_count(self.source)

    def to_record(self) -> dict:
        record: dict = {"id": self.id, "source": self.source}
        if self.claimed_lang is not LangLabel.UNKNOWN:
            record["lang"] = self.claimed_lang.value
        if self.origin:
            record["origin"] = self.origin
        return record


@dataclass(frozen=True)
class MalformedRecord:
    """A corpus line that could not be turned into a snippet."""

    line_number: int
    reason: str

    def describe(self) -> str:
        return f"line {self.line_number}: {self.reason}"


@dataclass(frozen=True)
class DuplicateId:
    """A corpus line whose id collides with an earlier record."""

    id: str
    line_number: int

    @property
    def reason(self) -> str:
        return f"duplicate id {self.id!r}"

    def describe(self) -> str:
        return f"line {self.line_number}: {self.reason}"


RecordError = Union[MalformedRecord, DuplicateId]


@dataclass
class LoadResult:
    snippets: list[CodeSnippet] = field(default_factory=list)
    rejects: list[RecordError] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.rejects


def _snippet_from_obj(obj: object, line_number: int) -> CodeSnippet:
    if not isinstance(obj, dict):
        raise ValueError("record is not a JSON object")
    snippet_id = obj.get("id")
    if not isinstance(snippet_id, str) or not snippet_id:
        raise ValueError("missing or empty 'id' field")
    source = obj.get("source")
    if not isinstance(source, str):
        raise ValueError("missing 'source' field")
    lang_value = obj.get("lang")
    if lang_value is None:
        lang = LangLabel.UNKNOWN
    elif isinstance(lang_value, str):
        lang = LangLabel.from_wire(lang_value)
    else:
        raise ValueError("'lang' must be a string")
    origin = obj.get("origin", "")
    if not isinstance(origin, str):
        raise ValueError("'origin' must be a string")
    return CodeSnippet(id=snippet_id, source=source, claimed_lang=lang, origin=origin)


def load_corpus(path: str | Path) -> LoadResult:
    """Stream a JSONL corpus file into snippets plus a reject list.

    Records are returned in file order. Blank lines are skipped. Lines
    that are not valid UTF-8, not valid JSON, or fail field validation
    become ``MalformedRecord`` entries; id collisions become
    ``DuplicateId`` entries. Raises ``FileNotFoundError`` when the file
    does not exist.
    """
    path = Path(path)
    result = LoadResult()
    seen: set[str] = set()
    with open(path, "rb") as handle:
        for line_number, raw in enumerate(handle, start=1):
            raw = raw.rstrip(b"\r\n")
            if not raw.strip():
                continue
            try:
                text = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                result.rejects.append(MalformedRecord(line_number, f"invalid UTF-8: {exc}"))
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                result.rejects.append(MalformedRecord(line_number, f"invalid JSON: {exc.msg}"))
                continue
            try:
                snippet = _snippet_from_obj(obj, line_number)
            except ValueError as exc:
                result.rejects.append(MalformedRecord(line_number, str(exc)))
                continue
            if snippet.id in seen:
                result.rejects.append(DuplicateId(snippet.id, line_number))
                continue
            seen.add(snippet.id)
            result.snippets.append(snippet)
    return result


def write_corpus(snippets: Iterable[CodeSnippet], path: str | Path) -> int:
    """Write snippets as one JSON object per line; returns the record count."""
    path = Path(path)
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for snippet in snippets:
            handle.write(json.dumps(snippet.to_record(), ensure_ascii=False))
            handle.write("\n")
            count += 1
    return count


def filter_by_length(
    snippets: Sequence[CodeSnippet], max_tokens: int
) -> tuple[list[CodeSnippet], list[CodeSnippet]]:
    """Partition snippets into (kept, dropped) by the approx-token limit.

    Total function: every input snippet lands in exactly one partition,
    order preserved within each.
    """
    if max_tokens <= 0:
        raise ValueError("max_tokens must be positive")
    kept: list[CodeSnippet] = []
    dropped: list[CodeSnippet] = []
    for snippet in snippets:
        if snippet.approx_tokens <= max_tokens:
            kept.append(snippet)
        else:
            dropped.append(snippet)
    return kept, dropped
