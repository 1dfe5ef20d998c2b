"""Compiler-guided iterative repair: one error per prompt, recompile per pass.

The loop compiles, freezes the Error-severity diagnostic list, asks the
fixer about each diagnostic in order against the current working code
(no recompile between fixes), then recompiles once the list is
exhausted. Success ends the loop; new errors start the next outer
iteration; the iteration cap K bounds the whole process so it can never
run unbounded. K counts compile cycles, not prompts.

Fixer backends are pluggable: an HTTP model service, a deterministic
rule engine usable offline, and a cheating oracle used only to validate
the harness.
"""

from __future__ import annotations

import os
import re
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence

from .backend import ModelBackend
from .compiledrv import (
    CompileOutcome,
    CompilerConfig,
    Diagnostic,
    Severity,
    compile_check,
)
from .corpus import CodeSnippet, LangLabel
from .errors import FixerError, NoCodeFound

DEFAULT_MAX_ITERATIONS = 3
MAX_ERRORS_PER_ITERATION = 10  # cascading C++ errors are mostly artifacts of the first few


class RepairStatus(Enum):
    ALREADY_COMPILABLE = "already-compilable"
    REPAIRED = "repaired"
    EXHAUSTED_ITERATIONS = "exhausted-iterations"
    FIXER_FAILED = "fixer-failed"


@dataclass(frozen=True)
class RepairStep:
    """One fixer call: the prompt sent, the candidate returned, the verdict."""

    iteration: int
    target_error: Diagnostic
    prompt: str
    candidate: str
    accepted: bool

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "target_error": self.target_error.to_dict(),
            "prompt": self.prompt,
            "candidate": self.candidate,
            "accepted": self.accepted,
        }


@dataclass(frozen=True)
class RepairTrace:
    snippet_id: str
    initial_outcome: CompileOutcome
    steps: tuple[RepairStep, ...]
    final_source: str
    final_outcome: CompileOutcome
    status: RepairStatus
    iterations_used: int

    def to_dict(self) -> dict:
        return {
            "snippet_id": self.snippet_id,
            "status": self.status.value,
            "iterations_used": self.iterations_used,
            "initial_outcome": self.initial_outcome.to_dict(),
            "steps": [s.to_dict() for s in self.steps],
            "final_source": self.final_source,
            "final_outcome": self.final_outcome.to_dict(),
        }


def build_prompt(code: str, error: Diagnostic, lang: LangLabel) -> str:
    """Render the repair prompt; byte-stable for fixed inputs.

    Embeds the full current code and exactly one diagnostic's raw line.
    """
    if error.severity is not Severity.ERROR:
        raise ValueError("repair prompts are built for Error-severity diagnostics only")
    display = lang.display_name
    fence = "c" if lang is LangLabel.C else "cpp"
    body = code if code.endswith("\n") else code + "\n"
    return (
        f"Given the following {display} code:\n"
        f"```{fence}\n"
        f"{body}"
        f"```\n"
        f"Please rectify the following error identified in the compiler output:\n"
        f"{error.raw}\n"
        f"Return the complete corrected code.\n"
    )


_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)\n?```", re.DOTALL)


def extract_candidate(fixer_reply: str) -> str:
    """Pull the candidate source out of a fixer reply.

    First fenced code block wins; with no fence the whole reply is
    accepted only if it passes a crude brace-balance probe. Raises
    NoCodeFound otherwise.
    """
    match = _FENCE_RE.search(fixer_reply)
    if match:
        return match.group(1)
    text = fixer_reply.strip()
    if text and _braces_balanced(text):
        return text
    raise NoCodeFound("reply has no code block and fails the brace-balance probe")


def _braces_balanced(text: str) -> bool:
    depth = 0
    for ch in text:
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth < 0:
                return False
    return depth == 0


# ---------------------------------------------------------------------------
# Fixer backends


class FixerBackend(ABC):
    """Produces a full-source candidate for one diagnostic, or None.

    Implementations are total: they return a candidate, return None (no
    fix for this diagnostic), or raise FixerError for hard backend
    failures; they must not hang past their own configured timeout.
    """

    name = "fixer"

    @abstractmethod
    def fix(
        self, prompt: str, code: str, diagnostic: Diagnostic, snippet_id: str = ""
    ) -> Optional[str]: ...


class NullFixer(FixerBackend):
    """Never fixes anything; useful as a batch-semantics baseline."""

    name = "null"

    def fix(self, prompt, code, diagnostic, snippet_id=""):
        return None


class OracleFixer(FixerBackend):
    """Returns a known-good reference source; harness validation only."""

    name = "oracle"

    def __init__(self, references: Mapping[str, str]):
        self._references = dict(references)

    def fix(self, prompt, code, diagnostic, snippet_id=""):
        return self._references.get(snippet_id)


class ModelFixer(FixerBackend):
    """Bridges the repair loop to a chat-completion backend."""

    name = "model"

    def __init__(self, backend: ModelBackend):
        self._backend = backend

    def fix(self, prompt, code, diagnostic, snippet_id=""):
        try:
            reply = self._backend.complete([{"role": "user", "content": prompt}])
        except Exception as exc:  # transport/timeout errors are hard failures
            raise FixerError(f"model backend failed: {exc}") from exc
        try:
            return extract_candidate(reply)
        except NoCodeFound:
            return None


# Standard symbols -> header that declares them; drives the add-include rule.
_STD_HEADERS = {
    "malloc": "stdlib.h", "calloc": "stdlib.h", "realloc": "stdlib.h",
    "free": "stdlib.h", "exit": "stdlib.h", "abort": "stdlib.h", "atoi": "stdlib.h",
    "printf": "stdio.h", "fprintf": "stdio.h", "sprintf": "stdio.h",
    "snprintf": "stdio.h", "scanf": "stdio.h", "puts": "stdio.h",
    "putchar": "stdio.h", "getchar": "stdio.h", "fopen": "stdio.h",
    "fclose": "stdio.h", "FILE": "stdio.h", "fgets": "stdio.h",
    "strlen": "string.h", "strcpy": "string.h", "strncpy": "string.h",
    "strcmp": "string.h", "strncmp": "string.h", "strcat": "string.h",
    "memcpy": "string.h", "memset": "string.h", "memmove": "string.h",
    "NULL": "stddef.h", "size_t": "stddef.h", "ptrdiff_t": "stddef.h",
    "isdigit": "ctype.h", "isalpha": "ctype.h", "tolower": "ctype.h", "toupper": "ctype.h",
    "sqrt": "math.h", "pow": "math.h", "fabs": "math.h", "floor": "math.h",
    "ceil": "math.h", "sin": "math.h", "cos": "math.h",
    "assert": "assert.h",
    "INT_MAX": "limits.h", "INT_MIN": "limits.h", "UINT_MAX": "limits.h",
    "uint8_t": "stdint.h", "uint16_t": "stdint.h", "uint32_t": "stdint.h",
    "uint64_t": "stdint.h", "int8_t": "stdint.h", "int16_t": "stdint.h",
    "int32_t": "stdint.h", "int64_t": "stdint.h",
    "bool": "stdbool.h", "true": "stdbool.h", "false": "stdbool.h",
}

_EXPECTED_RE = re.compile(r"expected (.+?) (before|after) (.+)$")
_QUOTED_RE = re.compile(r"'([^']+)'")
_UNDECLARED_RE = re.compile(r"'(\w+)' undeclared")
_NOT_IN_SCOPE_RE = re.compile(r"'(\w+)' was not declared in this scope")
_UNKNOWN_TYPE_RE = re.compile(r"unknown type name '(\w+)'|'(\w+)' does not name a type")
_CONTEXT_ECHO_RE = re.compile(r"^\s*\d+\s*\|\s?(.*)$")

_INSERTABLE_TOKENS = {";", ")", "(", "]", "[", ",", "}", "{", ":"}


class RuleFixer(FixerBackend):
    """Deterministic pattern rules covering the dominant error categories.

    Four documented patterns:

    - ``insert_token``: the compiler expected a specific punctuation
      token (missing semicolon, parenthesis, bracket); insert it at the
      diagnosed location. Among alternatives (``expected ',' or ';'``) a
      semicolon is preferred because it closes the statement.
    - ``balance_scope``: unbalanced scope at end of input; append a
      closing brace (or parenthesis when named) at end of file.
    - ``add_include``: an undeclared name is a known standard-library
      symbol; prepend the header that declares it.
    - ``declare_identifier``: declare an undeclared identifier with an
      inferred scalar type — ``typedef int X;`` when the usage context
      shows a type position, ``int X;`` otherwise.
    """

    name = "rules"

    PATTERNS = ("insert_token", "balance_scope", "add_include", "declare_identifier")

    def __init__(self, enabled: Sequence[str] | None = None):
        enabled = tuple(enabled) if enabled is not None else self.PATTERNS
        unknown = set(enabled) - set(self.PATTERNS)
        if unknown:
            raise ValueError(f"unknown rule patterns: {sorted(unknown)}")
        self.enabled = frozenset(enabled)

    # -- pattern matching -------------------------------------------------

    def matches(self, diagnostic: Diagnostic) -> Optional[str]:
        """Name of the enabled pattern that claims this diagnostic, or None."""
        message = diagnostic.message
        if "at end of input" in message and "balance_scope" in self.enabled:
            return "balance_scope"
        if "insert_token" in self.enabled and self._insertable_token(message):
            if diagnostic.line is not None and diagnostic.column is not None:
                return "insert_token"
        name = self._undeclared_name(message)
        if name:
            if name in _STD_HEADERS and "add_include" in self.enabled:
                return "add_include"
            if "declare_identifier" in self.enabled:
                return "declare_identifier"
        type_name = self._unknown_type_name(message)
        if type_name:
            if type_name in _STD_HEADERS and "add_include" in self.enabled:
                return "add_include"
            if "declare_identifier" in self.enabled:
                return "declare_identifier"
        return None

    @staticmethod
    def _insertable_token(message: str) -> Optional[str]:
        """Pick the token to insert for an expected-token diagnostic.

        Claims only shapes an insertion can plausibly fix: every
        alternative must be an insertable punctuation token (bare words
        like 'identifier' or 'asm' signal a mangled declaration), and a
        "before" target must itself be a quoted token (unquoted targets
        such as "numeric constant" come from expression juxtaposition,
        where inserting punctuation never restores the program).
        """
        match = _EXPECTED_RE.search(message)
        if not match:
            return None
        alternatives_text, position, target_text = match.groups()
        alternatives = _QUOTED_RE.findall(alternatives_text)
        if not alternatives or any(a not in _INSERTABLE_TOKENS for a in alternatives):
            return None
        leftovers = re.sub(r"'[^']*'", " ", alternatives_text)
        if re.search(r"\b(?!or\b)\w", leftovers):
            return None
        target_match = _QUOTED_RE.search(target_text)
        target = target_match.group(1) if target_match else None
        if position == "before" and target is None:
            return None
        if target == "{" and ")" in alternatives:
            return ")"
        if ";" in alternatives:
            return ";"
        return alternatives[0]

    @staticmethod
    def _undeclared_name(message: str) -> Optional[str]:
        match = _UNDECLARED_RE.search(message) or _NOT_IN_SCOPE_RE.search(message)
        return match.group(1) if match else None

    @staticmethod
    def _unknown_type_name(message: str) -> Optional[str]:
        match = _UNKNOWN_TYPE_RE.search(message)
        if not match:
            return None
        return match.group(1) or match.group(2)

    # -- fixing ------------------------------------------------------------

    def fix(self, prompt, code, diagnostic, snippet_id=""):
        pattern = self.matches(diagnostic)
        if pattern == "balance_scope":
            return self._fix_balance_scope(code, diagnostic)
        if pattern == "insert_token":
            return self._fix_insert_token(code, diagnostic)
        if pattern == "add_include":
            return self._fix_add_include(code, diagnostic)
        if pattern == "declare_identifier":
            return self._fix_declare_identifier(code, diagnostic)
        return None

    def _fix_insert_token(self, code: str, diagnostic: Diagnostic) -> Optional[str]:
        token = self._insertable_token(diagnostic.message)
        if token is None or diagnostic.line is None or diagnostic.column is None:
            return None
        lines = code.splitlines(keepends=True)
        row = diagnostic.line - 1
        if row >= len(lines):
            return None
        line = lines[row]
        col = min(diagnostic.column - 1, len(line.rstrip("\n")))
        lines[row] = line[:col] + token + line[col:]
        return "".join(lines)

    def _fix_balance_scope(self, code: str, diagnostic: Diagnostic) -> str:
        quoted = _QUOTED_RE.findall(diagnostic.message)
        closer = quoted[0] if quoted and quoted[0] in (")", "}") else "}"
        body = code if code.endswith("\n") else code + "\n"
        return body + closer + "\n"

    def _fix_add_include(self, code: str, diagnostic: Diagnostic) -> Optional[str]:
        name = self._undeclared_name(diagnostic.message) or self._unknown_type_name(
            diagnostic.message
        )
        header = _STD_HEADERS.get(name or "")
        if header is None:
            return None
        include = f"#include <{header}>"
        if include in code:
            return None
        return include + "\n" + code

    def _fix_declare_identifier(self, code: str, diagnostic: Diagnostic) -> Optional[str]:
        type_name = self._unknown_type_name(diagnostic.message)
        if type_name:
            return f"typedef int {type_name};\n" + code
        name = self._undeclared_name(diagnostic.message)
        if not name:
            return None
        if self._used_as_type(name, diagnostic):
            return f"typedef int {name};\n" + code
        return f"int {name};\n" + code

    @staticmethod
    def _used_as_type(name: str, diagnostic: Diagnostic) -> bool:
        """Infer a type position from the diagnostic's captured source echo.

        The echo line comes from the frozen compiler output, so it stays
        valid even after earlier fixes shifted the working code.
        """
        for line in diagnostic.context:
            match = _CONTEXT_ECHO_RE.match(line)
            if match and re.search(rf"\b{re.escape(name)}\s+[A-Za-z_]", match.group(1)):
                return True
        return False


# ---------------------------------------------------------------------------
# The loop


def repair(
    snippet: CodeSnippet,
    config: CompilerConfig | None = None,
    fixer: FixerBackend | None = None,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> RepairTrace:
    """Run the iterative repair loop on one snippet.

    Every fixer call is recorded as a RepairStep whether or not its
    candidate was accepted; rejected candidates leave the working code
    unchanged and the pass proceeds to the next diagnostic. A hard fixer
    failure aborts with status FIXER_FAILED carrying the last good
    working code.
    """
    if snippet.claimed_lang not in (LangLabel.C, LangLabel.CPP):
        raise ValueError("repair requires a C or C++ snippet")
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    config = config or CompilerConfig()
    fixer = fixer or RuleFixer()
    lang = snippet.claimed_lang

    initial = compile_check(snippet.source, lang, config)
    if initial.compilable:
        return RepairTrace(
            snippet_id=snippet.id,
            initial_outcome=initial,
            steps=(),
            final_source=snippet.source,
            final_outcome=initial,
            status=RepairStatus.ALREADY_COMPILABLE,
            iterations_used=0,
        )

    steps: list[RepairStep] = []
    working = snippet.source
    outcome = initial
    status = RepairStatus.EXHAUSTED_ITERATIONS
    iterations_used = 0
    for iteration in range(max_iterations):
        frozen_errors = outcome.errors()[:MAX_ERRORS_PER_ITERATION]
        aborted = False
        for diagnostic in frozen_errors:
            prompt = build_prompt(working, diagnostic, lang)
            try:
                candidate = fixer.fix(prompt, working, diagnostic, snippet_id=snippet.id)
            except FixerError:
                steps.append(
                    RepairStep(
                        iteration=iteration,
                        target_error=diagnostic,
                        prompt=prompt,
                        candidate="",
                        accepted=False,
                    )
                )
                status = RepairStatus.FIXER_FAILED
                aborted = True
                break
            accepted = bool(candidate)
            steps.append(
                RepairStep(
                    iteration=iteration,
                    target_error=diagnostic,
                    prompt=prompt,
                    candidate=candidate or "",
                    accepted=accepted,
                )
            )
            if accepted:
                working = candidate
        if aborted:
            break
        iterations_used = iteration + 1
        outcome = compile_check(working, lang, config)
        if outcome.compilable:
            status = RepairStatus.REPAIRED
            break
    return RepairTrace(
        snippet_id=snippet.id,
        initial_outcome=initial,
        steps=tuple(steps),
        final_source=working,
        final_outcome=outcome,
        status=status,
        iterations_used=iterations_used,
    )


@dataclass
class RepairCounts:
    n: int = 0
    already_compilable: int = 0
    repaired: int = 0
    exhausted: int = 0
    fixer_failed: int = 0

    def add(self, status: RepairStatus):
        self.n += 1
        if status is RepairStatus.ALREADY_COMPILABLE:
            self.already_compilable += 1
        elif status is RepairStatus.REPAIRED:
            self.repaired += 1
        elif status is RepairStatus.EXHAUSTED_ITERATIONS:
            self.exhausted += 1
        else:
            self.fixer_failed += 1

    @property
    def compilable_rate(self) -> float:
        if self.n == 0:
            return 0.0
        return (self.already_compilable + self.repaired) / self.n

    @property
    def repaired_rate(self) -> float:
        return self.repaired / self.n if self.n else 0.0

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "already_compilable": self.already_compilable,
            "repaired": self.repaired,
            "exhausted": self.exhausted,
            "fixer_failed": self.fixer_failed,
            "compilable_rate": self.compilable_rate,
            "repaired_rate": self.repaired_rate,
        }


@dataclass
class BatchRepairSummary:
    overall: RepairCounts = field(default_factory=RepairCounts)
    per_language: dict[LangLabel, RepairCounts] = field(default_factory=dict)
    failures: list[tuple[str, str]] = field(default_factory=list)  # (snippet id, reason)

    def to_dict(self) -> dict:
        return {
            "overall": self.overall.to_dict(),
            "per_language": {
                lang.value: counts.to_dict() for lang, counts in self.per_language.items()
            },
            "failures": [{"snippet_id": sid, "reason": reason} for sid, reason in self.failures],
        }


def batch_repair(
    corpus: Sequence[CodeSnippet],
    config: CompilerConfig | None = None,
    fixer: FixerBackend | None = None,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    jobs: int | None = None,
) -> tuple[list[Optional[RepairTrace]], BatchRepairSummary]:
    """Repair a corpus on a bounded worker pool; never aborts on one snippet.

    The trace list is parallel to the corpus; a snippet whose repair
    raised (unsupported language, parse-level surprises) gets None there
    and an entry in ``summary.failures``. Environment-level problems
    (CompilerNotFound) still propagate, since no snippet could succeed.
    """
    from .errors import CodevetError, CompilerNotFound

    config = config or CompilerConfig()
    fixer = fixer or RuleFixer()
    jobs = jobs or os.cpu_count() or 1

    def run_one(snippet: CodeSnippet):
        try:
            return repair(snippet, config, fixer, max_iterations)
        except CompilerNotFound:
            raise
        except (CodevetError, ValueError) as exc:
            return exc

    if jobs <= 1 or len(corpus) <= 1:
        results = [run_one(s) for s in corpus]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_one, s) for s in corpus]
            results = [f.result() for f in futures]
    traces: list[Optional[RepairTrace]] = []
    summary = BatchRepairSummary()
    for snippet, result in zip(corpus, results):
        if isinstance(result, Exception):
            traces.append(None)
            summary.failures.append((snippet.id, str(result)))
            continue
        traces.append(result)
        summary.overall.add(result.status)
        lang_counts = summary.per_language.setdefault(snippet.claimed_lang, RepairCounts())
        lang_counts.add(result.status)
    return traces, summary
