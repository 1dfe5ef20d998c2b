"""Compile oracle: drive an external C/C++ compiler and parse its diagnostics.

A snippet is compilable when a syntax+semantics-only compile (no
linking, no codegen) exits 0 with no Error-severity diagnostic. Each
check writes the source into a private temporary directory and invokes
``<command> -fsyntax-only -std=<std> <extra_flags> snippet.c|.cpp``
with the directory as working directory, so diagnostics always name
the bare ``snippet.*`` path regardless of where the run happens. That
keeps captured diagnostics byte-stable across runs, which downstream
dataset forging relies on.

Caveat: skipping codegen means codegen-only failures are not observed.
"""

from __future__ import annotations

import os
import re
import shutil
import subprocess
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

from .corpus import LangLabel
from .errors import CompilerNotFound, IoFailure


class Severity(Enum):
    ERROR = "error"
    WARNING = "warning"
    NOTE = "note"


class Category(Enum):
    SYNTAX = "syntax"
    SEMANTIC = "semantic"
    SCOPE = "scope"
    OTHER = "other"


# Keyword tables for message categorization. Scope is tested before
# Semantic (most-specific first): a message matching both is Scope.
_SCOPE_KEYWORDS = ("not declared in this scope", "out of scope")
_SYNTAX_KEYWORDS = ("expected", "stray", "unterminated")
_SEMANTIC_KEYWORDS = (
    "undeclared",
    "undefined",
    "unknown type",
    "conflicting types",
    "incompatible",
)


def categorize(message: str) -> Category:
    """Map a diagnostic message to its category by fixed keyword rules."""
    lowered = message.lower()
    if any(k in lowered for k in _SCOPE_KEYWORDS):
        return Category.SCOPE
    if any(k in lowered for k in _SYNTAX_KEYWORDS):
        return Category.SYNTAX
    if any(k in lowered for k in _SEMANTIC_KEYWORDS):
        return Category.SEMANTIC
    return Category.OTHER


@dataclass(frozen=True)
class Diagnostic:
    """One parsed compiler diagnostic.

    ``raw`` is the verbatim line from the compiler output; ``context``
    holds the non-diagnostic lines (source echo, carets, notes we could
    not parse) that followed it in the stream.
    """

    severity: Severity
    message: str
    raw: str
    line: Optional[int] = None
    column: Optional[int] = None
    category: Category = Category.OTHER
    context: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "severity": self.severity.value,
            "message": self.message,
            "raw": self.raw,
            "line": self.line,
            "column": self.column,
            "category": self.category.value,
            "context": list(self.context),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Diagnostic":
        return cls(
            severity=Severity(data["severity"]),
            message=data["message"],
            raw=data["raw"],
            line=data.get("line"),
            column=data.get("column"),
            category=Category(data.get("category", "other")),
            context=tuple(data.get("context", ())),
        )


# GNU-style diagnostic line: <path>:<line>:<col>: <severity>: <message>.
# Line and column may be absent (driver-level messages such as
# "cc1: error: ..."). Clang emits the same shape. Source-echo and caret
# continuation lines start with whitespace and never match.
_DIAG_RE = re.compile(
    r"^(?P<path>[^\s:][^:\n]*):(?:(?P<line>\d+):)?(?:(?P<col>\d+):)? "
    r"(?P<sev>fatal error|internal compiler error|sorry, unimplemented|error|warning|note): "
    r"(?P<msg>.*)$"
)

# "fatal error" and ICE are error severities in the Definition-3.1 sense
# (the compile did not conclude cleanly); everything else unknown is a Note.
_SEVERITY_MAP = {
    "error": Severity.ERROR,
    "fatal error": Severity.ERROR,
    "internal compiler error": Severity.ERROR,
    "warning": Severity.WARNING,
    "note": Severity.NOTE,
    "sorry, unimplemented": Severity.NOTE,
}


def parse_diagnostics(raw_output: str) -> tuple[Diagnostic, ...]:
    """Parse compiler output into diagnostics, preserving emission order.

    Total on any text. Lines that do not match the diagnostic pattern
    are attached to the preceding diagnostic as continuation context,
    or skipped when none precedes. Never fabricates: every returned
    ``raw`` is a verbatim line of ``raw_output``.
    """
    parsed: list[dict] = []
    for line in raw_output.splitlines():
        match = _DIAG_RE.match(line)
        if match:
            parsed.append(
                {
                    "line": int(match.group("line")) if match.group("line") else None,
                    "column": int(match.group("col")) if match.group("col") else None,
                    "severity": _SEVERITY_MAP.get(match.group("sev"), Severity.NOTE),
                    "message": match.group("msg"),
                    "raw": line,
                    "context": [],
                }
            )
        elif parsed:
            parsed[-1]["context"].append(line)
    return tuple(
        Diagnostic(
            severity=entry["severity"],
            message=entry["message"],
            raw=entry["raw"],
            line=entry["line"],
            column=entry["column"],
            category=categorize(entry["message"]),
            context=tuple(entry["context"]),
        )
        for entry in parsed
    )


def _default_command() -> str:
    return os.environ.get("CODEVET_CC", "gcc")


@dataclass(frozen=True)
class CompilerConfig:
    """Pinned compiler invocation settings.

    Defaults are gnu11 / gnu++14 with warnings left as warnings: newer
    standards turn implicit function declarations into hard errors,
    which would misclassify a large class of legacy C snippets.
    """

    command: str = field(default_factory=_default_command)
    std_c: str = "gnu11"
    std_cpp: str = "gnu++14"
    extra_flags: tuple[str, ...] = ()
    timeout: float = 10.0

    def __post_init__(self):
        if shutil.which(self.command) is None:
            raise CompilerNotFound(f"compiler command not found: {self.command!r}")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")

    def std_for(self, lang: LangLabel) -> str:
        return self.std_c if lang is LangLabel.C else self.std_cpp


@dataclass(frozen=True)
class CompileOutcome:
    compilable: bool
    diagnostics: tuple[Diagnostic, ...]
    exit_code: int
    elapsed: float
    compiler_identity: str

    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity is Severity.ERROR]

    def to_dict(self) -> dict:
        return {
            "compilable": self.compilable,
            "exit_code": self.exit_code,
            "elapsed": self.elapsed,
            "compiler_identity": self.compiler_identity,
            "diagnostics": [d.to_dict() for d in self.diagnostics],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CompileOutcome":
        return cls(
            compilable=data["compilable"],
            diagnostics=tuple(Diagnostic.from_dict(d) for d in data["diagnostics"]),
            exit_code=data["exit_code"],
            elapsed=data.get("elapsed", 0.0),
            compiler_identity=data.get("compiler_identity", ""),
        )


_identity_cache: dict[str, str] = {}


def compiler_identity(command: str) -> str:
    """First line of ``<command> --version``, cached per command."""
    banner = _identity_cache.get(command)
    if banner is None:
        try:
            proc = subprocess.run(
                [command, "--version"], capture_output=True, text=True, timeout=10
            )
            banner = proc.stdout.splitlines()[0] if proc.stdout else command
        except (OSError, subprocess.TimeoutExpired, IndexError):
            banner = command
        _identity_cache[command] = banner
    return banner


def _source_filename(lang: LangLabel) -> str:
    return "snippet.c" if lang is LangLabel.C else "snippet.cpp"


def compile_check(
    source: str, lang: LangLabel, config: CompilerConfig | None = None
) -> CompileOutcome:
    """Run the compile oracle on one snippet.

    The snippet is compiled stand-alone (no injected include paths) in
    syntax+semantics mode with linking disabled. A timeout counts as
    non-compilable with a synthetic Other-category diagnostic rather
    than aborting the run; pathological snippets are a corpus fact, not
    an infrastructure failure.
    """
    if lang not in (LangLabel.C, LangLabel.CPP):
        raise ValueError(f"compile oracle supports C and C++ only, got {lang}")
    if not source:
        raise ValueError("source must be non-empty")
    config = config or CompilerConfig()
    filename = _source_filename(lang)
    identity = compiler_identity(config.command)
    started = time.perf_counter()
    with tempfile.TemporaryDirectory(prefix="codevet-cc-") as tmpdir:
        try:
            with open(os.path.join(tmpdir, filename), "w", encoding="utf-8") as handle:
                handle.write(source)
        except OSError as exc:
            raise IoFailure(f"failed to stage snippet: {exc}") from exc
        cmd = [
            config.command,
            "-fsyntax-only",
            f"-std={config.std_for(lang)}",
            *config.extra_flags,
            filename,
        ]
        # Pin the locale: GCC switches between ASCII and Unicode quote
        # characters based on it, and diagnostics must be byte-stable.
        env = {**os.environ, "LC_ALL": "C", "LANG": "C"}
        try:
            proc = subprocess.run(
                cmd,
                cwd=tmpdir,
                capture_output=True,
                text=True,
                errors="replace",
                timeout=config.timeout,
                env=env,
            )
        except FileNotFoundError as exc:
            raise CompilerNotFound(f"compiler command not found: {config.command!r}") from exc
        except subprocess.TimeoutExpired:
            elapsed = time.perf_counter() - started
            synthetic = Diagnostic(
                severity=Severity.ERROR,
                message=f"compilation timed out after {config.timeout}s",
                raw=f"codevet: error: compilation timed out after {config.timeout}s",
                category=Category.OTHER,
            )
            return CompileOutcome(
                compilable=False,
                diagnostics=(synthetic,),
                exit_code=-1,
                elapsed=elapsed,
                compiler_identity=identity,
            )
    elapsed = time.perf_counter() - started
    diagnostics = parse_diagnostics(proc.stderr)
    compilable = proc.returncode == 0 and not any(
        d.severity is Severity.ERROR for d in diagnostics
    )
    return CompileOutcome(
        compilable=compilable,
        diagnostics=diagnostics,
        exit_code=proc.returncode,
        elapsed=elapsed,
        compiler_identity=identity,
    )


def resolve_check_lang(snippet_lang: LangLabel, mode: str) -> LangLabel | None:
    """Pick the compile language for a snippet under a CLI lang mode.

    ``c``/``cpp`` force that language; ``auto`` uses the claimed label
    and returns None for snippets that are not C or C++.
    """
    if mode == "c":
        return LangLabel.C
    if mode == "cpp":
        return LangLabel.CPP
    if mode == "auto":
        if snippet_lang in (LangLabel.C, LangLabel.CPP):
            return snippet_lang
        return None
    raise ValueError(f"unknown lang mode: {mode!r}")


def compile_many(
    items: Sequence[tuple[str, LangLabel]],
    config: CompilerConfig | None = None,
    jobs: int | None = None,
) -> list[CompileOutcome]:
    """Fan compile checks out over a bounded worker pool.

    Results are merged in input order; each check owns a private
    temporary directory, so calls are independent.
    """
    config = config or CompilerConfig()
    jobs = jobs or os.cpu_count() or 1
    if jobs <= 1 or len(items) <= 1:
        return [compile_check(source, lang, config) for source, lang in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(compile_check, source, lang, config) for source, lang in items]
        return [f.result() for f in futures]
