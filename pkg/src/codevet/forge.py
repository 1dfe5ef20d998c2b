"""Forge single-error instruction records from compilable code.

Pipeline: keep compilable C/C++ snippets, drop over-long ones, inject
one error per requested mutation kind, pair the broken code and its
first compiler error with the original source. Output is one JSON
object per line with ``instruction`` / ``input`` / ``response`` plus a
``meta`` object, the layout common instruction-tuning trainers consume
directly. Fixed (corpus, kinds, seed, config) produces byte-identical
output files.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .compiledrv import CompileOutcome, CompilerConfig, Diagnostic, Severity, compile_check
from .corpus import CodeSnippet, LangLabel, filter_by_length
from .errors import NoErrorDiagnostic, ParseFailure
from .inject import MutationKind, MutationRecord, inject_error

INSTRUCTION_TEMPLATE = "Fix the compiler error of the given {PL} code: {compiler_error}"
DEFAULT_MAX_TOKENS = 4096
DEFAULT_KINDS = (
    MutationKind.DROP_VAR_INIT,
    MutationKind.DROP_TYPEDEF,
    MutationKind.DROP_OPERATOR,
    MutationKind.DROP_PAREN,
)


@dataclass(frozen=True)
class InstructionRecord:
    instruction: str
    input: str
    response: str
    snippet_id: str
    lang: LangLabel
    mutation: MutationRecord
    diagnostics: tuple[Diagnostic, ...]

    def to_dict(self) -> dict:
        return {
            "instruction": self.instruction,
            "input": self.input,
            "response": self.response,
            "meta": {
                "snippet_id": self.snippet_id,
                "lang": self.lang.value,
                "mutation": self.mutation.to_dict(),
                "diagnostics": [d.to_dict() for d in self.diagnostics],
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "InstructionRecord":
        meta = data["meta"]
        return cls(
            instruction=data["instruction"],
            input=data["input"],
            response=data["response"],
            snippet_id=meta["snippet_id"],
            lang=LangLabel(meta["lang"]),
            mutation=MutationRecord.from_dict(meta["mutation"]),
            diagnostics=tuple(Diagnostic.from_dict(d) for d in meta["diagnostics"]),
        )


def make_record(
    original: CodeSnippet,
    mutated: str,
    record: MutationRecord,
    outcome: CompileOutcome,
) -> InstructionRecord:
    """Pair broken code with the original, embedding the first compiler error.

    The instruction template has a single error slot, so the first
    Error-severity diagnostic goes there and the full diagnostic list is
    stashed in the meta object.
    """
    if outcome.compilable:
        raise ValueError("outcome must be the (non-compilable) compile of the mutated source")
    first_error = next((d for d in outcome.diagnostics if d.severity is Severity.ERROR), None)
    if first_error is None:
        raise NoErrorDiagnostic("mutated compile outcome carries no Error diagnostic")
    lang = original.claimed_lang
    instruction = INSTRUCTION_TEMPLATE.format(
        PL=lang.display_name, compiler_error=first_error.raw
    )
    return InstructionRecord(
        instruction=instruction,
        input=mutated,
        response=original.source,
        snippet_id=original.id,
        lang=lang,
        mutation=record,
        diagnostics=outcome.diagnostics,
    )


def derive_seed(base_seed: int, snippet_id: str, kind: MutationKind) -> int:
    """Stable per-(snippet, kind) sub-seed, independent of process state."""
    digest = hashlib.sha256(f"{base_seed}:{snippet_id}:{kind.value}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class ForgeManifest:
    collected: int = 0
    compilable: int = 0
    length_kept: int = 0
    injected: dict = field(default_factory=dict)  # kind wire name -> count
    emitted: int = 0
    skipped: list = field(default_factory=list)  # {snippet_id, kind?, reason}
    settings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "collected": self.collected,
            "compilable": self.compilable,
            "length_kept": self.length_kept,
            "injected": self.injected,
            "emitted": self.emitted,
            "skipped": self.skipped,
            "settings": self.settings,
        }


@dataclass
class ForgeResult:
    records: list[InstructionRecord]
    manifest: ForgeManifest


def forge_dataset(
    corpus: Sequence[CodeSnippet],
    kinds: Sequence[MutationKind] = DEFAULT_KINDS,
    seed: int = 0,
    max_tokens: int = DEFAULT_MAX_TOKENS,
    config: CompilerConfig | None = None,
    jobs: int | None = None,
) -> ForgeResult:
    """Run the forging pipeline; per-snippet failures never abort the run.

    Emission order is corpus order crossed with kind order, and the
    per-snippet seed is derived from (seed, snippet id, kind), so the
    worker pool cannot perturb the output.
    """
    config = config or CompilerConfig()
    jobs = jobs or os.cpu_count() or 1
    manifest = ForgeManifest(collected=len(corpus))
    manifest.settings = {
        "kinds": [k.value for k in kinds],
        "seed": seed,
        "max_tokens": max_tokens,
        "command": config.command,
        "std_c": config.std_c,
        "std_cpp": config.std_cpp,
        "extra_flags": list(config.extra_flags),
        "timeout": config.timeout,
        "jobs": jobs,
    }

    supported = []
    for snippet in corpus:
        if snippet.claimed_lang in (LangLabel.C, LangLabel.CPP):
            supported.append(snippet)
        else:
            manifest.skipped.append(
                {"snippet_id": snippet.id, "reason": "unsupported-language"}
            )

    def is_compilable(snippet: CodeSnippet) -> bool:
        return compile_check(snippet.source, snippet.claimed_lang, config).compilable

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        verdicts = list(pool.map(is_compilable, supported))
    compilable = [s for s, ok in zip(supported, verdicts) if ok]
    for snippet, ok in zip(supported, verdicts):
        if not ok:
            manifest.skipped.append({"snippet_id": snippet.id, "reason": "non-compilable"})
    manifest.compilable = len(compilable)

    kept, dropped = filter_by_length(compilable, max_tokens)
    for snippet in dropped:
        manifest.skipped.append({"snippet_id": snippet.id, "reason": "over-length"})
    manifest.length_kept = len(kept)

    manifest.injected = {kind.value: 0 for kind in kinds}
    tasks = [(snippet, kind) for snippet in kept for kind in kinds]

    def forge_one(task) -> tuple[Optional[InstructionRecord], Optional[dict]]:
        snippet, kind = task
        sub_seed = derive_seed(seed, snippet.id, kind)
        try:
            injected = inject_error(
                snippet.source,
                snippet.claimed_lang,
                kind,
                sub_seed,
                snippet_id=snippet.id,
                config=config,
            )
        except ParseFailure as exc:
            return None, {
                "snippet_id": snippet.id,
                "kind": kind.value,
                "reason": f"parse-failure: {exc}",
            }
        if injected is None:
            return None, {
                "snippet_id": snippet.id,
                "kind": kind.value,
                "reason": "not-applicable",
            }
        mutated, record = injected
        outcome = compile_check(mutated, snippet.claimed_lang, config)
        try:
            return make_record(snippet, mutated, record, outcome), None
        except NoErrorDiagnostic:
            return None, {
                "snippet_id": snippet.id,
                "kind": kind.value,
                "reason": "no-error-diagnostic",
            }

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        outcomes = list(pool.map(forge_one, tasks))

    records: list[InstructionRecord] = []
    for (snippet, kind), (record, skip) in zip(tasks, outcomes):
        if record is not None:
            manifest.injected[kind.value] += 1
            records.append(record)
        elif skip is not None:
            manifest.skipped.append(skip)
    manifest.emitted = len(records)
    return ForgeResult(records=records, manifest=manifest)


def write_dataset(records: Sequence[InstructionRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record.to_dict(), ensure_ascii=False))
            handle.write("\n")


def write_manifest(manifest: ForgeManifest, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(manifest.to_dict(), handle, ensure_ascii=False, indent=2)
        handle.write("\n")


def load_dataset(path: str | Path) -> list[InstructionRecord]:
    records = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                records.append(InstructionRecord.from_dict(json.loads(line)))
    return records
