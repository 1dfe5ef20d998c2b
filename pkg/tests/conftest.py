from __future__ import annotations

import time
from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import pytest

from codevet.compiledrv import CompilerConfig
from codevet.corpus import CodeSnippet
from codevet.forge import derive_seed
from codevet.inject import MutationKind, MutationRecord, inject_error

from corpora import compilable_c, compilable_cpp

FIXTURES_DIR = Path(__file__).parent / "fixtures"
GOLDEN_DIR = FIXTURES_DIR / "golden"

INJECT_BASE_SEED = 2024
INJECT_JOBS = 4


@pytest.fixture(scope="session")
def config() -> CompilerConfig:
    return CompilerConfig()


@pytest.fixture(scope="session")
def c_fixtures() -> list[CodeSnippet]:
    return compilable_c()


@pytest.fixture(scope="session")
def cpp_fixtures() -> list[CodeSnippet]:
    return compilable_cpp()


@pytest.fixture(scope="session")
def broken_listing() -> CodeSnippet:
    source = (FIXTURES_DIR / "file_scope_brace_block.c").read_text()
    from codevet.corpus import LangLabel

    return CodeSnippet(id="brace-block", source=source, claimed_lang=LangLabel.C)


@pytest.fixture(scope="session")
def fixed_listing() -> str:
    return (FIXTURES_DIR / "file_scope_brace_block_fixed.c").read_text()


@dataclass(frozen=True)
class InjectedCase:
    """One successful seeded mutation over a fixture snippet."""

    original: CodeSnippet
    kind: MutationKind
    mutated: str
    record: MutationRecord

    @property
    def broken_id(self) -> str:
        return f"{self.original.id}:{self.kind.value}"

    def broken_snippet(self) -> CodeSnippet:
        return CodeSnippet(
            id=self.broken_id,
            source=self.mutated,
            claimed_lang=self.original.claimed_lang,
            origin="injected",
        )


def build_injected_cases(
    snippets: list[CodeSnippet], config: CompilerConfig, jobs: int = INJECT_JOBS
) -> list[InjectedCase]:
    tasks = [(snippet, kind) for snippet in snippets for kind in MutationKind]

    def run_one(task):
        snippet, kind = task
        seed = derive_seed(INJECT_BASE_SEED, snippet.id, kind)
        result = inject_error(
            snippet.source, snippet.claimed_lang, kind, seed,
            snippet_id=snippet.id, config=config,
        )
        if result is None:
            return None
        mutated, record = result
        return InjectedCase(original=snippet, kind=kind, mutated=mutated, record=record)

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(run_one, tasks))
    return [case for case in results if case is not None]


@pytest.fixture(scope="session")
def injected_set(config, c_fixtures, cpp_fixtures):
    """All seeded mutations over the fixture corpus, plus the build time."""
    started = time.perf_counter()
    cases = build_injected_cases(c_fixtures + cpp_fixtures, config)
    elapsed = time.perf_counter() - started
    return cases, elapsed
