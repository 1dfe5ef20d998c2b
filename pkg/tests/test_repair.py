from __future__ import annotations

import re

import pytest

from codevet.backend import StaticBackend
from codevet.compiledrv import Diagnostic, Severity, compile_check
from codevet.corpus import CodeSnippet, LangLabel
from codevet.errors import FixerError, NoCodeFound
from codevet.inject import MutationKind, inject_error
from codevet.repair import (
    MAX_ERRORS_PER_ITERATION,
    ModelFixer,
    NullFixer,
    OracleFixer,
    RepairStatus,
    RuleFixer,
    batch_repair,
    build_prompt,
    extract_candidate,
    repair,
)

from conftest import GOLDEN_DIR


def _error(raw: str, message: str | None = None, line=None, column=None, context=()):
    return Diagnostic(
        severity=Severity.ERROR,
        message=message if message is not None else raw.split(": error: ")[-1],
        raw=raw,
        line=line,
        column=column,
        context=tuple(context),
    )


# ---------------------------------------------------------------------------
# build_prompt


def test_prompt_embeds_code_and_single_raw_diagnostic():
    diag = _error("t.c:1:6: error: expected ';'", line=1, column=6)
    prompt = build_prompt("int x", diag, LangLabel.C)
    assert "int x" in prompt
    assert "t.c:1:6: error: expected ';'" in prompt
    assert prompt.count(diag.raw) == 1


def test_prompt_byte_stable():
    diag = _error("t.c:1:1: error: x", line=1, column=1)
    assert build_prompt("int x;", diag, LangLabel.C) == build_prompt("int x;", diag, LangLabel.C)


def test_prompt_golden_file(config, broken_listing):
    outcome = compile_check(broken_listing.source, LangLabel.C, config)
    prompt = build_prompt(broken_listing.source, outcome.errors()[0], LangLabel.C)
    golden = (GOLDEN_DIR / "repair_prompt.golden.txt").read_text()
    assert prompt == golden


def test_prompt_uses_display_names():
    diag = _error("t.cpp:1:1: error: x")
    prompt = build_prompt("int x;", diag, LangLabel.CPP)
    assert prompt.startswith("Given the following C++ code:\n```cpp\n")


def test_prompt_rejects_non_error_diagnostic():
    warning = Diagnostic(severity=Severity.WARNING, message="m", raw="r")
    with pytest.raises(ValueError):
        build_prompt("code", warning, LangLabel.C)


# ---------------------------------------------------------------------------
# extract_candidate


def test_extract_single_fenced_block():
    reply = "```c\nint main(void){return 0;}\n```"
    assert extract_candidate(reply) == "int main(void){return 0;}"


def test_extract_block_with_surrounding_prose():
    reply = "Sure! Here is the fix:\n```c\nint x = 1;\n```\nHope that helps."
    assert extract_candidate(reply) == "int x = 1;"


def test_extract_prose_with_unbalanced_braces_fails():
    with pytest.raises(NoCodeFound):
        extract_candidate("I would add a } somewhere near the end.")


def test_extract_whole_reply_when_braces_balance():
    reply = "int main(void) { return 0; }"
    assert extract_candidate(reply) == reply


def test_extract_empty_reply_fails():
    with pytest.raises(NoCodeFound):
        extract_candidate("   \n")


# ---------------------------------------------------------------------------
# repair loop semantics


def test_already_compilable_short_circuits(config):
    snippet = CodeSnippet(id="ok", source="int main(void){return 0;}", claimed_lang=LangLabel.C)
    trace = repair(snippet, config, NullFixer(), max_iterations=3)
    assert trace.status is RepairStatus.ALREADY_COMPILABLE
    assert trace.steps == ()
    assert trace.iterations_used == 0
    assert trace.final_source == snippet.source


def test_oracle_repairs_listing_pair(config, broken_listing, fixed_listing):
    fixer = OracleFixer({broken_listing.id: fixed_listing})
    trace = repair(broken_listing, config, fixer, max_iterations=3)
    assert trace.status is RepairStatus.REPAIRED
    assert trace.iterations_used == 1
    assert trace.final_outcome.compilable
    assert trace.final_source == fixed_listing
    # independent re-verification of the repaired source
    assert compile_check(trace.final_source, LangLabel.C, config).compilable


def test_every_prompt_carries_exactly_one_diagnostic(config, broken_listing, fixed_listing):
    fixer = OracleFixer({broken_listing.id: fixed_listing})
    trace = repair(broken_listing, config, fixer, max_iterations=3)
    diag_line = re.compile(r"^[^\s:][^:\n]*:\d+:\d+: (error|warning|note): ", re.MULTILINE)
    for step in trace.steps:
        assert len(diag_line.findall(step.prompt)) == 1


def test_injected_semicolon_class_error_repaired_then_stuck_without_pattern(config):
    # construct the fixture through the inject module per the loop contract
    source = "int f(int a, int b){int y; y = a + b; return y;}\n"
    result = inject_error(source, LangLabel.C, MutationKind.DROP_OPERATOR, seed=3,
                          snippet_id="fix-me", config=config)
    assert result is not None
    mutated, _ = result
    snippet = CodeSnippet(id="fix-me", source=mutated, claimed_lang=LangLabel.C)

    trace = repair(snippet, config, RuleFixer(), max_iterations=1)
    assert trace.status is RepairStatus.REPAIRED
    assert trace.iterations_used == 1

    disabled = RuleFixer(enabled=("balance_scope", "add_include", "declare_identifier"))
    stuck = repair(snippet, config, disabled, max_iterations=3)
    assert stuck.status is RepairStatus.EXHAUSTED_ITERATIONS
    assert stuck.iterations_used == 3
    assert stuck.final_source == mutated  # nothing accepted, working code unchanged


def test_iterations_never_exceed_cap(config):
    snippet = CodeSnippet(id="x", source="int f(void){return missing;}", claimed_lang=LangLabel.C)
    trace = repair(snippet, config, NullFixer(), max_iterations=2)
    assert trace.status is RepairStatus.EXHAUSTED_ITERATIONS
    assert trace.iterations_used == 2


def test_steps_recorded_even_when_rejected(config):
    snippet = CodeSnippet(id="x", source="int f(void){return missing;}", claimed_lang=LangLabel.C)
    trace = repair(snippet, config, NullFixer(), max_iterations=2)
    assert len(trace.steps) == 2  # one per iteration over the single frozen error
    assert all(not step.accepted and step.candidate == "" for step in trace.steps)


def test_error_list_capped_per_iteration(config):
    body = "\n".join(f"    slot{i} = {i};" for i in range(15))
    source = f"int f(void) {{\n{body}\n    return 0;\n}}\n"
    snippet = CodeSnippet(id="many", source=source, claimed_lang=LangLabel.C)
    trace = repair(snippet, config, NullFixer(), max_iterations=1)
    assert len(trace.steps) == MAX_ERRORS_PER_ITERATION


class _ExplodingFixer(NullFixer):
    def fix(self, prompt, code, diagnostic, snippet_id=""):
        raise FixerError("backend down")


def test_hard_fixer_failure_aborts_with_last_good_code(config):
    snippet = CodeSnippet(id="x", source="int f(void){return missing;}", claimed_lang=LangLabel.C)
    trace = repair(snippet, config, _ExplodingFixer(), max_iterations=3)
    assert trace.status is RepairStatus.FIXER_FAILED
    assert trace.final_source == snippet.source
    assert len(trace.steps) == 1 and not trace.steps[0].accepted


def test_model_fixer_extracts_candidate(config):
    fixed = "int f(void){int missing = 0; return missing;}"
    backend = StaticBackend(f"Here you go:\n```c\n{fixed}\n```\n")
    snippet = CodeSnippet(id="m", source="int f(void){return missing;}", claimed_lang=LangLabel.C)
    trace = repair(snippet, config, ModelFixer(backend), max_iterations=2)
    assert trace.status is RepairStatus.REPAIRED
    assert trace.final_source == fixed


def test_repair_requires_c_family(config):
    snippet = CodeSnippet(id="p", source="print(1)", claimed_lang=LangLabel.PYTHON)
    with pytest.raises(ValueError):
        repair(snippet, config, NullFixer())


# ---------------------------------------------------------------------------
# RuleFixer pattern behavior


def test_rulefixer_rejects_unknown_pattern_names():
    with pytest.raises(ValueError):
        RuleFixer(enabled=("definitely_not_a_pattern",))


def test_rulefixer_matches_and_fixes_missing_semicolon():
    fixer = RuleFixer()
    diag = _error(
        "snippet.c:1:23: error: expected ';' before 'return'",
        line=1, column=23,
    )
    code = "int f(void){int x = 1 return x;}"
    assert fixer.matches(diag) == "insert_token"
    fixed = fixer.fix("", code, diag)
    assert fixed == "int f(void){int x = 1 ;return x;}"


def test_rulefixer_prefers_close_paren_before_open_brace():
    fixer = RuleFixer()
    diag = _error(
        "snippet.c:1:20: error: expected ';', ',' or ')' before '{' token",
        line=1, column=20,
    )
    code = "int f(int a, int b {return a;}"
    fixed = fixer.fix("", code, diag)
    assert fixed == "int f(int a, int b ){return a;}"


def test_rulefixer_declines_mangled_declaration_shapes():
    fixer = RuleFixer()
    diag = _error(
        "snippet.c:1:16: error: expected '=', ',', ';', 'asm' or '__attribute__' before 'a'",
        line=1, column=16,
    )
    assert fixer.matches(diag) is None
    assert fixer.fix("", "int fint a) {}", diag) is None


def test_rulefixer_declines_unquoted_before_targets():
    fixer = RuleFixer()
    diag = _error(
        "snippet.c:1:12: error: expected ')' before numeric constant",
        line=1, column=12,
    )
    assert fixer.matches(diag) is None


def test_rulefixer_balances_scope_at_end_of_input():
    fixer = RuleFixer()
    diag = _error("snippet.c:3:5: error: expected declaration or statement at end of input")
    code = "int main(void){int x = 1;\nreturn x;\n"
    fixed = fixer.fix("", code, diag)
    assert fixed.endswith("}\n")
    assert fixer.matches(diag) == "balance_scope"


def test_rulefixer_adds_header_for_known_symbol():
    fixer = RuleFixer()
    diag = _error("snippet.cpp:1:13: error: 'free' was not declared in this scope")
    code = "int main(){ free((void*)0); return 0; }\n"
    fixed = fixer.fix("", code, diag)
    assert fixed.startswith("#include <stdlib.h>\n")
    assert fixer.matches(diag) == "add_include"


def test_rulefixer_declares_scalar_identifier():
    fixer = RuleFixer()
    diag = _error("snippet.c:1:24: error: 'q' undeclared (first use in this function)")
    fixed = fixer.fix("", "int main(void){ return q; }\n", diag)
    assert fixed.startswith("int q;\n")


def test_rulefixer_infers_type_position_from_context_echo():
    fixer = RuleFixer()
    diag = _error(
        "snippet.cpp:1:13: error: 'ticks' was not declared in this scope",
        context=["    1 | int main(){ ticks t = 5; return (int)t; }", "      |             ^~~~~"],
    )
    fixed = fixer.fix("", "int main(){ ticks t = 5; return (int)t; }\n", diag)
    assert fixed.startswith("typedef int ticks;\n")


def test_rulefixer_defines_unknown_type():
    fixer = RuleFixer()
    diag = _error("snippet.c:1:13: error: unknown type name 'myint'; did you mean 'int'?")
    fixed = fixer.fix("", "int g(void){myint v = 2; return v;}\n", diag)
    assert fixed.startswith("typedef int myint;\n")
    assert fixer.matches(diag) == "declare_identifier"


# ---------------------------------------------------------------------------
# batch semantics


def test_batch_empty_corpus(config):
    traces, summary = batch_repair([], config=config, fixer=NullFixer())
    assert traces == []
    assert summary.overall.n == 0
    assert summary.overall.compilable_rate == 0.0


def test_null_fixer_rate_equals_already_compilable_fraction(config, c_fixtures):
    corpus = [
        c_fixtures[0],
        c_fixtures[1],
        CodeSnippet(id="bad1", source="int f(void){return missing;}", claimed_lang=LangLabel.C),
        CodeSnippet(id="bad2", source="int g(void){return also;}", claimed_lang=LangLabel.C),
    ]
    traces, summary = batch_repair(corpus, config=config, fixer=NullFixer(), jobs=2)
    assert summary.overall.n == 4
    assert summary.overall.already_compilable == 2
    assert summary.overall.repaired == 0
    assert summary.overall.compilable_rate == pytest.approx(0.5)


def test_batch_records_per_snippet_failures(config, c_fixtures):
    corpus = [
        c_fixtures[0],
        CodeSnippet(id="py", source="print(1)", claimed_lang=LangLabel.PYTHON),
    ]
    traces, summary = batch_repair(corpus, config=config, fixer=NullFixer())
    assert traces[0] is not None and traces[1] is None
    assert summary.overall.n == 1
    assert summary.failures and summary.failures[0][0] == "py"
