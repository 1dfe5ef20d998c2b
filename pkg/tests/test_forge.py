from __future__ import annotations

import json

import pytest

from codevet.compiledrv import compile_check
from codevet.corpus import CodeSnippet, LangLabel
from codevet.errors import NoErrorDiagnostic
from codevet.forge import (
    InstructionRecord,
    forge_dataset,
    load_dataset,
    make_record,
    write_dataset,
    write_manifest,
)
from codevet.inject import MutationKind, MutationRecord, inject_error, revert


@pytest.fixture(scope="module")
def typedef_case(config):
    source = "typedef int tick;\ntick bump(tick t){tick r = t + 1; return r;}\n"
    snippet = CodeSnippet(id="tick", source=source, claimed_lang=LangLabel.C)
    mutated, record = inject_error(
        source, LangLabel.C, MutationKind.DROP_TYPEDEF, seed=6, snippet_id="tick", config=config
    )
    outcome = compile_check(mutated, LangLabel.C, config)
    return snippet, mutated, record, outcome


def test_instruction_template_exact(typedef_case):
    snippet, mutated, mutation, outcome = typedef_case
    record = make_record(snippet, mutated, mutation, outcome)
    first_error = outcome.errors()[0]
    assert record.instruction == (
        f"Fix the compiler error of the given C code: {first_error.raw}"
    )
    assert "unknown type name" in record.instruction
    assert record.input == mutated
    assert record.response == snippet.source


def test_record_revert_invariant(typedef_case):
    snippet, mutated, mutation, outcome = typedef_case
    record = make_record(snippet, mutated, mutation, outcome)
    assert revert(record.input, record.mutation) == record.response


def test_cpp_display_name_in_instruction(config):
    source = "typedef long span;\nspan widen(span s){span r = s * 2; return r;}\n"
    snippet = CodeSnippet(id="w", source=source, claimed_lang=LangLabel.CPP)
    mutated, mutation = inject_error(
        source, LangLabel.CPP, MutationKind.DROP_TYPEDEF, seed=1, snippet_id="w", config=config
    )
    outcome = compile_check(mutated, LangLabel.CPP, config)
    record = make_record(snippet, mutated, mutation, outcome)
    assert record.instruction.startswith("Fix the compiler error of the given C++ code: ")


def test_make_record_rejects_compilable_outcome(config, typedef_case):
    snippet, mutated, mutation, _ = typedef_case
    good = compile_check(snippet.source, LangLabel.C, config)
    with pytest.raises(ValueError):
        make_record(snippet, mutated, mutation, good)


def test_make_record_requires_error_diagnostic(typedef_case):
    snippet, mutated, mutation, outcome = typedef_case
    import dataclasses

    no_errors = dataclasses.replace(outcome, diagnostics=(), compilable=False)
    with pytest.raises(NoErrorDiagnostic):
        make_record(snippet, mutated, mutation, no_errors)


def _small_corpus():
    compilable = [
        CodeSnippet(id="a", source="typedef int t0;\nt0 f(t0 x){t0 y = x + 1; return y;}\n",
                    claimed_lang=LangLabel.C),
        CodeSnippet(id="b", source="int g(int a,int b){int r = a * b; return r;}\n",
                    claimed_lang=LangLabel.C),
        CodeSnippet(id="c", source="int h(int n){ if (n > 2) { return 1; } return 0; }\n",
                    claimed_lang=LangLabel.C),
        CodeSnippet(id="d", source="typedef long t1;\nt1 k(t1 x){t1 y = x - 1; return y;}\n",
                    claimed_lang=LangLabel.CPP),
    ]
    broken = [
        CodeSnippet(id="broken1", source="int broke(void){return missing;}\n",
                    claimed_lang=LangLabel.C),
        CodeSnippet(id="broken2", source="int also(void){return nothere;}\n",
                    claimed_lang=LangLabel.C),
    ]
    other_lang = [CodeSnippet(id="py", source="print(1)\n", claimed_lang=LangLabel.PYTHON)]
    oversized = [
        CodeSnippet(id="big", source="int big(void){return 0;}" + " " * 4000 + "\n",
                    claimed_lang=LangLabel.C)
    ]
    return compilable + broken + other_lang + oversized


def test_pipeline_counts_and_monotone_manifest(config):
    corpus = _small_corpus()
    result = forge_dataset(corpus, kinds=(MutationKind.DROP_OPERATOR,), seed=3,
                           max_tokens=512, config=config, jobs=4)
    manifest = result.manifest
    assert manifest.collected == 8
    assert manifest.compilable == 5  # 4 good + 1 oversized (compiles, dropped later)
    assert manifest.length_kept == 4
    assert manifest.emitted == len(result.records)
    assert manifest.collected >= manifest.compilable >= manifest.length_kept >= manifest.emitted
    reasons = {entry["reason"] for entry in manifest.skipped}
    assert "unsupported-language" in reasons
    assert "non-compilable" in reasons
    assert "over-length" in reasons
    assert manifest.settings["seed"] == 3
    assert manifest.settings["kinds"] == ["op"]


def test_empty_corpus_zeroed_manifest(config):
    result = forge_dataset([], kinds=(MutationKind.DROP_VAR_INIT,), seed=0, config=config)
    assert result.records == []
    assert result.manifest.collected == 0
    assert result.manifest.compilable == 0
    assert result.manifest.emitted == 0


def test_every_record_input_breaks_and_response_compiles(config):
    corpus = _small_corpus()
    result = forge_dataset(corpus, kinds=(MutationKind.DROP_OPERATOR, MutationKind.DROP_TYPEDEF),
                           seed=5, max_tokens=512, config=config, jobs=4)
    assert result.records
    for record in result.records:
        assert not compile_check(record.input, record.lang, config).compilable
        assert compile_check(record.response, record.lang, config).compilable
        assert revert(record.input, record.mutation) == record.response


def test_dataset_round_trip_and_determinism(config, tmp_path):
    corpus = _small_corpus()
    kinds = (MutationKind.DROP_OPERATOR, MutationKind.DROP_PAREN)
    first = forge_dataset(corpus, kinds=kinds, seed=11, max_tokens=512, config=config, jobs=4)
    second = forge_dataset(corpus, kinds=kinds, seed=11, max_tokens=512, config=config, jobs=2)

    path_a, path_b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_dataset(first.records, path_a)
    write_dataset(second.records, path_b)
    assert path_a.read_bytes() == path_b.read_bytes()

    manifest_a, manifest_b = tmp_path / "a.json", tmp_path / "b.json"
    write_manifest(first.manifest, manifest_a)
    write_manifest(second.manifest, manifest_b)
    # jobs is a setting, so normalize it before comparing the echo
    dict_a, dict_b = first.manifest.to_dict(), second.manifest.to_dict()
    dict_a["settings"].pop("jobs"), dict_b["settings"].pop("jobs")
    assert dict_a == dict_b

    loaded = load_dataset(path_a)
    assert loaded == first.records


def test_different_seed_changes_output(config, tmp_path):
    corpus = _small_corpus()
    kinds = (MutationKind.DROP_PAREN,)
    one = forge_dataset(corpus, kinds=kinds, seed=1, max_tokens=512, config=config)
    two = forge_dataset(corpus, kinds=kinds, seed=2, max_tokens=512, config=config)
    mutations_one = [r.mutation.span for r in one.records]
    mutations_two = [r.mutation.span for r in two.records]
    assert mutations_one != mutations_two


def test_serialized_record_shape(config, tmp_path, typedef_case):
    snippet, mutated, mutation, outcome = typedef_case
    record = make_record(snippet, mutated, mutation, outcome)
    path = tmp_path / "one.jsonl"
    write_dataset([record], path)
    obj = json.loads(path.read_text().splitlines()[0])
    assert set(obj) == {"instruction", "input", "response", "meta"}
    assert set(obj["meta"]) == {"snippet_id", "lang", "mutation", "diagnostics"}
    assert obj["meta"]["lang"] == "c"
    assert InstructionRecord.from_dict(obj) == record
