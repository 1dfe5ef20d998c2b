from __future__ import annotations

import pytest

from codevet.compiledrv import Category, compile_check
from codevet.corpus import CodeSnippet, LangLabel
from codevet.metrics import (
    k_sweep,
    render_class_report,
    render_compile_report,
    render_ksweep_report,
    render_repair_summary,
    summarize_classification,
    summarize_compile,
)
from codevet.repair import NullFixer, OracleFixer, RuleFixer, batch_repair

from corpora import multi_error_broken


def _snip(sid, lang=LangLabel.C, source="int main(void){return 0;}"):
    return CodeSnippet(id=sid, source=source, claimed_lang=lang)


def test_empty_compile_summary():
    report = summarize_compile([])
    assert report.n == 0
    assert report.rate is None


def test_three_of_four_rate(config):
    good = "int main(void){return 0;}"
    bad = "int f(void){return missing;}"
    pairs = []
    for i, source in enumerate([good, good, good, bad]):
        snippet = _snip(f"s{i}", source=source)
        pairs.append((snippet, compile_check(source, LangLabel.C, config)))
    report = summarize_compile(pairs)
    assert report.n == 4
    assert report.compilable == 3
    assert report.rate == pytest.approx(0.75)
    assert report.category_histogram[Category.SEMANTIC] == 1
    rendered = render_compile_report(report)
    assert "75.00%" in rendered


def test_histogram_counts_error_diagnostics_not_snippets(config):
    source = "int f(void){return a;}\nint g(void){return b;}\n"
    snippet = _snip("multi", source=source)
    outcome = compile_check(source, LangLabel.C, config)
    report = summarize_compile([(snippet, outcome)])
    assert report.n == 1
    assert sum(report.category_histogram.values()) == len(outcome.errors())
    assert sum(report.category_histogram.values()) >= 2


def test_by_language_subreports(config):
    pairs = [
        (_snip("c1"), compile_check("int main(void){return 0;}", LangLabel.C, config)),
        (_snip("x1", lang=LangLabel.CPP),
         compile_check("int f(void){return missing;}", LangLabel.CPP, config)),
    ]
    report = summarize_compile(pairs)
    assert report.by_language[LangLabel.C].compilable == 1
    assert report.by_language[LangLabel.CPP].compilable == 0


# ---------------------------------------------------------------------------
# classification metrics


def test_all_correct_gives_unit_metrics():
    pairs = [(LangLabel.C, LangLabel.C)] * 5 + [(LangLabel.GO, LangLabel.GO)] * 5
    report = summarize_classification(pairs)
    for metrics in report.per_label.values():
        assert metrics.precision == 1.0
        assert metrics.recall == 1.0
        assert metrics.f1 == 1.0
    assert report.accuracy == 1.0


def test_hand_computed_three_class_confusion():
    # truth A: 8 as A, 2 as B; truth B: 9 as B, 1 as C; truth C: 10 as C
    a, b, c = LangLabel.C, LangLabel.CPP, LangLabel.PYTHON
    pairs = [(a, a)] * 8 + [(a, b)] * 2 + [(b, b)] * 9 + [(b, c)] + [(c, c)] * 10
    report = summarize_classification(pairs)
    assert report.per_label[a].precision == pytest.approx(1.0)        # 8 / 8
    assert report.per_label[a].recall == pytest.approx(0.8)           # 8 / 10
    assert report.per_label[a].f1 == pytest.approx(2 * 1.0 * 0.8 / 1.8)
    assert report.per_label[b].precision == pytest.approx(9 / 11)
    assert report.per_label[b].recall == pytest.approx(0.9)
    assert report.per_label[c].precision == pytest.approx(10 / 11)
    assert report.per_label[c].recall == pytest.approx(1.0)
    assert report.accuracy == pytest.approx(27 / 30)
    assert report.confusion[a][b] == 2
    assert sum(report.confusion[a].values()) == 10  # row sums = truth counts


def test_unknown_prediction_counts_against_recall():
    pairs = [(LangLabel.C, LangLabel.C)] * 3 + [(LangLabel.C, LangLabel.UNKNOWN)]
    report = summarize_classification(pairs)
    assert report.per_label[LangLabel.C].recall == pytest.approx(0.75)
    assert report.per_label[LangLabel.C].precision == pytest.approx(1.0)


def test_empty_input_rejected():
    with pytest.raises(ValueError):
        summarize_classification([])


def test_unknown_truth_rejected():
    with pytest.raises(ValueError):
        summarize_classification([(LangLabel.UNKNOWN, LangLabel.C)])


def test_table_layout_render_order():
    pairs = [(LangLabel.C, LangLabel.C), (LangLabel.CPP, LangLabel.CPP)]
    rendered = render_class_report(summarize_classification(pairs))
    header = rendered.splitlines()[0]
    assert header.index("Precision") < header.index("Recall") < header.index("F1")
    assert "1.00" in rendered


# ---------------------------------------------------------------------------
# k_sweep


def test_single_k_report(config):
    corpus = multi_error_broken()[:2]
    report = k_sweep(corpus, config=config, fixer=RuleFixer(), ks=[1], jobs=2)
    assert list(report.rows) == [1]


def test_ks_must_be_strictly_increasing(config):
    with pytest.raises(ValueError):
        k_sweep([], config=config, fixer=NullFixer(), ks=[2, 1])
    with pytest.raises(ValueError):
        k_sweep([], config=config, fixer=NullFixer(), ks=[1, 1])


def test_oracle_reaches_plateau_at_k1(config):
    corpus = [
        CodeSnippet(id="fixable", source="int f(void){return missing;}",
                    claimed_lang=LangLabel.C),
    ]
    fixer = OracleFixer({"fixable": "int f(void){int missing = 0; return missing;}"})
    report = k_sweep(corpus, config=config, fixer=fixer, ks=[1, 2, 3], jobs=1)
    rates = [report.rows[k][LangLabel.C] for k in (1, 2, 3)]
    assert rates == [1.0, 1.0, 1.0]


def test_rulefixer_sweep_monotone_with_plateau(config):
    corpus = multi_error_broken()
    report = k_sweep(corpus, config=config, fixer=RuleFixer(), ks=[1, 2, 3, 4, 5], jobs=4)
    for lang in (LangLabel.C, LangLabel.CPP):
        rates = [report.rows[k][lang] for k in (1, 2, 3, 4, 5)]
        assert all(x <= y for x, y in zip(rates, rates[1:]))
        assert rates[3] == rates[4]
        assert rates[4] > rates[0]  # the fixture set makes the curve actually rise
    rendered = render_ksweep_report(report)
    assert rendered.splitlines()[0].startswith("K")


def test_repair_summary_render(config):
    corpus = multi_error_broken()[:2]
    _, summary = batch_repair(corpus, config=config, fixer=RuleFixer(), max_iterations=3, jobs=2)
    rendered = render_repair_summary(summary, name="rules")
    assert "Comp-C (%)" in rendered and "Comp-C++ (%)" in rendered
    assert "rules" in rendered
