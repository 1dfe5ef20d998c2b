"""Aggregate outcomes into report shapes: compilability, error-category
histograms, classification precision/recall/F1, repair rates, and the
iteration-cap sweep.

Counts are exact integers folded single-threaded; rates are computed
from counts and rounded only at render time. Absolute values from any
external study are never asserted here — shapes and invariants are the
contract.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .compiledrv import Category, CompileOutcome, CompilerConfig, Severity
from .corpus import CodeSnippet, LangLabel
from .repair import BatchRepairSummary, FixerBackend, batch_repair


# ---------------------------------------------------------------------------
# Compilability


@dataclass
class CorpusReport:
    n: int = 0
    compilable: int = 0
    category_histogram: Counter = field(default_factory=Counter)
    by_language: dict[LangLabel, "CorpusReport"] = field(default_factory=dict)

    @property
    def rate(self) -> Optional[float]:
        if self.n == 0:
            return None
        return self.compilable / self.n

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "compilable": self.compilable,
            "rate": self.rate,
            "category_histogram": {c.value: k for c, k in sorted(
                self.category_histogram.items(), key=lambda item: item[0].value
            )},
            "by_language": {
                lang.value: report.to_dict() for lang, report in self.by_language.items()
            },
        }


def summarize_compile(
    outcomes: Iterable[tuple[CodeSnippet, CompileOutcome]]
) -> CorpusReport:
    """Fold per-snippet outcomes into counts and an error-category histogram.

    Histogram counts sum to the number of Error diagnostics observed,
    not to the snippet count.
    """
    report = CorpusReport()
    for snippet, outcome in outcomes:
        sub = report.by_language.setdefault(snippet.claimed_lang, CorpusReport())
        for target in (report, sub):
            target.n += 1
            if outcome.compilable:
                target.compilable += 1
            for diagnostic in outcome.diagnostics:
                if diagnostic.severity is Severity.ERROR:
                    target.category_histogram[diagnostic.category] += 1
    return report


def render_compile_report(report: CorpusReport) -> str:
    lines = []
    rate = "n/a" if report.rate is None else f"{report.rate * 100:.2f}%"
    lines.append(f"snippets: {report.n}   compilable: {report.compilable}   rate: {rate}")
    if report.category_histogram:
        lines.append("error categories:")
        for category in Category:
            count = report.category_histogram.get(category, 0)
            if count:
                lines.append(f"  {category.value:<10} {count}")
    for lang, sub in report.by_language.items():
        sub_rate = "n/a" if sub.rate is None else f"{sub.rate * 100:.2f}%"
        lines.append(f"  [{lang.display_name}] n={sub.n} compilable={sub.compilable} rate={sub_rate}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Classification


@dataclass
class LabelMetrics:
    precision: float
    recall: float
    f1: float


@dataclass
class ClassReport:
    labels: list[LangLabel]
    per_label: dict[LangLabel, LabelMetrics]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    accuracy: float
    confusion: dict[LangLabel, dict[LangLabel, int]]

    def to_dict(self) -> dict:
        return {
            "per_label": {
                label.value: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                }
                for label, m in self.per_label.items()
            },
            "macro": {
                "precision": self.macro_precision,
                "recall": self.macro_recall,
                "f1": self.macro_f1,
            },
            "accuracy": self.accuracy,
            "confusion": {
                truth.value: {pred.value: count for pred, count in row.items()}
                for truth, row in self.confusion.items()
            },
        }


def summarize_classification(
    pairs: Sequence[tuple[LangLabel, LangLabel]]
) -> ClassReport:
    """Standard multi-class metrics from (truth, predicted) pairs.

    Truth labels must be known; predictions may be Unknown (they count
    against recall but form no label row of their own unless predicted).
    """
    if not pairs:
        raise ValueError("empty input: no (truth, predicted) pairs to summarize")
    if any(truth is LangLabel.UNKNOWN for truth, _ in pairs):
        raise ValueError("truth labels must not be Unknown")
    labels = sorted(
        {truth for truth, _ in pairs}, key=lambda label: list(LangLabel).index(label)
    )
    confusion: dict[LangLabel, dict[LangLabel, int]] = {t: {} for t in labels}
    for truth, predicted in pairs:
        confusion[truth][predicted] = confusion[truth].get(predicted, 0) + 1
    per_label: dict[LangLabel, LabelMetrics] = {}
    for label in labels:
        tp = confusion[label].get(label, 0)
        truth_total = sum(confusion[label].values())
        predicted_total = sum(row.get(label, 0) for row in confusion.values())
        precision = tp / predicted_total if predicted_total else 0.0
        recall = tp / truth_total if truth_total else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_label[label] = LabelMetrics(precision, recall, f1)
    n = len(pairs)
    correct = sum(1 for truth, predicted in pairs if truth is predicted)
    return ClassReport(
        labels=labels,
        per_label=per_label,
        macro_precision=sum(m.precision for m in per_label.values()) / len(labels),
        macro_recall=sum(m.recall for m in per_label.values()) / len(labels),
        macro_f1=sum(m.f1 for m in per_label.values()) / len(labels),
        accuracy=correct / n,
        confusion=confusion,
    )


def render_class_report(report: ClassReport, name: str = "rules") -> str:
    """Plain-text table in the Precision / Recall / F1 column order."""
    lines = [f"{'Label':<14}{'Precision':>10}{'Recall':>8}{'F1':>6}"]
    for label in report.labels:
        metrics = report.per_label[label]
        lines.append(
            f"{label.display_name:<14}{metrics.precision:>10.2f}{metrics.recall:>8.2f}{metrics.f1:>6.2f}"
        )
    lines.append(
        f"{name + ' (macro)':<14}{report.macro_precision:>10.2f}"
        f"{report.macro_recall:>8.2f}{report.macro_f1:>6.2f}"
    )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Repair / iteration sweep


def render_repair_summary(summary: BatchRepairSummary, name: str = "rules") -> str:
    """Model-vs-compilability table: one row, Comp-C / Comp-C++ columns."""
    c = summary.per_language.get(LangLabel.C)
    cpp = summary.per_language.get(LangLabel.CPP)
    c_rate = f"{c.compilable_rate * 100:.1f}" if c and c.n else "n/a"
    cpp_rate = f"{cpp.compilable_rate * 100:.1f}" if cpp and cpp.n else "n/a"
    lines = [
        f"{'Fixer':<16}{'Comp-C (%)':>12}{'Comp-C++ (%)':>14}",
        f"{name:<16}{c_rate:>12}{cpp_rate:>14}",
    ]
    return "\n".join(lines) + "\n"


@dataclass
class KSweepReport:
    """Per-K compilability rates for C and C++ (fractions, not percent)."""

    rows: dict[int, dict[LangLabel, Optional[float]]] = field(default_factory=dict)
    invalid: dict[int, str] = field(default_factory=dict)

    def rate(self, k: int, lang: LangLabel) -> Optional[float]:
        return self.rows.get(k, {}).get(lang)

    def to_dict(self) -> dict:
        return {
            "rows": {
                str(k): {lang.value: rate for lang, rate in row.items()}
                for k, row in self.rows.items()
            },
            "invalid": {str(k): reason for k, reason in self.invalid.items()},
        }


def k_sweep(
    corpus: Sequence[CodeSnippet],
    config: CompilerConfig | None = None,
    fixer: FixerBackend | None = None,
    ks: Sequence[int] = (1, 2, 3, 4, 5),
    jobs: int | None = None,
) -> KSweepReport:
    """Run batch_repair per iteration cap with identical config.

    A failing cell is marked invalid instead of aborting the sweep.
    With a deterministic fixer the rates are non-decreasing in K.
    """
    if list(ks) != sorted(set(ks)) or any(k < 1 for k in ks):
        raise ValueError("ks must be strictly increasing positive integers")
    report = KSweepReport()
    for k in ks:
        try:
            _, summary = batch_repair(
                corpus, config=config, fixer=fixer, max_iterations=k, jobs=jobs
            )
        except Exception as exc:  # cell-level isolation
            report.invalid[k] = str(exc)
            continue
        row: dict[LangLabel, Optional[float]] = {}
        for lang in (LangLabel.C, LangLabel.CPP):
            counts = summary.per_language.get(lang)
            row[lang] = counts.compilable_rate if counts and counts.n else None
        report.rows[k] = row
    return report


def render_ksweep_report(report: KSweepReport) -> str:
    lines = [f"{'K':<4}{'Comp-C (%)':>12}{'Comp-C++ (%)':>14}"]
    for k in sorted(report.rows):
        row = report.rows[k]
        c = row.get(LangLabel.C)
        cpp = row.get(LangLabel.CPP)
        c_text = f"{c * 100:.1f}" if c is not None else "n/a"
        cpp_text = f"{cpp * 100:.1f}" if cpp is not None else "n/a"
        lines.append(f"{k:<4}{c_text:>12}{cpp_text:>14}")
    for k in sorted(report.invalid):
        lines.append(f"{k:<4}{'invalid: ' + report.invalid[k]}")
    return "\n".join(lines) + "\n"
