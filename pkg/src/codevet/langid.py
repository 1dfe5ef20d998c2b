"""Programming-language identification and mislabel detection.

Two classification routes share one report shape: a deterministic
keyword/structure scorer that runs offline, and a pluggable
chat-completion backend for model-based labeling. The scorer reads its
signature table from a versioned data file so the rules are auditable
and extensible without code changes.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Iterable, Mapping, Optional, Sequence

from .backend import ModelBackend
from .corpus import CodeSnippet, LangLabel
from .errors import BackendMalformedReply, BackendUnreachable

DEFAULT_MISLABEL_THRESHOLD = 0.6


class LangFamily(Enum):
    C_LIKE = "c-like"
    HASH = "hash"
    OTHER = "other"


# ---------------------------------------------------------------------------
# Comment stripping


def _strip_c_like(source: str) -> str:
    """Remove ``/*...*/`` and ``//...`` spans outside string/char literals.

    Block comments are replaced by a single space (they separate tokens,
    as the compiler sees it); line comments are dropped up to the
    newline. Unterminated block comments are removed to end-of-input.
    """
    out: list[str] = []
    i = 0
    n = len(source)
    state = "code"  # code | string | char | line_comment | block_comment
    while i < n:
        ch = source[i]
        nxt = source[i + 1] if i + 1 < n else ""
        if state == "code":
            if ch == "/" and nxt == "/":
                state = "line_comment"
                i += 2
                continue
            if ch == "/" and nxt == "*":
                state = "block_comment"
                i += 2
                continue
            if ch == '"':
                state = "string"
            elif ch == "'":
                state = "char"
            out.append(ch)
        elif state == "string":
            out.append(ch)
            if ch == "\\" and nxt:
                out.append(nxt)
                i += 2
                continue
            if ch == '"' or ch == "\n":
                state = "code"
        elif state == "char":
            out.append(ch)
            if ch == "\\" and nxt:
                out.append(nxt)
                i += 2
                continue
            if ch == "'" or ch == "\n":
                state = "code"
        elif state == "line_comment":
            if ch == "\n":
                out.append(ch)
                state = "code"
        elif state == "block_comment":
            if ch == "*" and nxt == "/":
                out.append(" ")
                state = "code"
                i += 2
                continue
        i += 1
    return "".join(out)


def _strip_hash(source: str, keep_directives: bool = False) -> str:
    """Remove ``#...`` to end-of-line outside string literals.

    With ``keep_directives`` a ``#`` introducing a C-preprocessor
    directive (or ``#import``, ``#!``) is left alone, which lets hash
    stripping coexist with C-family sources during scoring.
    """
    out: list[str] = []
    i = 0
    n = len(source)
    state = "code"
    while i < n:
        ch = source[i]
        nxt = source[i + 1] if i + 1 < n else ""
        if state == "code":
            if ch == "#":
                if keep_directives and _is_directive(source, i):
                    out.append(ch)
                    i += 1
                    continue
                while i < n and source[i] != "\n":
                    i += 1
                continue
            if ch == '"':
                state = "dq"
            elif ch == "'":
                state = "sq"
            out.append(ch)
        elif state in ("dq", "sq"):
            out.append(ch)
            if ch == "\\" and nxt:
                out.append(nxt)
                i += 2
                continue
            if (state == "dq" and ch == '"') or (state == "sq" and ch == "'") or ch == "\n":
                state = "code"
        i += 1
    return "".join(out)


_DIRECTIVE_RE = re.compile(
    r"#\s*(include|import|define|undef|if|ifdef|ifndef|elif|else|endif|pragma|error|warning|line)\b|#!"
)


def _is_directive(source: str, index: int) -> bool:
    return _DIRECTIVE_RE.match(source, index) is not None


def strip_comments(source: str, lang_family: LangFamily) -> str:
    """Strip comments for a language family; idempotent by construction."""
    if lang_family is LangFamily.C_LIKE:
        return _strip_c_like(source)
    if lang_family is LangFamily.HASH:
        return _strip_hash(source)
    return source


def _normalize_for_scoring(source: str) -> str:
    """Comment normalization used by the scorer when the language is unknown.

    Strips C-family comments, then hash comments that are not
    preprocessor directives, so neither family's commentary can sway
    the signature counts while ``#include``/``#import`` stay visible.
    """
    return _strip_hash(_strip_c_like(source), keep_directives=True)


# ---------------------------------------------------------------------------
# Deterministic scorer


@dataclass(frozen=True)
class _Signature:
    pattern: re.Pattern
    weights: Mapping[LangLabel, float]


def _load_signatures() -> tuple[int, tuple[_Signature, ...]]:
    data = json.loads(
        resources.files("codevet").joinpath("data/lang_signatures.json").read_text("utf-8")
    )
    signatures = tuple(
        _Signature(
            pattern=re.compile(entry["pattern"], re.MULTILINE),
            weights={LangLabel(k): float(v) for k, v in entry["weights"].items()},
        )
        for entry in data["signatures"]
    )
    return data["version"], signatures


_TABLE_VERSION, _SIGNATURES = _load_signatures()

SCORED_LABELS = tuple(label for label in LangLabel if label is not LangLabel.UNKNOWN)


@dataclass(frozen=True)
class LangScore:
    """Per-label scores plus the argmax decision.

    ``predicted`` is the argmax with ties broken by the fixed label
    enumeration order; ``confidence`` is top score over total score, or
    0 with ``predicted == Unknown`` when nothing matched.
    """

    scores: Mapping[LangLabel, float]
    predicted: LangLabel
    confidence: float

    def to_dict(self) -> dict:
        return {
            "scores": {label.value: score for label, score in self.scores.items()},
            "predicted": self.predicted.value,
            "confidence": self.confidence,
        }


def _decide(scores: dict[LangLabel, float]) -> LangScore:
    total = sum(scores.values())
    if total <= 0:
        return LangScore(scores=scores, predicted=LangLabel.UNKNOWN, confidence=0.0)
    top = max(scores.values())
    predicted = next(label for label in SCORED_LABELS if scores[label] == top)
    return LangScore(scores=scores, predicted=predicted, confidence=top / total)


def classify(snippet: CodeSnippet) -> LangScore:
    """Score a snippet against the signature table.

    Deterministic: score per label is the weighted count of signature
    matches per 1000 bytes of comment-stripped source, so duplicating a
    snippet's body never changes the prediction. Empty-after-stripping
    sources come back Unknown with confidence 0.
    """
    stripped = _normalize_for_scoring(snippet.source)
    byte_length = len(stripped.encode("utf-8"))
    if not stripped.strip():
        return LangScore(
            scores={label: 0.0 for label in SCORED_LABELS},
            predicted=LangLabel.UNKNOWN,
            confidence=0.0,
        )
    scores = {label: 0.0 for label in SCORED_LABELS}
    for signature in _SIGNATURES:
        hits = len(signature.pattern.findall(stripped))
        if not hits:
            continue
        for label, weight in signature.weights.items():
            scores[label] += weight * hits
    per_kb = 1000.0 / max(byte_length, 1)
    scores = {label: score * per_kb for label, score in scores.items()}
    return _decide(scores)


def signature_table_version() -> int:
    return _TABLE_VERSION


# ---------------------------------------------------------------------------
# Mislabel detection


@dataclass(frozen=True)
class MislabelFinding:
    snippet_id: str
    claimed: LangLabel
    predicted: LangLabel
    confidence: float

    def to_dict(self) -> dict:
        return {
            "snippet_id": self.snippet_id,
            "claimed": self.claimed.value,
            "predicted": self.predicted.value,
            "confidence": self.confidence,
        }


@dataclass
class MislabelReport:
    findings: list[MislabelFinding]
    checked_per_label: dict[LangLabel, int]

    def mislabel_rate(self, label: LangLabel) -> float:
        checked = self.checked_per_label.get(label, 0)
        if checked == 0:
            return 0.0
        flagged = sum(1 for f in self.findings if f.claimed is label)
        return flagged / checked

    def to_dict(self) -> dict:
        return {
            "findings": [f.to_dict() for f in self.findings],
            "rates": {
                label.value: self.mislabel_rate(label)
                for label in self.checked_per_label
            },
        }


def detect_mislabels(
    corpus: Sequence[CodeSnippet],
    threshold: float = DEFAULT_MISLABEL_THRESHOLD,
    scores: Optional[Sequence[LangScore]] = None,
) -> MislabelReport:
    """Flag snippets whose claimed label disagrees with the classifier.

    A finding is emitted only when both labels are known, they differ,
    and the classifier confidence clears the threshold; raising the
    threshold can only shrink the finding set. Precomputed ``scores``
    (parallel to ``corpus``) may be passed to avoid re-classifying.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must be in [0, 1]")
    findings: list[MislabelFinding] = []
    checked: dict[LangLabel, int] = {}
    for index, snippet in enumerate(corpus):
        if snippet.claimed_lang is LangLabel.UNKNOWN:
            continue
        checked[snippet.claimed_lang] = checked.get(snippet.claimed_lang, 0) + 1
        score = scores[index] if scores is not None else classify(snippet)
        if score.predicted is LangLabel.UNKNOWN:
            continue
        if score.predicted is snippet.claimed_lang:
            continue
        if score.confidence >= threshold:
            findings.append(
                MislabelFinding(
                    snippet_id=snippet.id,
                    claimed=snippet.claimed_lang,
                    predicted=score.predicted,
                    confidence=score.confidence,
                )
            )
    return MislabelReport(findings=findings, checked_per_label=checked)


# ---------------------------------------------------------------------------
# Model-backed classification

CLASSIFY_INSTRUCTION = (
    "Identify the programming language of the following code. Answer with one word."
)

# Reply parsing: earliest match wins; alternatives that share a start
# position are ordered longest/most-specific first so "c++" never reads
# as "c". Guard characters keep "c" from matching inside words.
_LABEL_TOKEN_RE = re.compile(
    r"(?<![\w+#])(?:"
    r"(?P<objc>objective[\s_-]?c|objc)|"
    r"(?P<cpp>c\+\+|cpp|cxx)|"
    r"(?P<csharp>c#|c\s?sharp|csharp)|"
    r"(?P<assembly>assembly|assembler|asm)|"
    r"(?P<python>python)|"
    r"(?P<java>java)|"
    r"(?P<go>golang|go)|"
    r"(?P<ruby>ruby)|"
    r"(?P<r>r)|"
    r"(?P<c>c)"
    r")(?![\w+#])",
    re.IGNORECASE,
)

_GROUP_TO_LABEL = {
    "objc": LangLabel.OBJECTIVE_C,
    "cpp": LangLabel.CPP,
    "csharp": LangLabel.CSHARP,
    "assembly": LangLabel.ASSEMBLY,
    "python": LangLabel.PYTHON,
    "java": LangLabel.JAVA,
    "go": LangLabel.GO,
    "ruby": LangLabel.RUBY,
    "r": LangLabel.R,
    "c": LangLabel.C,
}


def parse_label_reply(reply: str) -> LangLabel:
    """Extract the first recognized label token from a backend reply."""
    match = _LABEL_TOKEN_RE.search(reply)
    if not match:
        return LangLabel.UNKNOWN
    group = next(name for name, value in match.groupdict().items() if value is not None)
    return _GROUP_TO_LABEL[group]


def build_classify_prompt(snippet: CodeSnippet) -> str:
    return f"{CLASSIFY_INSTRUCTION}\n\n{_normalize_for_scoring(snippet.source)}"


def model_classify(snippet: CodeSnippet, backend: ModelBackend) -> LangScore:
    """Ask a model backend for the language; Unknown on unparseable replies.

    Transport failures (``BackendUnreachable``) propagate so batch
    callers can record them per snippet.
    """
    reply = backend.complete([{"role": "user", "content": build_classify_prompt(snippet)}])
    predicted = parse_label_reply(reply)
    scores = {label: 0.0 for label in SCORED_LABELS}
    if predicted is LangLabel.UNKNOWN:
        return LangScore(scores=scores, predicted=LangLabel.UNKNOWN, confidence=0.0)
    scores[predicted] = 1.0
    return LangScore(scores=scores, predicted=predicted, confidence=1.0)


@dataclass
class BatchClassifyResult:
    scores: list[Optional[LangScore]]
    failures: list[tuple[str, str]] = field(default_factory=list)  # (snippet id, reason)


def model_classify_batch(
    corpus: Sequence[CodeSnippet],
    backend: ModelBackend,
    max_in_flight: int = 4,
) -> BatchClassifyResult:
    """Classify a corpus through a backend with a bounded in-flight limit.

    Per-snippet backend failures are recorded, never abort the batch;
    the scores list is parallel to the corpus with None at failures.
    """
    from concurrent.futures import ThreadPoolExecutor

    result = BatchClassifyResult(scores=[None] * len(corpus))

    def worker(index: int, snippet: CodeSnippet):
        try:
            result.scores[index] = model_classify(snippet, backend)
        except (BackendUnreachable, BackendMalformedReply) as exc:
            result.failures.append((snippet.id, str(exc)))

    with ThreadPoolExecutor(max_workers=max(1, max_in_flight)) as pool:
        futures = [pool.submit(worker, i, s) for i, s in enumerate(corpus)]
        for future in futures:
            future.result()
    return result
