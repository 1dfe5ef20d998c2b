#!/usr/bin/env python3
"""Capture golden compiler outputs for the diagnostics-parsing fixtures.

Compiles 30 seed programs (10 per intended category) with the pinned
compiler configuration, verifies each first error matches the authored
expectation (line, message substring, category), and freezes the raw
stderr plus a labels file under tests/fixtures/golden/.

Rerun when the pinned compiler changes; review the diff before
committing refreshed outputs.
"""

from __future__ import annotations

import json
import os
import subprocess
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from codevet.compiledrv import CompilerConfig, parse_diagnostics, Severity

OUT_DIR = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "golden"

# name -> (lang, source, expected line, message substring, category, precedence case)
SEEDS = {
    # --- syntax ---
    "syn01-missing-semi-decl": (
        "c",
        "int main(void) {\n    int x = 1\n    return x;\n}\n",
        3, "expected", "syntax", False,
    ),
    "syn02-missing-semi-stmt": (
        "c",
        "int bump(int a) {\n    a = a + 1\n    return a;\n}\n",
        2, "expected", "syntax", False,
    ),
    "syn03-missing-close-paren": (
        "c",
        "int sign(int x) {\n    if (x > 0 {\n        return 1;\n    }\n    return 0;\n}\n",
        2, "expected ')'", "syntax", False,
    ),
    "syn04-missing-open-paren": (
        "c",
        "int sign(int x) {\n    if x > 0) {\n        return 1;\n    }\n    return 0;\n}\n",
        2, "expected '('", "syntax", False,
    ),
    "syn05-missing-close-brace": (
        "c",
        "int main(void) {\n    int x = 1;\n    return x;\n",
        3, "expected declaration or statement at end of input", "syntax", False,
    ),
    "syn06-stray-backslash": (
        "c",
        "int main(void) {\n    int x\\y = 4;\n    return x;\n}\n",
        2, "stray", "syntax", False,
    ),
    "syn07-unterminated-comment": (
        "c",
        "/* never closed\nint main(void) {\n    return 0;\n}\n",
        1, "unterminated comment", "syntax", False,
    ),
    "syn08-missing-close-bracket": (
        "c",
        "int main(void) {\n    int a[2;\n    return 0;\n}\n",
        2, "expected ']'", "syntax", False,
    ),
    "syn09-missing-expression": (
        "c",
        "int main(void) {\n    int x = ;\n    return x;\n}\n",
        2, "expected expression", "syntax", False,
    ),
    "syn10-missing-semi-class": (
        "cpp",
        "class Empty {\n}\nint main() {\n    return 0;\n}\n",
        2, "expected ';' after class definition", "syntax", False,
    ),
    # --- semantic ---
    "sem01-undeclared-var": (
        "c",
        "int main(void) {\n    return q;\n}\n",
        2, "'q' undeclared", "semantic", False,
    ),
    "sem02-unknown-typedef": (
        "c",
        "int g(void) {\n    myint v = 2;\n    return v;\n}\n",
        2, "unknown type name 'myint'", "semantic", False,
    ),
    "sem03-conflicting-fn": (
        "c",
        "int f(void);\ndouble f(void) {\n    return 1.0;\n}\n",
        2, "conflicting types for 'f'", "semantic", False,
    ),
    "sem04-conflicting-var": (
        "c",
        "int x;\ndouble x;\n",
        2, "conflicting types for 'x'", "semantic", False,
    ),
    "sem05-unknown-param-type": (
        "c",
        "void h(badtype t) {\n}\n",
        1, "unknown type name 'badtype'", "semantic", False,
    ),
    "sem06-incompatible-init": (
        "c",
        "struct S { int a; };\nint main(void) {\n    struct S s = {1};\n    int x = s;\n    return x;\n}\n",
        4, "incompatible types", "semantic", False,
    ),
    "sem07-incompatible-return": (
        "c",
        "struct S { int a; };\nstruct S make(void) {\n    int y = 1;\n    return y;\n}\n",
        4, "incompatible types", "semantic", False,
    ),
    "sem08-unknown-type-filescope": (
        "c",
        "P p;\nint main(void) {\n    return 0;\n}\n",
        1, "unknown type name 'P'", "semantic", False,
    ),
    "sem09-undeclared-term": (
        "c",
        "int total(int a) {\n    return a + missing_term;\n}\n",
        2, "'missing_term' undeclared", "semantic", False,
    ),
    "sem10-conflicting-typedef": (
        "c",
        "typedef int T;\ntypedef double T;\n",
        2, "conflicting types for 'T'", "semantic", False,
    ),
    # --- scope (C++ diagnostics) ---
    "sco01-plain": (
        "cpp",
        "int main() {\n    return mystery;\n}\n",
        2, "'mystery' was not declared in this scope", "scope", False,
    ),
    "sco02-precedence-undefined": (
        "cpp",
        "int main() {\n    return undefined_total;\n}\n",
        2, "'undefined_total' was not declared in this scope", "scope", True,
    ),
    "sco03-precedence-undeclared": (
        "cpp",
        "int main() {\n    return undeclared_sum;\n}\n",
        2, "'undeclared_sum' was not declared in this scope", "scope", True,
    ),
    "sco04-precedence-incompatible": (
        "cpp",
        "int main() {\n    return incompatible_mode;\n}\n",
        2, "'incompatible_mode' was not declared in this scope", "scope", True,
    ),
    "sco05-block-leak": (
        "cpp",
        "int main() {\n    {\n        int inner = 1;\n    }\n    return inner;\n}\n",
        5, "'inner' was not declared in this scope", "scope", False,
    ),
    "sco06-for-leak": (
        "cpp",
        "int sum(int n) {\n    int total = 0;\n    for (int i = 0; i < n; i++) {\n        total += i;\n    }\n    return i;\n}\n",
        6, "'i' was not declared in this scope", "scope", False,
    ),
    "sco07-if-condition-leak": (
        "cpp",
        "int probe(int x) {\n    if (int got = x) {\n        return got;\n    }\n    return got;\n}\n",
        5, "'got' was not declared in this scope", "scope", False,
    ),
    "sco08-other-function-local": (
        "cpp",
        "int first() {\n    int secret = 7;\n    return secret;\n}\nint second() {\n    return secret;\n}\n",
        6, "'secret' was not declared in this scope", "scope", False,
    ),
    "sco09-while-leak": (
        "cpp",
        "int drain(int n) {\n    while (n > 0) {\n        int step = 1;\n        n -= step;\n    }\n    return step;\n}\n",
        6, "'step' was not declared in this scope", "scope", False,
    ),
    "sco10-namespace-hidden": (
        "cpp",
        "namespace vault {\nint hidden = 1;\n}\nint main() {\n    return hidden;\n}\n",
        5, "'hidden' was not declared in this scope", "scope", False,
    ),
}


def main() -> int:
    config = CompilerConfig()
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    labels = {}
    problems = []
    for name, (lang, source, exp_line, substring, category, precedence) in SEEDS.items():
        ext = "c" if lang == "c" else "cpp"
        filename = f"snippet.{ext}"
        with tempfile.TemporaryDirectory() as tmp:
            with open(os.path.join(tmp, filename), "w", encoding="utf-8") as fh:
                fh.write(source)
            std = config.std_c if lang == "c" else config.std_cpp
            proc = subprocess.run(
                [config.command, "-fsyntax-only", f"-std={std}", filename],
                cwd=tmp, capture_output=True, text=True,
                env={**os.environ, "LC_ALL": "C", "LANG": "C"},
            )
        diagnostics = parse_diagnostics(proc.stderr)
        errors = [d for d in diagnostics if d.severity is Severity.ERROR]
        if not errors:
            problems.append(f"{name}: no Error diagnostic (exit {proc.returncode})")
            continue
        first = errors[0]
        if substring not in first.message:
            problems.append(f"{name}: expected {substring!r} in {first.message!r}")
        if first.line != exp_line:
            problems.append(f"{name}: expected line {exp_line}, got {first.line}")
        rule_category = first.category.value
        if precedence and rule_category != "scope":
            problems.append(f"{name}: precedence case must categorize scope, got {rule_category}")
        (OUT_DIR / f"{name}.{ext}").write_text(source, encoding="utf-8")
        (OUT_DIR / f"{name}.stderr.txt").write_text(proc.stderr, encoding="utf-8")
        labels[name] = {
            "lang": lang,
            "line": first.line,
            "column": first.column,
            "severity": "error",
            "category": category,  # hand label: the human-judged category
            "message_substring": substring,
            "precedence_case": precedence,
        }
        if rule_category != category:
            print(f"note: {name}: keyword rule says {rule_category}, hand label {category}")
    if problems:
        print("CAPTURE FAILED:")
        for p in problems:
            print(" -", p)
        return 1
    agreements = 0
    for name, label in labels.items():
        stderr_text = (OUT_DIR / f"{name}.stderr.txt").read_text(encoding="utf-8")
        first = [d for d in parse_diagnostics(stderr_text) if d.severity is Severity.ERROR][0]
        if first.category.value == label["category"]:
            agreements += 1
    rate = agreements / len(labels)
    print(f"keyword-rule vs hand-label agreement: {agreements}/{len(labels)} = {rate:.1%}")
    if rate < 0.9:
        print("CAPTURE FAILED: agreement below 90%")
        return 1
    with open(OUT_DIR / "labels.json", "w", encoding="utf-8") as fh:
        json.dump(labels, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"captured {len(labels)} golden outputs into {OUT_DIR}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
