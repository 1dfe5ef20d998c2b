"""codevet command-line interface.

Subcommands map one-to-one onto the pipeline stages: ingest, check,
classify, repair, inject, forge, report. Settings merge with precedence
flags > environment > config file > defaults, and every effective
setting is echoed into the run's report/manifest so a run can be
reproduced from its outputs alone.

Exit codes: 0 success; 1 when per-item failures occurred (rejected
corpus lines, backend failures); 2 for configuration or environment
errors (bad flags, missing compiler, unreadable files).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .backend import HttpModelBackend
from .compiledrv import (
    CompileOutcome,
    CompilerConfig,
    compile_many,
    resolve_check_lang,
)
from .corpus import (
    CodeSnippet,
    DuplicateId,
    LangLabel,
    LoadResult,
    filter_by_length,
    load_corpus,
    write_corpus,
)
from .errors import CodevetError
from .forge import (
    DEFAULT_KINDS,
    DEFAULT_MAX_TOKENS,
    forge_dataset,
    write_dataset,
    write_manifest,
)
from .inject import MutationKind, inject_error
from .forge import derive_seed
from .langid import (
    DEFAULT_MISLABEL_THRESHOLD,
    classify,
    detect_mislabels,
    model_classify_batch,
)
from .metrics import (
    CorpusReport,
    KSweepReport,
    render_class_report,
    render_compile_report,
    render_ksweep_report,
    render_repair_summary,
    summarize_classification,
    summarize_compile,
)
from .repair import (
    DEFAULT_MAX_ITERATIONS,
    BatchRepairSummary,
    ModelFixer,
    OracleFixer,
    RepairCounts,
    RepairStatus,
    RuleFixer,
    batch_repair,
)


class _Logger:
    """One event per stage transition: JSON lines or human text on stderr."""

    def __init__(self, as_json: bool):
        self.as_json = as_json

    def stage(self, stage: str, **fields):
        if self.as_json:
            print(json.dumps({"event": "stage", "stage": stage, **fields}), file=sys.stderr)
        else:
            detail = " ".join(f"{k}={v}" for k, v in fields.items())
            print(f"[codevet] {stage} {detail}".rstrip(), file=sys.stderr)


def _load_config_file(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as handle:
            data = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise CodevetError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise CodevetError("config file must hold a JSON object with per-subcommand sections")
    return data


def _effective(flag_value, env_key: Optional[str], section: dict, file_key: str, default):
    """Resolve one setting with flags > env > file > defaults precedence."""
    if flag_value is not None:
        return flag_value
    if env_key:
        env_value = os.environ.get(env_key)
        if env_value is not None:
            return env_value
    if file_key in section:
        return section[file_key]
    return default


def _compiler_config(args, section: dict) -> CompilerConfig:
    extra = args.extra_flag if args.extra_flag else None
    return CompilerConfig(
        command=_effective(args.cc, "CODEVET_CC", section, "cc", "gcc"),
        std_c=_effective(args.std_c, None, section, "std_c", "gnu11"),
        std_cpp=_effective(args.std_cpp, None, section, "std_cpp", "gnu++14"),
        extra_flags=tuple(_effective(extra, None, section, "extra_flags", ())),
        timeout=float(_effective(args.timeout, None, section, "timeout", 10.0)),
    )


def _jobs(args, section: dict) -> int:
    return int(_effective(args.jobs, None, section, "jobs", os.cpu_count() or 1))


def _settings_echo(config: CompilerConfig, jobs: int, **extra) -> dict:
    return {
        "command": config.command,
        "std_c": config.std_c,
        "std_cpp": config.std_cpp,
        "extra_flags": list(config.extra_flags),
        "timeout": config.timeout,
        "jobs": jobs,
        **extra,
    }


def _load_or_die(path: str) -> LoadResult:
    try:
        return load_corpus(path)
    except FileNotFoundError:
        raise CodevetError(f"corpus file not found: {path}")


def _write_rejects(result: LoadResult, path: Optional[str]):
    if not path:
        return
    with open(path, "w", encoding="utf-8") as handle:
        for reject in result.rejects:
            entry = {"line": reject.line_number, "reason": reject.reason}
            if isinstance(reject, DuplicateId):
                entry["id"] = reject.id
            handle.write(json.dumps(entry, ensure_ascii=False) + "\n")


def _parse_kinds(text: str) -> list[MutationKind]:
    kinds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            kinds.append(MutationKind(part))
        except ValueError:
            raise CodevetError(
                f"unknown mutation kind {part!r}; expected init, typedef, op, paren"
            )
    if not kinds:
        raise CodevetError("no mutation kinds given")
    return kinds


def _write_json(path: str, payload: dict):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, ensure_ascii=False, indent=2)
        handle.write("\n")


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_ingest(args, section: dict, log: _Logger) -> int:
    result = _load_or_die(args.path)
    max_tokens = int(_effective(args.max_tokens, None, section, "max_tokens", DEFAULT_MAX_TOKENS))
    kept, dropped = filter_by_length(result.snippets, max_tokens)
    log.stage("ingest", loaded=len(result.snippets), rejected=len(result.rejects),
              kept=len(kept), dropped=len(dropped))
    if args.out:
        write_corpus(kept, args.out)
    _write_rejects(result, args.rejects)
    return 1 if result.rejects else 0


def _cmd_check(args, section: dict, log: _Logger) -> int:
    result = _load_or_die(args.corpus)
    config = _compiler_config(args, section)
    jobs = _jobs(args, section)
    lang_mode = _effective(args.lang, None, section, "lang", "auto")

    items = []
    checked: list[CodeSnippet] = []
    skipped_lang = 0
    for snippet in result.snippets:
        lang = resolve_check_lang(snippet.claimed_lang, lang_mode)
        if lang is None:
            skipped_lang += 1
            continue
        items.append((snippet.source, lang))
        checked.append(snippet)
    log.stage("compile", n=len(items), jobs=jobs, skipped_non_c_cpp=skipped_lang)
    outcomes = compile_many(items, config, jobs)
    report = summarize_compile(zip(checked, outcomes))

    report_path = args.report or (args.corpus + ".report.json")
    payload = report.to_dict()
    payload["settings"] = _settings_echo(config, jobs, lang=lang_mode)
    _write_json(report_path, payload)
    if args.outcomes:
        with open(args.outcomes, "w", encoding="utf-8") as handle:
            for snippet, outcome in zip(checked, outcomes):
                handle.write(json.dumps({
                    "id": snippet.id,
                    "lang": snippet.claimed_lang.value,
                    "outcome": outcome.to_dict(),
                }, ensure_ascii=False) + "\n")
    sys.stdout.write(render_compile_report(report))
    return 1 if result.rejects else 0


def _cmd_classify(args, section: dict, log: _Logger) -> int:
    result = _load_or_die(args.corpus)
    backend_mode = _effective(args.backend, None, section, "backend", "rules")
    threshold = float(
        _effective(args.threshold, None, section, "threshold", DEFAULT_MISLABEL_THRESHOLD)
    )
    snippets = result.snippets
    predictions: dict[str, dict] = {}
    failures: list[tuple[str, str]] = []

    rule_scores = None
    if backend_mode in ("rules", "both"):
        rule_scores = [classify(s) for s in snippets]
        for snippet, score in zip(snippets, rule_scores):
            predictions.setdefault(snippet.id, {})["rules"] = score.to_dict()
    if backend_mode in ("model", "both"):
        backend = HttpModelBackend()
        batch = model_classify_batch(snippets, backend)
        failures.extend(batch.failures)
        for snippet, score in zip(snippets, batch.scores):
            if score is not None:
                predictions.setdefault(snippet.id, {})["model"] = score.to_dict()
    log.stage("classify", n=len(snippets), backend=backend_mode, failures=len(failures))

    mislabel = detect_mislabels(snippets, threshold, scores=rule_scores) \
        if rule_scores is not None else None

    payload: dict = {
        "predictions": predictions,
        "failures": [{"snippet_id": sid, "reason": reason} for sid, reason in failures],
        "settings": {"backend": backend_mode, "threshold": threshold},
    }
    if mislabel is not None:
        payload["mislabels"] = mislabel.to_dict()
        pairs = [
            (s.claimed_lang, score.predicted)
            for s, score in zip(snippets, rule_scores)
            if s.claimed_lang is not LangLabel.UNKNOWN
        ]
        if pairs:
            class_report = summarize_classification(pairs)
            payload["metrics_vs_claimed"] = class_report.to_dict()
            sys.stdout.write(render_class_report(class_report))
    report_path = args.report or (args.corpus + ".classify.json")
    _write_json(report_path, payload)
    return 1 if (result.rejects or failures) else 0


def _build_fixer(args, section: dict):
    mode = _effective(args.fixer, None, section, "fixer", "rules")
    if mode == "rules":
        return RuleFixer(), mode
    if mode == "model":
        return ModelFixer(HttpModelBackend()), mode
    if mode == "oracle":
        refs_path = _effective(args.references, None, section, "references", None)
        if not refs_path:
            raise CodevetError("--references is required with --fixer oracle")
        refs_result = _load_or_die(refs_path)
        return OracleFixer({s.id: s.source for s in refs_result.snippets}), mode
    raise CodevetError(f"unknown fixer {mode!r}")


def _cmd_repair(args, section: dict, log: _Logger) -> int:
    result = _load_or_die(args.corpus)
    config = _compiler_config(args, section)
    jobs = _jobs(args, section)
    max_iterations = int(
        _effective(args.max_iterations, None, section, "max_iterations", DEFAULT_MAX_ITERATIONS)
    )
    fixer, fixer_name = _build_fixer(args, section)
    snippets = [s for s in result.snippets if s.claimed_lang in (LangLabel.C, LangLabel.CPP)]
    log.stage("repair", n=len(snippets), fixer=fixer_name, k=max_iterations, jobs=jobs)
    traces, summary = batch_repair(
        snippets, config=config, fixer=fixer, max_iterations=max_iterations, jobs=jobs
    )
    if args.traces:
        traces_dir = Path(args.traces)
        traces_dir.mkdir(parents=True, exist_ok=True)
        for snippet, trace in zip(snippets, traces):
            if trace is None:
                continue
            payload = trace.to_dict()
            payload["lang"] = snippet.claimed_lang.value
            _write_json(str(traces_dir / f"{snippet.id}.json"), payload)
    report_payload = summary.to_dict()
    report_payload["settings"] = _settings_echo(
        config, jobs, fixer=fixer_name, max_iterations=max_iterations
    )
    report_path = args.report or (args.corpus + ".repair.json")
    _write_json(report_path, report_payload)
    sys.stdout.write(render_repair_summary(summary, name=fixer_name))
    return 1 if (result.rejects or summary.failures) else 0


def _cmd_inject(args, section: dict, log: _Logger) -> int:
    result = _load_or_die(args.corpus)
    config = _compiler_config(args, section)
    jobs = _jobs(args, section)
    seed = int(_effective(args.seed, None, section, "seed", 0))
    kinds = _parse_kinds(_effective(args.kinds, None, section, "kinds", "init,typedef,op,paren"))
    snippets = [s for s in result.snippets if s.claimed_lang in (LangLabel.C, LangLabel.CPP)]

    from concurrent.futures import ThreadPoolExecutor
    from .errors import ParseFailure

    tasks = [(snippet, kind) for snippet in snippets for kind in kinds]

    def run_one(task):
        snippet, kind = task
        sub_seed = derive_seed(seed, snippet.id, kind)
        try:
            return inject_error(
                snippet.source, snippet.claimed_lang, kind, sub_seed,
                snippet_id=snippet.id, config=config,
            )
        except ParseFailure as exc:
            return exc

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        outcomes = list(pool.map(run_one, tasks))

    emitted = 0
    skipped = 0
    out_handle = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for (snippet, kind), outcome in zip(tasks, outcomes):
            if outcome is None or isinstance(outcome, Exception):
                skipped += 1
                continue
            mutated, record = outcome
            out_handle.write(json.dumps({
                "id": f"{snippet.id}:{kind.value}",
                "source": mutated,
                "lang": snippet.claimed_lang.value,
                "origin": snippet.origin,
                "mutation": record.to_dict(),
            }, ensure_ascii=False) + "\n")
            emitted += 1
    finally:
        if args.out:
            out_handle.close()
    log.stage("inject", tasks=len(tasks), emitted=emitted, skipped=skipped, seed=seed)
    return 1 if result.rejects else 0


def _cmd_forge(args, section: dict, log: _Logger) -> int:
    result = _load_or_die(args.corpus)
    config = _compiler_config(args, section)
    jobs = _jobs(args, section)
    seed = int(_effective(args.seed, None, section, "seed", 0))
    max_tokens = int(_effective(args.max_tokens, None, section, "max_tokens", DEFAULT_MAX_TOKENS))
    kinds = _parse_kinds(_effective(args.kinds, None, section, "kinds", "init,typedef,op,paren"))
    forged = forge_dataset(
        result.snippets, kinds=kinds, seed=seed, max_tokens=max_tokens,
        config=config, jobs=jobs,
    )
    log.stage(
        "forge",
        collected=forged.manifest.collected,
        compilable=forged.manifest.compilable,
        length_kept=forged.manifest.length_kept,
        emitted=forged.manifest.emitted,
    )
    write_dataset(forged.records, args.out)
    if args.manifest:
        write_manifest(forged.manifest, args.manifest)
    return 1 if result.rejects else 0


def _fold_traces(trace_dir: Path) -> tuple[BatchRepairSummary, list[dict]]:
    summary = BatchRepairSummary()
    entries = []
    for path in sorted(trace_dir.glob("*.json")):
        with open(path, encoding="utf-8") as handle:
            data = json.load(handle)
        entries.append(data)
        status = RepairStatus(data["status"])
        lang = LangLabel(data.get("lang", "c"))
        summary.overall.add(status)
        summary.per_language.setdefault(lang, RepairCounts()).add(status)
    return summary, entries


def _cmd_report(args, section: dict, log: _Logger) -> int:
    source = Path(args.source_path)
    kind = args.kind
    if kind == "compile":
        pairs = []
        with open(source, encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                data = json.loads(line)
                snippet = CodeSnippet(
                    id=data["id"], source="", claimed_lang=LangLabel(data["lang"])
                )
                pairs.append((snippet, CompileOutcome.from_dict(data["outcome"])))
        report = summarize_compile(pairs)
        text = render_compile_report(report)
        payload = report.to_dict()
    elif kind == "classify":
        pairs = []
        with open(source, encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                data = json.loads(line)
                truth = LangLabel(data["truth"])
                predicted = LangLabel(data["predicted"])
                pairs.append((truth, predicted))
        report = summarize_classification(pairs)
        text = render_class_report(report)
        payload = report.to_dict()
    elif kind == "repair":
        summary, _ = _fold_traces(source)
        text = render_repair_summary(summary)
        payload = summary.to_dict()
    elif kind == "ksweep":
        sweep = KSweepReport()
        for sub in sorted(source.iterdir()):
            if not sub.is_dir() or not sub.name.startswith("K"):
                continue
            k = int(sub.name[1:])
            summary, _ = _fold_traces(sub)
            row = {}
            for lang in (LangLabel.C, LangLabel.CPP):
                counts = summary.per_language.get(lang)
                row[lang] = counts.compilable_rate if counts and counts.n else None
            sweep.rows[k] = row
        text = render_ksweep_report(sweep)
        payload = sweep.to_dict()
    else:
        raise CodevetError(f"unknown report kind {kind!r}")
    sys.stdout.write(text)
    if args.out:
        _write_json(args.out, payload)
    log.stage("report", kind=kind, source=str(source))
    return 0


# ---------------------------------------------------------------------------
# Parser


def _add_compiler_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--cc", help="compiler command (default: $CODEVET_CC or gcc)")
    parser.add_argument("--std-c", dest="std_c", help="C language standard (default gnu11)")
    parser.add_argument("--std-cpp", dest="std_cpp", help="C++ language standard (default gnu++14)")
    parser.add_argument("--extra-flag", action="append", default=None,
                        help="extra compiler flag (repeatable)")
    parser.add_argument("--timeout", type=float, help="per-snippet compile timeout in seconds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="codevet",
        description="Validate, repair, and forge C/C++ code-snippet corpora with a compiler oracle.",
    )
    parser.add_argument("--version", action="version", version=f"codevet {__version__}")
    parser.add_argument("--config", help="JSON config file with per-subcommand sections")
    parser.add_argument("--log-json", action="store_true", help="emit stage events as JSON lines")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("ingest", help="load a corpus, filter by length, write rejects")
    p.add_argument("path")
    p.add_argument("--max-tokens", type=int, default=None)
    p.add_argument("--out")
    p.add_argument("--rejects")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("check", help="compile-check a corpus and report compilability")
    p.add_argument("corpus")
    p.add_argument("--lang", choices=["c", "cpp", "auto"], default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--report")
    p.add_argument("--outcomes", help="also write per-snippet outcomes as JSONL")
    _add_compiler_flags(p)
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("classify", help="identify languages and flag mislabels")
    p.add_argument("corpus")
    p.add_argument("--backend", choices=["rules", "model", "both"], default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--report")
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("repair", help="run the iterative compiler-guided repair loop")
    p.add_argument("corpus")
    p.add_argument("--fixer", choices=["rules", "model", "oracle"], default=None)
    p.add_argument("--max-iterations", "-K", dest="max_iterations", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--traces", help="directory for per-snippet trace JSON files")
    p.add_argument("--report")
    p.add_argument("--references", help="reference corpus for the oracle fixer")
    _add_compiler_flags(p)
    p.set_defaults(func=_cmd_repair)

    p = sub.add_parser("inject", help="inject one compile error per snippet and kind")
    p.add_argument("corpus")
    p.add_argument("--kinds", default=None, help="comma list: init,typedef,op,paren")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--out")
    _add_compiler_flags(p)
    p.set_defaults(func=_cmd_inject)

    p = sub.add_parser("forge", help="build instruction records from compilable code")
    p.add_argument("corpus")
    p.add_argument("--kinds", default=None, help="comma list: init,typedef,op,paren")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--max-tokens", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest")
    _add_compiler_flags(p)
    p.set_defaults(func=_cmd_forge)

    p = sub.add_parser("report", help="re-render reports from saved traces or outcomes")
    p.add_argument("--from", dest="source_path", required=True)
    p.add_argument("--kind", choices=["compile", "classify", "repair", "ksweep"], required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    log = _Logger(as_json=args.log_json)
    try:
        config_file = _load_config_file(args.config)
        section = config_file.get(args.subcommand, {})
        if not isinstance(section, dict):
            raise CodevetError(f"config section {args.subcommand!r} must be an object")
        return args.func(args, section, log)
    except CodevetError as exc:
        print(f"codevet: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"codevet: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
