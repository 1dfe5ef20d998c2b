"""codevet: compiler-guided validation, repair, and single-error forging
for C/C++ code-snippet corpora."""

__version__ = "0.1.0"

from .corpus import CodeSnippet, LangLabel, filter_by_length, load_corpus, write_corpus
from .compiledrv import (
    Category,
    CompileOutcome,
    CompilerConfig,
    Diagnostic,
    Severity,
    categorize,
    compile_check,
    compile_many,
    parse_diagnostics,
)
from .langid import (
    LangScore,
    MislabelFinding,
    classify,
    detect_mislabels,
    model_classify,
    strip_comments,
)
from .inject import (
    MutationKind,
    MutationRecord,
    build_ast,
    inject_error,
    revert,
    verify_single_error,
)
from .repair import (
    FixerBackend,
    ModelFixer,
    NullFixer,
    OracleFixer,
    RepairStatus,
    RepairTrace,
    RuleFixer,
    batch_repair,
    build_prompt,
    extract_candidate,
    repair,
)
from .forge import InstructionRecord, forge_dataset, make_record
from .metrics import k_sweep, summarize_classification, summarize_compile

__all__ = [
    "CodeSnippet",
    "LangLabel",
    "load_corpus",
    "write_corpus",
    "filter_by_length",
    "CompilerConfig",
    "CompileOutcome",
    "Diagnostic",
    "Severity",
    "Category",
    "compile_check",
    "compile_many",
    "parse_diagnostics",
    "categorize",
    "LangScore",
    "MislabelFinding",
    "classify",
    "strip_comments",
    "detect_mislabels",
    "model_classify",
    "MutationKind",
    "MutationRecord",
    "build_ast",
    "inject_error",
    "verify_single_error",
    "revert",
    "FixerBackend",
    "RuleFixer",
    "OracleFixer",
    "ModelFixer",
    "NullFixer",
    "RepairStatus",
    "RepairTrace",
    "repair",
    "batch_repair",
    "build_prompt",
    "extract_candidate",
    "InstructionRecord",
    "make_record",
    "forge_dataset",
    "summarize_compile",
    "summarize_classification",
    "k_sweep",
]
