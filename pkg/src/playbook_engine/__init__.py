"""Incident-response playbook engine.

Stores IRPs and SOPs as versioned, cross-referencing documents, checks
their composition and embedded flowcharts statically, executes them
live with full logging, and drafts/critiques them through an LLM
client with a deterministic mock provider.
"""

from .analysis import (
    Finding,
    LintReport,
    RefGraph,
    Severity,
    analyze_flowchart,
    build_ref_graph,
    detect_cycles,
    lint_repository,
    transitive_refs,
)
from .assist import (
    AssistClient,
    AssistContext,
    ProviderConfig,
    RankedProposal,
    SopProposal,
)
from .errors import PlaybookError
from .fsm import (
    Trace,
    TraceStep,
    advance,
    check_mutual_exclusion,
    compile_to_fsm,
    enumerate_paths,
    start_execution,
)
from .model import (
    DocKind,
    FlowEdge,
    FlowNode,
    Flowchart,
    Fsm,
    IncidentEvent,
    IncidentLog,
    IncidentSession,
    NodeKind,
    PlaybookDoc,
    SessionStatus,
    Version,
    bump,
    compare_versions,
    stamp_reviewed,
)
from .parser import (
    ParseCode,
    ParseError,
    emit_mermaid,
    parse_document,
    parse_flowchart,
    serialize_document,
    serialize_flowchart,
)
from .store import RepositoryStore, export_log, load_repository, save_document

__version__ = "0.1.0"

__all__ = [
    "AssistClient",
    "AssistContext",
    "DocKind",
    "Finding",
    "FlowEdge",
    "FlowNode",
    "Flowchart",
    "Fsm",
    "IncidentEvent",
    "IncidentLog",
    "IncidentSession",
    "LintReport",
    "NodeKind",
    "ParseCode",
    "ParseError",
    "PlaybookDoc",
    "PlaybookError",
    "ProviderConfig",
    "RankedProposal",
    "RefGraph",
    "RepositoryStore",
    "SessionStatus",
    "Severity",
    "SopProposal",
    "Trace",
    "TraceStep",
    "Version",
    "advance",
    "analyze_flowchart",
    "build_ref_graph",
    "bump",
    "check_mutual_exclusion",
    "compare_versions",
    "compile_to_fsm",
    "detect_cycles",
    "emit_mermaid",
    "enumerate_paths",
    "export_log",
    "lint_repository",
    "load_repository",
    "parse_document",
    "parse_flowchart",
    "save_document",
    "serialize_document",
    "serialize_flowchart",
    "stamp_reviewed",
    "start_execution",
    "transitive_refs",
]
