"""Cross-document reference graph and per-flowchart structural analysis.

Everything here is pure: inputs are immutable documents/charts, outputs
are reports with a fixed ordering so repeated runs diff cleanly in CI.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from datetime import date
from enum import Enum
from typing import Iterable

from .errors import CyclicGraph, DuplicateDocId, InvalidFlowchart, UnknownDoc
from .model import Flowchart, NodeKind, PlaybookDoc


@dataclass(frozen=True)
class RefGraph:
    """Directed graph of document references; phantom targets included."""

    nodes: frozenset[str]
    edges: frozenset[tuple[str, str]]

    def successors(self, node: str) -> list[str]:
        return sorted(dst for src, dst in self.edges if src == node)


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"
    INFO = "info"


@dataclass(frozen=True)
class Finding:
    severity: Severity
    code: str
    doc: str
    detail: str

    def sort_key(self) -> tuple[str, str, str]:
        return (self.doc, self.code, self.detail)


@dataclass(frozen=True)
class LintReport:
    """Deterministically ordered findings: sorted by (doc, code, detail)."""

    findings: tuple[Finding, ...]

    @classmethod
    def of(cls, findings: Iterable[Finding]) -> "LintReport":
        return cls(tuple(sorted(findings, key=Finding.sort_key)))

    @property
    def errors(self) -> tuple[Finding, ...]:
        return tuple(f for f in self.findings if f.severity is Severity.ERROR)

    @property
    def has_errors(self) -> bool:
        return any(f.severity is Severity.ERROR for f in self.findings)

    def merged_with(self, other: "LintReport") -> "LintReport":
        return LintReport.of(self.findings + other.findings)


def render_text(report: LintReport) -> str:
    """One `SEVERITY CODE doc: detail` line per finding."""
    return "".join(
        f"{f.severity.value.upper()} {f.code} {f.doc}: {f.detail}\n" for f in report.findings
    )


def render_structured(report: LintReport) -> str:
    """One JSON record per finding, machine-readable."""
    return "".join(
        json.dumps(
            {"severity": f.severity.value, "code": f.code, "doc": f.doc, "detail": f.detail}
        )
        + "\n"
        for f in report.findings
    )


def parse_structured(text: str) -> LintReport:
    findings = []
    for line in text.splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        findings.append(
            Finding(Severity(record["severity"]), record["code"], record["doc"], record["detail"])
        )
    return LintReport.of(findings)


def build_ref_graph(docs: list[PlaybookDoc]) -> RefGraph:
    """One node per document plus phantoms for dangling reference targets."""
    ids = [d.id for d in docs]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise DuplicateDocId(f"duplicate document ids: {', '.join(dupes)}")
    nodes = set(ids)
    edges = set()
    for doc in docs:
        for ref in doc.references:
            nodes.add(ref)  # phantom when ref names no loaded document
            edges.add((doc.id, ref))
    return RefGraph(frozenset(nodes), frozenset(edges))


def detect_cycles(g: RefGraph) -> list[list[str]]:
    """All elementary cycles, each reported once.

    A cycle is rotated to start at its smallest node id; the cycle list
    itself is sorted, so output is deterministic.
    """
    adjacency = {n: g.successors(n) for n in g.nodes}
    cycles: list[tuple[str, ...]] = []
    for root in sorted(g.nodes):
        # Enumerate elementary cycles whose smallest member is `root` by
        # walking only through nodes > root; iterative to keep big graphs safe.
        path = [root]
        on_path = {root}
        pending = [iter(adjacency[root])]
        while pending:
            try:
                nxt = next(pending[-1])
            except StopIteration:
                pending.pop()
                on_path.discard(path.pop())
                continue
            if nxt == root:
                cycles.append(tuple(path))
            elif nxt > root and nxt not in on_path:
                path.append(nxt)
                on_path.add(nxt)
                pending.append(iter(adjacency[nxt]))
    return [list(c) for c in sorted(cycles)]


def transitive_refs(g: RefGraph, root: str) -> set[str]:
    """Every node reachable from `root`, excluding `root` itself."""
    if root not in g.nodes:
        raise UnknownDoc(f"no document {root} in graph")
    if detect_cycles(g):
        raise CyclicGraph("reference graph contains cycles")
    reached: set[str] = set()
    stack = [root]
    while stack:
        for nxt in g.successors(stack.pop()):
            if nxt not in reached:
                reached.add(nxt)
                stack.append(nxt)
    return reached - {root}


def _reachable(adjacency: dict[str, list[str]], sources: Iterable[str]) -> set[str]:
    seen = set(sources)
    stack = list(seen)
    while stack:
        for nxt in adjacency.get(stack.pop(), ()):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


def analyze_flowchart(chart: Flowchart) -> LintReport:
    """Structural completeness findings for one chart.

    Errors: UnreachableNode (no path from start), DeadEnd (a non-end sink,
    or a cycle member that cannot reach any end node),
    NondeterministicBranch (duplicate decision labels). Warnings:
    FlowchartCycle per elementary cycle (loops have no execution
    semantics here). Info: ParallelFork per non-decision fan-out.
    """
    node_map = chart.node_map
    for edge in chart.edges:
        if edge.src not in node_map or edge.dst not in node_map:
            raise InvalidFlowchart(f"edge {edge.src} -> {edge.dst} references unknown nodes")
    starts = [n for n in chart.nodes if n.kind is NodeKind.START]
    if len(starts) != 1:
        raise InvalidFlowchart(f"chart must have exactly one start node, found {len(starts)}")
    start = starts[0]

    adjacency: dict[str, list[str]] = {n.id: [] for n in chart.nodes}
    for edge in chart.edges:
        adjacency[edge.src].append(edge.dst)

    findings: list[Finding] = []
    doc = chart.name

    reachable = _reachable(adjacency, [start.id])
    for node in chart.nodes:
        if node.id not in reachable:
            findings.append(
                Finding(
                    Severity.ERROR, "UnreachableNode", doc,
                    f"{node.id} cannot be reached from {start.id}",
                )
            )

    cycles = detect_cycles(
        RefGraph(
            frozenset(node_map),
            frozenset((e.src, e.dst) for e in chart.edges),
        )
    )
    cycle_members = {n for cycle in cycles for n in cycle}
    for cycle in cycles:
        findings.append(
            Finding(
                Severity.WARNING, "FlowchartCycle", doc,
                " -> ".join(cycle + [cycle[0]]),
            )
        )

    end_ids = {n.id for n in chart.nodes if n.kind is NodeKind.END}
    for node in chart.nodes:
        if node.kind is NodeKind.END:
            continue
        can_finish = bool(_reachable(adjacency, [node.id]) & end_ids)
        if not adjacency[node.id]:
            findings.append(
                Finding(Severity.ERROR, "DeadEnd", doc, f"{node.id} has no outgoing edges")
            )
        elif not can_finish and node.id in cycle_members:
            findings.append(
                Finding(
                    Severity.ERROR, "DeadEnd", doc,
                    f"{node.id} loops without reaching any end node",
                )
            )

    for node in chart.nodes:
        outgoing = [e for e in chart.edges if e.src == node.id]
        if node.kind is NodeKind.DECISION:
            labels = [e.label for e in outgoing if e.label]
            for label in sorted({l for l in labels if labels.count(l) > 1}):
                findings.append(
                    Finding(
                        Severity.ERROR, "NondeterministicBranch", doc,
                        f"{node.id} has duplicate branch label {label!r}",
                    )
                )
        elif len(outgoing) > 1:
            findings.append(
                Finding(
                    Severity.INFO, "ParallelFork", doc,
                    f"{node.id} fans out into {len(outgoing)} parallel tracks",
                )
            )

    return LintReport.of(findings)


def lint_repository(
    docs: list[PlaybookDoc], today: date, stale_after_days: int = 180
) -> LintReport:
    """Repository-wide lint: dangling refs, cycles, staleness, chart findings."""
    findings: list[Finding] = []

    ids = [d.id for d in docs]
    unique_docs: list[PlaybookDoc] = []
    seen: set[str] = set()
    for doc in docs:
        if doc.id in seen:
            findings.append(
                Finding(
                    Severity.ERROR, "DuplicateDocId", doc.id,
                    f"document id declared {ids.count(doc.id)} times",
                )
            )
            continue
        seen.add(doc.id)
        unique_docs.append(doc)

    graph = build_ref_graph(unique_docs)
    known = {d.id for d in unique_docs}
    for doc in unique_docs:
        for ref in doc.references:
            if ref not in known:
                findings.append(
                    Finding(Severity.ERROR, "DanglingRef", doc.id, f"references missing document {ref}")
                )

    for cycle in detect_cycles(graph):
        findings.append(
            Finding(Severity.ERROR, "Cycle", cycle[0], " -> ".join(cycle + [cycle[0]]))
        )

    for doc in unique_docs:
        age = (today - doc.version.reviewed).days
        if age > stale_after_days:
            findings.append(
                Finding(
                    Severity.WARNING, "Stale", doc.id,
                    f"last reviewed {doc.version.reviewed.isoformat()}, "
                    f"{age} days ago (threshold {stale_after_days})",
                )
            )

    for doc in unique_docs:
        if doc.flowchart is None:
            continue
        try:
            chart_report = analyze_flowchart(doc.flowchart)
        except InvalidFlowchart as exc:
            findings.append(Finding(Severity.ERROR, "InvalidFlowchart", doc.id, str(exc)))
            continue
        findings.extend(replace(f, doc=doc.id) for f in chart_report.findings)

    return LintReport.of(findings)
