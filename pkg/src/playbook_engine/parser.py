"""Playbook file parsing and serialization.

File format: front-matter between `---` lines (`key: value` pairs), an
optional fenced ```flowchart block holding the workflow DSL, and a
markdown body that the engine never interprets. The canonical layout
written by `serialize_document` places the fence directly after the
front matter so the body round-trips byte-exactly; the parser accepts
the fence anywhere in the body region.

Flowchart DSL, one declaration per line:

    node <id> <kind> "<label>" [ref=<doc-id>]
    edge <from> <to> [<label>]

with `#` comments, kind one of start|end|action|decision, and edge
labels required (and pairwise distinct) on decision branches only.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .errors import PlaybookError
from .model import (
    DOC_ID_RE,
    DocKind,
    FlowEdge,
    FlowNode,
    Flowchart,
    NodeKind,
    PlaybookDoc,
    Version,
    flowchart_violations,
)

FRONT_MATTER_KEYS = ("id", "kind", "title", "version", "owner", "references", "tech-context")
REQUIRED_KEYS = ("id", "kind", "title", "version", "owner")

FENCE_OPEN = "```flowchart"
FENCE_CLOSE = "```"

NODE_LINE_RE = re.compile(
    r'^node\s+(?P<id>[^\s"]+)\s+(?P<kind>[a-z]+)\s+"(?P<label>[^"\n]*)"'
    r"(?:\s+ref=(?P<ref>\S+))?\s*$"
)
EDGE_LINE_RE = re.compile(r"^edge\s+(?P<src>[^\s\"]+)\s+(?P<dst>[^\s\"]+)(?:\s+(?P<label>.*\S))?\s*$")


class ParseCode(str, Enum):
    BAD_FRONT_MATTER = "BadFrontMatter"
    BAD_VERSION = "BadVersion"
    BAD_FLOWCHART = "BadFlowchart"
    DUPLICATE_NODE = "DuplicateNode"
    UNKNOWN_EDGE_ENDPOINT = "UnknownEdgeEndpoint"
    MISSING_FIELD = "MissingField"


class ParseError(PlaybookError):
    """Fail-fast parse failure pointing at the offending source position."""

    def __init__(self, path: str, line: int, column: int, message: str, code: ParseCode):
        super().__init__(f"{path}:{line}:{column}: {code.value}: {message}")
        self.path = path
        self.line = line
        self.column = column
        self.message = message
        self.code = code


@dataclass
class _Line:
    number: int  # 1-based position in the enclosing file
    text: str  # without line ending


def _fail(path: str, line: int, column: int, message: str, code: ParseCode) -> None:
    raise ParseError(path, line, column, message, code)


def parse_flowchart(
    block: str, path: str = "<flowchart>", name: str = "flowchart", first_line: int = 1
) -> Flowchart:
    """Parse the flowchart DSL into a validated Flowchart.

    `first_line` anchors error positions when the block is embedded in a
    larger file.
    """
    lines = [
        _Line(first_line + i, raw)
        for i, raw in enumerate(block.splitlines())
    ]

    nodes: list[FlowNode] = []
    node_lines: dict[str, int] = {}
    edge_records: list[tuple[_Line, FlowEdge]] = []

    for ln in lines:
        stripped = ln.text.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("node"):
            m = NODE_LINE_RE.match(stripped)
            if m is None:
                _fail(path, ln.number, 1, f"bad node declaration: {stripped!r}", ParseCode.BAD_FLOWCHART)
            node_id = m.group("id")
            if node_id in node_lines:
                _fail(
                    path, ln.number, 1,
                    f"node {node_id} already declared on line {node_lines[node_id]}",
                    ParseCode.DUPLICATE_NODE,
                )
            try:
                kind = NodeKind(m.group("kind"))
            except ValueError:
                _fail(path, ln.number, 1, f"unknown node kind {m.group('kind')!r}", ParseCode.BAD_FLOWCHART)
            ref = m.group("ref")
            if ref is not None and not DOC_ID_RE.match(ref):
                _fail(path, ln.number, 1, f"node ref {ref!r} is not a valid doc id", ParseCode.BAD_FLOWCHART)
            nodes.append(FlowNode(node_id, kind, m.group("label"), ref))
            node_lines[node_id] = ln.number
        elif stripped.startswith("edge"):
            m = EDGE_LINE_RE.match(stripped)
            if m is None:
                _fail(path, ln.number, 1, f"bad edge declaration: {stripped!r}", ParseCode.BAD_FLOWCHART)
            edge_records.append((ln, FlowEdge(m.group("src"), m.group("dst"), m.group("label"))))
        else:
            _fail(path, ln.number, 1, f"expected node or edge declaration, got {stripped!r}", ParseCode.BAD_FLOWCHART)

    node_map = {n.id: n for n in nodes}
    seen_branch_labels: dict[str, set[str]] = {}
    edges: list[FlowEdge] = []
    for ln, edge in edge_records:
        for endpoint in (edge.src, edge.dst):
            if endpoint not in node_map:
                _fail(path, ln.number, 1, f"edge endpoint {endpoint} is not a declared node", ParseCode.UNKNOWN_EDGE_ENDPOINT)
        src = node_map[edge.src]
        dst = node_map[edge.dst]
        if src.kind is NodeKind.END:
            _fail(path, ln.number, 1, f"end node {src.id} cannot have outgoing edges", ParseCode.BAD_FLOWCHART)
        if dst.kind is NodeKind.START:
            _fail(path, ln.number, 1, f"start node {dst.id} cannot have incoming edges", ParseCode.BAD_FLOWCHART)
        if src.kind is NodeKind.DECISION:
            if not edge.label:
                _fail(path, ln.number, 1, f"branch of decision {src.id} must carry a label", ParseCode.BAD_FLOWCHART)
            taken = seen_branch_labels.setdefault(src.id, set())
            if edge.label in taken:
                _fail(
                    path, ln.number, 1,
                    f"decision {src.id} already has a branch labeled {edge.label!r}",
                    ParseCode.BAD_FLOWCHART,
                )
            taken.add(edge.label)
        elif edge.label is not None:
            _fail(
                path, ln.number, 1,
                f"{src.id} is not a decision; its edges cannot be labeled",
                ParseCode.BAD_FLOWCHART,
            )
        edges.append(edge)

    starts = [n for n in nodes if n.kind is NodeKind.START]
    if len(starts) != 1:
        _fail(path, first_line, 1, f"chart needs exactly one start node, found {len(starts)}", ParseCode.BAD_FLOWCHART)
    if not any(n.kind is NodeKind.END for n in nodes):
        _fail(path, first_line, 1, "chart needs at least one end node", ParseCode.BAD_FLOWCHART)

    chart = Flowchart(name=name, nodes=tuple(nodes), edges=tuple(edges))
    leftover = flowchart_violations(chart)
    if leftover:  # all cases should be caught above with better positions
        _fail(path, first_line, 1, "; ".join(leftover), ParseCode.BAD_FLOWCHART)
    return chart


def _split_csv(value: str) -> tuple[str, ...]:
    return tuple(item.strip() for item in value.split(",") if item.strip())


def parse_document(source: str, path: str = "<document>") -> PlaybookDoc:
    """Parse one playbook file. First error wins; body bytes are preserved."""
    lines = source.splitlines(keepends=True)
    if not lines or lines[0].rstrip("\r\n") != "---":
        _fail(path, 1, 1, "document must open with a --- front-matter line", ParseCode.BAD_FRONT_MATTER)

    fields: dict[str, str] = {}
    close_line = None
    for i in range(1, len(lines)):
        text = lines[i].rstrip("\r\n")
        if text == "---":
            close_line = i
            break
        if not text.strip():
            continue
        if ":" not in text:
            _fail(path, i + 1, 1, f"expected key: value, got {text!r}", ParseCode.BAD_FRONT_MATTER)
        key, _, value = text.partition(":")
        key = key.strip()
        if key not in FRONT_MATTER_KEYS:
            _fail(path, i + 1, 1, f"unknown front-matter key {key!r}", ParseCode.BAD_FRONT_MATTER)
        if key in fields:
            _fail(path, i + 1, 1, f"duplicate front-matter key {key!r}", ParseCode.BAD_FRONT_MATTER)
        fields[key] = value.strip()
    if close_line is None:
        _fail(path, len(lines), 1, "front matter never closed with ---", ParseCode.BAD_FRONT_MATTER)

    for key in REQUIRED_KEYS:
        if key not in fields:
            _fail(path, close_line + 1, 1, f"missing required front-matter key {key!r}", ParseCode.MISSING_FIELD)

    doc_id = fields["id"]
    if not DOC_ID_RE.match(doc_id):
        _fail(path, _key_line(lines, "id"), 1, f"id {doc_id!r} must match [a-z0-9_-]+", ParseCode.BAD_FRONT_MATTER)
    try:
        kind = DocKind(fields["kind"].lower())
    except ValueError:
        _fail(path, _key_line(lines, "kind"), 1, f"kind must be irp or sop, got {fields['kind']!r}", ParseCode.BAD_FRONT_MATTER)
    try:
        version = Version.parse(fields["version"])
    except ValueError as exc:
        _fail(path, _key_line(lines, "version"), 1, str(exc), ParseCode.BAD_VERSION)

    references = _split_csv(fields.get("references", ""))
    ref_line = _key_line(lines, "references")
    seen_refs: set[str] = set()
    for ref in references:
        if not DOC_ID_RE.match(ref):
            _fail(path, ref_line, 1, f"reference {ref!r} is not a valid doc id", ParseCode.BAD_FRONT_MATTER)
        if ref == doc_id:
            _fail(path, ref_line, 1, "document must not reference itself", ParseCode.BAD_FRONT_MATTER)
        if ref in seen_refs:
            _fail(path, ref_line, 1, f"duplicate reference {ref}", ParseCode.BAD_FRONT_MATTER)
        seen_refs.add(ref)

    tech_context = _split_csv(fields.get("tech-context", ""))

    body_lines = lines[close_line + 1 :]
    chart = None
    fence_open_idx = None
    fence_close_idx = None
    for i, raw in enumerate(body_lines):
        text = raw.rstrip("\r\n").strip()
        if fence_open_idx is None:
            if text == FENCE_OPEN:
                fence_open_idx = i
        elif fence_close_idx is None:
            if text == FENCE_CLOSE:
                fence_close_idx = i
        elif text == FENCE_OPEN:
            _fail(path, close_line + 2 + i, 1, "at most one flowchart block per document", ParseCode.BAD_FLOWCHART)
    if fence_open_idx is not None:
        if fence_close_idx is None:
            _fail(path, close_line + 2 + fence_open_idx, 1, "flowchart block never closed", ParseCode.BAD_FLOWCHART)
        block = "".join(body_lines[fence_open_idx + 1 : fence_close_idx])
        chart = parse_flowchart(
            block, path=path, name=doc_id,
            first_line=close_line + 2 + fence_open_idx + 1,
        )
        for node in chart.nodes:
            if node.ref is not None and node.ref not in references:
                _fail(
                    path, close_line + 2 + fence_open_idx, 1,
                    f"flowchart node {node.id} refs {node.ref}, which is not in references",
                    ParseCode.BAD_FLOWCHART,
                )
        body_lines = body_lines[:fence_open_idx] + body_lines[fence_close_idx + 1 :]

    return PlaybookDoc(
        id=doc_id,
        kind=kind,
        title=fields["title"],
        version=version,
        owner=fields["owner"],
        references=references,
        body="".join(body_lines),
        flowchart=chart,
        tech_context=tech_context,
    )


def _key_line(lines: list[str], key: str) -> int:
    for i, raw in enumerate(lines):
        if raw.split(":", 1)[0].strip() == key:
            return i + 1
    return 1


def serialize_flowchart(chart: Flowchart) -> str:
    """Canonical DSL text: nodes in declaration order, then edges."""
    out = []
    for node in chart.nodes:
        line = f'node {node.id} {node.kind.value} "{node.label}"'
        if node.ref is not None:
            line += f" ref={node.ref}"
        out.append(line)
    for edge in chart.edges:
        line = f"edge {edge.src} {edge.dst}"
        if edge.label is not None:
            line += f" {edge.label}"
        out.append(line)
    return "\n".join(out) + "\n"


def _single_line(value: str) -> bool:
    # splitlines also splits on \r, \v, \f, \x85,   ... so "no \n" is not enough
    return value == "" or value.splitlines() == [value]


def _require_serializable(doc: PlaybookDoc) -> None:
    """Reject values the line-oriented format cannot represent faithfully."""
    for field_name in ("title", "owner"):
        value = getattr(doc, field_name)
        if value != value.strip() or not _single_line(value):
            raise ValueError(f"{field_name} {value!r} does not survive front-matter round-trip")
    for item in doc.tech_context:
        if item != item.strip() or "," in item or not _single_line(item):
            raise ValueError(f"tech-context item {item!r} does not survive round-trip")
    if doc.flowchart is not None:
        for node in doc.flowchart.nodes:
            if '"' in node.label or not _single_line(node.label):
                raise ValueError(f"node label {node.label!r} cannot be quoted in the DSL")
            if re.search(r"\s", node.id) or '"' in node.id:
                raise ValueError(f"node id {node.id!r} must not contain whitespace or quotes")
        for edge in doc.flowchart.edges:
            if edge.label is not None and (
                edge.label != edge.label.strip() or not _single_line(edge.label)
            ):
                raise ValueError(f"edge label {edge.label!r} does not survive round-trip")
    for line in doc.body.splitlines():
        if line.strip() == FENCE_OPEN:
            raise ValueError("body must not contain a flowchart fence of its own")


def serialize_document(doc: PlaybookDoc) -> str:
    """Canonical text form. parse_document(serialize_document(d)) == d.

    The flowchart fence, when present, sits directly after the front
    matter; empty references/tech-context keys are omitted.
    """
    _require_serializable(doc)
    out = ["---"]
    out.append(f"id: {doc.id}")
    out.append(f"kind: {doc.kind.value}")
    out.append(f"title: {doc.title}")
    out.append(f"version: {doc.version}")
    out.append(f"owner: {doc.owner}")
    if doc.references:
        out.append(f"references: {', '.join(doc.references)}")
    if doc.tech_context:
        out.append(f"tech-context: {', '.join(doc.tech_context)}")
    out.append("---")
    text = "\n".join(out) + "\n"
    if doc.flowchart is not None:
        text += FENCE_OPEN + "\n" + serialize_flowchart(doc.flowchart) + FENCE_CLOSE + "\n"
    return text + doc.body


_MERMAID_SHAPES = {
    NodeKind.START: ("(", ")"),
    NodeKind.END: ("(", ")"),
    NodeKind.ACTION: ("[", "]"),
    NodeKind.DECISION: ("{", "}"),
}


def emit_mermaid(chart: Flowchart) -> str:
    """Deterministic mermaid `flowchart TD` rendering of a chart.

    One line per node (declaration order), then one line per edge; equal
    charts produce byte-identical output.
    """
    out = ["flowchart TD"]
    for node in chart.nodes:
        open_b, close_b = _MERMAID_SHAPES[node.kind]
        out.append(f"{node.id}{open_b}{node.label}{close_b}")
    for edge in chart.edges:
        if edge.label is not None:
            out.append(f"{edge.src} -->|{edge.label}| {edge.dst}")
        else:
            out.append(f"{edge.src} --> {edge.dst}")
    return "\n".join(out) + "\n"
