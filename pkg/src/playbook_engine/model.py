"""Domain types shared by every other module. Pure data, no I/O.

All values are immutable after construction; "mutation" elsewhere in the
engine means producing a new value.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import date, datetime
from enum import Enum
from typing import Literal, Optional

from .errors import ReviewDateRegression

DOC_ID_RE = re.compile(r"^[a-z0-9_-]+$")
VERSION_RE = re.compile(r"^(\d+)\.(\d+)\.(\d+)\.(\d{4})(\d{2})(\d{2})$")

VersionPart = Literal["major", "minor", "patch"]


@dataclass(frozen=True)
class Version:
    """Four-part document version: MAJOR.MINOR.PATCH.REVIEWED.

    The fourth part is a review date (YYYYMMDD) recording when the document
    was last verified correct. It signals freshness only and never takes
    part in precedence comparisons.
    """

    major: int
    minor: int
    patch: int
    reviewed: date

    def __post_init__(self) -> None:
        for part in ("major", "minor", "patch"):
            value = getattr(self, part)
            if not isinstance(value, int) or value < 0:
                raise ValueError(f"version {part} must be a non-negative integer")
        if not isinstance(self.reviewed, date):
            raise ValueError("reviewed must be a calendar date")

    @property
    def precedence_key(self) -> tuple[int, int, int]:
        return (self.major, self.minor, self.patch)

    @classmethod
    def parse(cls, text: str) -> "Version":
        m = VERSION_RE.match(text)
        if m is None:
            raise ValueError(f"not a MAJOR.MINOR.PATCH.YYYYMMDD version: {text!r}")
        major, minor, patch, year, month, day = (int(g) for g in m.groups())
        try:
            reviewed = date(year, month, day)
        except ValueError as exc:
            raise ValueError(f"bad review date in version {text!r}: {exc}") from exc
        return cls(major, minor, patch, reviewed)

    def __str__(self) -> str:
        return f"{self.major}.{self.minor}.{self.patch}.{self.reviewed:%Y%m%d}"


def compare_versions(a: Version, b: Version) -> int:
    """Order two versions by (major, minor, patch); reviewed is ignored.

    Returns -1, 0 or 1.
    """
    ka, kb = a.precedence_key, b.precedence_key
    return (ka > kb) - (ka < kb)


def bump(v: Version, part: VersionPart, today: date) -> Version:
    """Increment `part`, zero everything below it, stamp today as reviewed."""
    if part == "major":
        return Version(v.major + 1, 0, 0, today)
    if part == "minor":
        return Version(v.major, v.minor + 1, 0, today)
    if part == "patch":
        return Version(v.major, v.minor, v.patch + 1, today)
    raise ValueError(f"unknown version part {part!r}")


def stamp_reviewed(v: Version, today: date) -> Version:
    """Record a review without changing the content version."""
    if today < v.reviewed:
        raise ReviewDateRegression(
            f"review date {today.isoformat()} is before current "
            f"review stamp {v.reviewed.isoformat()}"
        )
    return Version(v.major, v.minor, v.patch, today)


class DocKind(str, Enum):
    IRP = "irp"
    SOP = "sop"


class NodeKind(str, Enum):
    START = "start"
    END = "end"
    ACTION = "action"
    DECISION = "decision"


@dataclass(frozen=True)
class FlowNode:
    id: str
    kind: NodeKind
    label: str
    ref: Optional[str] = None  # DocId of the playbook this node invokes


@dataclass(frozen=True)
class FlowEdge:
    src: str
    dst: str
    label: Optional[str] = None  # required and unique per decision branch


@dataclass(frozen=True)
class Flowchart:
    """Executable workflow embedded in a playbook document.

    Node order is declaration order and is preserved through
    serialization; `node_map` gives keyed access.
    """

    name: str
    nodes: tuple[FlowNode, ...]
    edges: tuple[FlowEdge, ...]

    @property
    def node_map(self) -> dict[str, FlowNode]:
        return {n.id: n for n in self.nodes}

    def outgoing(self, node_id: str) -> tuple[FlowEdge, ...]:
        return tuple(e for e in self.edges if e.src == node_id)

    def incoming(self, node_id: str) -> tuple[FlowEdge, ...]:
        return tuple(e for e in self.edges if e.dst == node_id)


def flowchart_violations(chart: Flowchart) -> list[str]:
    """All structural-invariant violations in `chart`, human-readable.

    Empty list means the chart is structurally valid. Reachability and
    completeness are the analysis module's concern, not checked here.
    """
    problems: list[str] = []
    seen: set[str] = set()
    for node in chart.nodes:
        if node.id in seen:
            problems.append(f"duplicate node id {node.id}")
        seen.add(node.id)
    node_map = chart.node_map

    starts = [n for n in chart.nodes if n.kind is NodeKind.START]
    ends = [n for n in chart.nodes if n.kind is NodeKind.END]
    if len(starts) != 1:
        problems.append(f"chart must have exactly one start node, found {len(starts)}")
    if not ends:
        problems.append("chart must have at least one end node")

    for edge in chart.edges:
        if edge.src not in node_map:
            problems.append(f"edge source {edge.src} is not a node")
            continue
        if edge.dst not in node_map:
            problems.append(f"edge target {edge.dst} is not a node")
            continue
        src = node_map[edge.src]
        if src.kind is NodeKind.DECISION:
            if not edge.label:
                problems.append(f"decision {edge.src} has an unlabeled branch")
        elif edge.label is not None:
            problems.append(
                f"edge {edge.src} -> {edge.dst} carries a label but "
                f"{edge.src} is not a decision"
            )
        if src.kind is NodeKind.END:
            problems.append(f"end node {edge.src} has an outgoing edge")
        if node_map[edge.dst].kind is NodeKind.START:
            problems.append(f"start node {edge.dst} has an incoming edge")

    for node in chart.nodes:
        if node.kind is not NodeKind.DECISION:
            continue
        labels = [e.label for e in chart.edges if e.src == node.id and e.label]
        dupes = {l for l in labels if labels.count(l) > 1}
        for label in sorted(dupes):
            problems.append(f"decision {node.id} has duplicate branch label {label!r}")

    return problems


@dataclass(frozen=True)
class PlaybookDoc:
    """An IRP or SOP: front-matter metadata, markdown body, optional chart."""

    id: str
    kind: DocKind
    title: str
    version: Version
    owner: str
    references: tuple[str, ...] = ()
    body: str = ""
    flowchart: Optional[Flowchart] = None
    tech_context: tuple[str, ...] = ()


def document_violations(doc: PlaybookDoc) -> list[str]:
    """All invariant violations in `doc`, including its flowchart's."""
    problems: list[str] = []
    if not DOC_ID_RE.match(doc.id):
        problems.append(f"doc id {doc.id!r} must match [a-z0-9_-]+")
    if not doc.title:
        problems.append("title must be non-empty")
    seen: set[str] = set()
    for ref in doc.references:
        if not DOC_ID_RE.match(ref):
            problems.append(f"reference {ref!r} is not a valid doc id")
        if ref == doc.id:
            problems.append("document references itself")
        if ref in seen:
            problems.append(f"duplicate reference {ref}")
        seen.add(ref)
    if doc.flowchart is not None:
        problems.extend(flowchart_violations(doc.flowchart))
        for node in doc.flowchart.nodes:
            if node.ref is not None and node.ref not in doc.references:
                problems.append(
                    f"flowchart node {node.id} refs {node.ref}, which is "
                    f"not in the document's references"
                )
    return problems


@dataclass(frozen=True)
class FsmState:
    id: str
    label: str
    initial: bool = False
    accepting: bool = False


@dataclass(frozen=True)
class FsmTransition:
    src: str
    input: Optional[str]  # decision branch label; None for unconditional moves
    dst: str


@dataclass(frozen=True)
class Fsm:
    """Deterministic state machine compiled from a single-token flowchart."""

    states: tuple[FsmState, ...]
    transitions: tuple[FsmTransition, ...]

    @property
    def state_map(self) -> dict[str, FsmState]:
        return {s.id: s for s in self.states}

    @property
    def initial_state(self) -> FsmState:
        initials = [s for s in self.states if s.initial]
        if len(initials) != 1:
            raise ValueError(f"FSM must have exactly one initial state, found {len(initials)}")
        return initials[0]

    def is_deterministic(self) -> bool:
        seen: set[tuple[str, Optional[str]]] = set()
        for t in self.transitions:
            key = (t.src, t.input)
            if key in seen:
                return False
            seen.add(key)
        return True


class SessionStatus(str, Enum):
    ACTIVE = "active"
    COMPLETE = "complete"
    ABORTED = "aborted"


@dataclass(frozen=True)
class IncidentEvent:
    """One timestamped record in an incident log."""

    timestamp: datetime
    actor: str
    text: str
    node: Optional[str] = None  # flowchart node this event advanced, if any


@dataclass(frozen=True)
class IncidentLog:
    """Append-only event record of one incident session."""

    session_id: str
    events: tuple[IncidentEvent, ...]


def format_log_timestamp(ts: datetime) -> str:
    """12-hour wall-clock prefix used by the exported log, e.g. `09:05 AM`."""
    hour = ts.hour % 12 or 12
    return f"{hour:02d}:{ts.minute:02d} {'AM' if ts.hour < 12 else 'PM'}"


def event_blocks(events: tuple[IncidentEvent, ...]) -> list[str]:
    """One `HH:MM AM/PM - text` block per event, chronological."""
    return [f"{format_log_timestamp(e.timestamp)} - {e.text}" for e in events]


@dataclass(frozen=True)
class IncidentSession:
    """A live (or finished) execution of an IRP's flowchart.

    `frontier` holds the node ids currently carrying a token. The session
    is complete exactly when the frontier is empty and at least one token
    reached an end node.
    """

    session_id: str
    irp: str
    started: datetime
    status: SessionStatus
    frontier: frozenset[str]
    log: tuple[IncidentEvent, ...] = ()
    end_reached: bool = False

    def with_event(self, event: IncidentEvent) -> "IncidentSession":
        return IncidentSession(
            session_id=self.session_id,
            irp=self.irp,
            started=self.started,
            status=self.status,
            frontier=self.frontier,
            log=self.log + (event,),
            end_reached=self.end_reached,
        )
