"""Flowchart compilation, path enumeration, and token-based execution.

Execution semantics: every outgoing edge of a non-decision node carries
an independent token (parallel tracks); a decision routes its single
token down exactly one labeled branch; end nodes absorb tokens. Only
single-token charts (no parallel fan-out) compile to an FSM.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .analysis import analyze_flowchart
from .errors import (
    CyclicFsm,
    IncompleteChart,
    MissingDecision,
    NodeNotActive,
    ParallelChartNotCompilable,
    PathExplosion,
    UnknownBranch,
)
from .model import Flowchart, Fsm, FsmState, FsmTransition, NodeKind


@dataclass(frozen=True)
class TraceStep:
    node: str
    chosen_label: Optional[str] = None  # set only where a decision was taken


@dataclass(frozen=True)
class Trace:
    steps: tuple[TraceStep, ...]

    def nodes(self) -> tuple[str, ...]:
        return tuple(s.node for s in self.steps)


def compile_to_fsm(chart: Flowchart) -> Fsm:
    """Translate a single-token chart into a deterministic FSM.

    States mirror nodes one-to-one: start becomes the initial state, end
    nodes become accepting states, decision branch labels become
    transition inputs and plain edges consume no input.
    """
    report = analyze_flowchart(chart)
    forks = [f for f in report.findings if f.code == "ParallelFork"]
    if forks:
        raise ParallelChartNotCompilable(
            "chart fans out from " + ", ".join(f.detail.split()[0] for f in forks)
        )
    if report.has_errors:
        raise IncompleteChart("chart failed structural analysis", findings=report.errors)

    states = tuple(
        FsmState(
            id=n.id,
            label=n.label,
            initial=n.kind is NodeKind.START,
            accepting=n.kind is NodeKind.END,
        )
        for n in chart.nodes
    )
    node_map = chart.node_map
    transitions = tuple(
        FsmTransition(
            src=e.src,
            input=e.label if node_map[e.src].kind is NodeKind.DECISION else None,
            dst=e.dst,
        )
        for e in chart.edges
    )
    fsm = Fsm(states, transitions)
    assert fsm.is_deterministic()  # guaranteed by distinct-branch-label analysis
    return fsm


def _has_cycle(fsm: Fsm) -> bool:
    adjacency: dict[str, list[str]] = {s.id: [] for s in fsm.states}
    for t in fsm.transitions:
        adjacency[t.src].append(t.dst)
    WHITE, GREY, BLACK = 0, 1, 2
    color = {s: WHITE for s in adjacency}
    for origin in adjacency:
        if color[origin] != WHITE:
            continue
        stack: list[tuple[str, int]] = [(origin, 0)]
        color[origin] = GREY
        while stack:
            state, idx = stack[-1]
            if idx < len(adjacency[state]):
                stack[-1] = (state, idx + 1)
                nxt = adjacency[state][idx]
                if color[nxt] == GREY:
                    return True
                if color[nxt] == WHITE:
                    color[nxt] = GREY
                    stack.append((nxt, 0))
            else:
                color[state] = BLACK
                stack.pop()
    return False


def enumerate_paths(fsm: Fsm, max_paths: int) -> list[Trace]:
    """All initial-to-accepting paths, ordered lexicographically by state ids.

    Raises CyclicFsm on any cycle (loops carry no semantics here) and
    PathExplosion as soon as more than `max_paths` paths exist.
    """
    if max_paths < 1:
        raise ValueError("max_paths must be positive")
    if _has_cycle(fsm):
        raise CyclicFsm("path enumeration requires an acyclic FSM")
    initial = fsm.initial_state
    state_map = fsm.state_map
    outgoing: dict[str, list[FsmTransition]] = {s.id: [] for s in fsm.states}
    for t in fsm.transitions:
        outgoing[t.src].append(t)
    for transitions in outgoing.values():
        transitions.sort(key=lambda t: (t.dst, t.input or ""))

    paths: list[Trace] = []

    def walk(state: str, prefix: list[TraceStep]) -> None:
        if state_map[state].accepting:
            paths.append(Trace(tuple(prefix + [TraceStep(state)])))
            if len(paths) > max_paths:
                raise PathExplosion(f"more than {max_paths} initial-to-accepting paths")
        for t in outgoing[state]:
            walk(t.dst, prefix + [TraceStep(state, t.input)])

    walk(initial.id, [])
    return paths


def check_mutual_exclusion(fsm: Fsm, a: str, b: str, max_paths: int = 10_000) -> bool:
    """True when no initial-to-accepting path visits both states."""
    state_map = fsm.state_map
    for state in (a, b):
        if state not in state_map:
            raise ValueError(f"{state} is not a state of the FSM")
    for trace in enumerate_paths(fsm, max_paths):
        visited = set(trace.nodes())
        if a in visited and b in visited:
            return False
    return True


def _require_executable(chart: Flowchart) -> None:
    report = analyze_flowchart(chart)
    if report.has_errors:
        raise IncompleteChart("chart failed structural analysis", findings=report.errors)


def start_execution(chart: Flowchart) -> frozenset[str]:
    """Initial token frontier: one token per edge leaving the start node."""
    _require_executable(chart)
    start = next(n for n in chart.nodes if n.kind is NodeKind.START)
    return frozenset(e.dst for e in chart.outgoing(start.id))


def advance(
    chart: Flowchart,
    frontier: frozenset[str],
    node: str,
    decision: Optional[str] = None,
) -> frozenset[str]:
    """Consume the token on `node` and place successors' tokens.

    Decisions route down the single chosen branch; other nodes fan out
    over every outgoing edge; end nodes absorb their token.
    """
    if node not in frontier:
        raise NodeNotActive(f"{node} holds no token")
    kind = chart.node_map[node].kind
    outgoing = chart.outgoing(node)
    if kind is NodeKind.DECISION:
        if decision is None:
            raise MissingDecision(f"{node} is a decision point; choose one of "
                                  + ", ".join(sorted(e.label or "" for e in outgoing)))
        chosen = [e for e in outgoing if e.label == decision]
        if not chosen:
            raise UnknownBranch(
                f"{node} has no branch labeled {decision!r}; expected one of "
                + ", ".join(sorted(e.label or "" for e in outgoing))
            )
        targets = [chosen[0].dst]
    elif decision is not None:
        raise UnknownBranch(f"{node} is not a decision point; no branch to choose")
    elif kind is NodeKind.END:
        targets = []
    else:
        targets = [e.dst for e in outgoing]
    return (frontier - {node}) | frozenset(targets)
