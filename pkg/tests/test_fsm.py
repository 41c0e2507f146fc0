"""FSM compilation, path enumeration, mutual exclusion, token execution."""

from __future__ import annotations

import random

import pytest

from playbook_engine import (
    FlowEdge,
    FlowNode,
    Flowchart,
    NodeKind,
    Trace,
    TraceStep,
    advance,
    check_mutual_exclusion,
    compile_to_fsm,
    enumerate_paths,
    parse_flowchart,
    start_execution,
)
from playbook_engine.errors import (
    CyclicFsm,
    IncompleteChart,
    MissingDecision,
    NodeNotActive,
    ParallelChartNotCompilable,
    PathExplosion,
    UnknownBranch,
)
import figfixtures as fig

TWO_NODE = parse_flowchart('node start start "IRP Start"\nnode end end "IRP End"\nedge start end\n')


def trace(*steps) -> Trace:
    return Trace(tuple(TraceStep(n, l) for n, l in steps))


FIG6_EXPECTED = [
    trace(
        ("S1", None), ("S2", None), ("S3", "yes"), ("S4", None), ("S6", "yes"),
        ("S7", None), ("S8", None), ("S9", None), ("S10", None), ("S11", None), ("S12", None),
    ),
    trace(
        ("S1", None), ("S2", None), ("S3", "yes"), ("S4", None), ("S6", "no"),
        ("S8", None), ("S9", None), ("S10", None), ("S11", None), ("S12", None),
    ),
    trace(
        ("S1", None), ("S2", None), ("S3", "no"), ("S5", None),
        ("S8", None), ("S9", None), ("S10", None), ("S11", None), ("S12", None),
    ),
]


class TestCompile:
    def test_twelve_state_process(self):
        fsm = compile_to_fsm(fig.fig6_chart())
        assert len(fsm.states) == 12
        assert fsm.initial_state.id == "S1"
        assert [s.id for s in fsm.states if s.accepting] == ["S12"]
        branch_inputs = {t.src: t.input for t in fsm.transitions if t.input}
        assert set(branch_inputs) == {"S3", "S6"}
        assert fsm.is_deterministic()

    def test_two_node_chart(self):
        fsm = compile_to_fsm(TWO_NODE)
        assert len(fsm.states) == 2
        assert len(fsm.transitions) == 1
        assert fsm.transitions[0].input is None

    def test_parallel_chart_not_compilable(self):
        with pytest.raises(ParallelChartNotCompilable):
            compile_to_fsm(fig.fig4_chart())
        with pytest.raises(ParallelChartNotCompilable):
            compile_to_fsm(fig.fig4_chart(repaired=True))

    def test_incomplete_chart_rejected_with_findings(self):
        chart = Flowchart(
            "c",
            (
                FlowNode("s", NodeKind.START, "s"),
                FlowNode("a", NodeKind.ACTION, "a"),
                FlowNode("e", NodeKind.END, "e"),
            ),
            (FlowEdge("s", "a"),),  # a dead-ends; e unreachable
        )
        with pytest.raises(IncompleteChart) as exc:
            compile_to_fsm(chart)
        assert {f.code for f in exc.value.findings} == {"DeadEnd", "UnreachableNode"}


class TestEnumeratePaths:
    def test_twelve_state_paths(self):
        fsm = compile_to_fsm(fig.fig6_chart())
        assert enumerate_paths(fsm, max_paths=100) == FIG6_EXPECTED

    def test_two_node_single_path(self):
        paths = enumerate_paths(compile_to_fsm(TWO_NODE), max_paths=10)
        assert paths == [trace(("start", None), ("end", None))]

    def test_path_explosion(self):
        fsm = compile_to_fsm(fig.fig6_chart())
        with pytest.raises(PathExplosion):
            enumerate_paths(fsm, max_paths=2)

    def test_cycles_rejected(self):
        chart = Flowchart(
            "c",
            (
                FlowNode("s", NodeKind.START, "s"),
                FlowNode("a", NodeKind.ACTION, "a"),
                FlowNode("d", NodeKind.DECISION, "retry?"),
                FlowNode("e", NodeKind.END, "e"),
            ),
            (
                FlowEdge("s", "a"),
                FlowEdge("a", "d"),
                FlowEdge("d", "a", "yes"),
                FlowEdge("d", "e", "no"),
            ),
        )
        with pytest.raises(CyclicFsm):
            enumerate_paths(compile_to_fsm(chart), max_paths=100)


class TestMutualExclusion:
    def test_exclusive_states(self):
        fsm = compile_to_fsm(fig.fig6_chart())
        assert check_mutual_exclusion(fsm, "S7", "S5") is True

    def test_shared_states(self):
        fsm = compile_to_fsm(fig.fig6_chart())
        assert check_mutual_exclusion(fsm, "S8", "S9") is False

    def test_self_pair_reachable(self):
        fsm = compile_to_fsm(fig.fig6_chart())
        assert check_mutual_exclusion(fsm, "S7", "S7") is False

    def test_symmetric(self):
        fsm = compile_to_fsm(fig.fig6_chart())
        pairs = [("S7", "S5"), ("S8", "S9"), ("S4", "S5"), ("S1", "S12")]
        for a, b in pairs:
            assert check_mutual_exclusion(fsm, a, b) == check_mutual_exclusion(fsm, b, a)

    def test_unknown_state_rejected(self):
        fsm = compile_to_fsm(TWO_NODE)
        with pytest.raises(ValueError):
            check_mutual_exclusion(fsm, "start", "ghost")


class TestStartExecution:
    def test_repaired_chart_opens_two_tracks(self):
        assert start_execution(fig.fig4_chart(repaired=True)) == {"SOP_3", "SOP_1"}

    def test_two_node_chart(self):
        assert start_execution(TWO_NODE) == {"end"}

    def test_failing_chart_rejected(self):
        with pytest.raises(IncompleteChart) as exc:
            start_execution(fig.fig4_chart(repaired=False))
        assert any(f.code == "DeadEnd" for f in exc.value.findings)


class TestAdvance:
    CHART = fig.fig4_chart(repaired=True)

    def test_decision_routes_one_branch(self):
        frontier = frozenset({"D1", "SOP_2"})
        assert advance(self.CHART, frontier, "D1", "yes") == {"SOP_4", "SOP_2"}

    def test_end_absorbs_token(self):
        frontier = frozenset({"end"})
        assert advance(self.CHART, frontier, "end") == frozenset()

    def test_unknown_branch(self):
        with pytest.raises(UnknownBranch):
            advance(self.CHART, frozenset({"D1"}), "D1", "maybe")

    def test_missing_decision(self):
        with pytest.raises(MissingDecision):
            advance(self.CHART, frozenset({"D1"}), "D1")

    def test_node_not_active(self):
        with pytest.raises(NodeNotActive):
            advance(self.CHART, frozenset({"SOP_2"}), "D1", "yes")

    def test_decision_label_on_action_rejected(self):
        with pytest.raises(UnknownBranch):
            advance(self.CHART, frozenset({"SOP_2"}), "SOP_2", "yes")

    def test_action_fans_out(self):
        chart = Flowchart(
            "c",
            (
                FlowNode("s", NodeKind.START, "s"),
                FlowNode("a", NodeKind.ACTION, "a"),
                FlowNode("b", NodeKind.ACTION, "b"),
                FlowNode("c", NodeKind.ACTION, "c"),
                FlowNode("e", NodeKind.END, "e"),
            ),
            (
                FlowEdge("s", "a"),
                FlowEdge("a", "b"),
                FlowEdge("a", "c"),
                FlowEdge("b", "e"),
                FlowEdge("c", "e"),
            ),
        )
        assert advance(chart, frozenset({"a"}), "a") == {"b", "c"}

    def test_token_conservation_and_termination(self):
        rng = random.Random(7)
        for _ in range(50):
            frontier = start_execution(self.CHART)
            end_seen = False
            steps = 0
            while frontier:
                steps += 1
                assert steps <= 32, "execution must terminate"
                node = rng.choice(sorted(frontier))
                kind = self.CHART.node_map[node].kind
                decision = rng.choice(["yes", "no"]) if kind is NodeKind.DECISION else None
                updated = advance(self.CHART, frontier, node, decision)
                assert node not in updated or any(
                    e.dst == node for e in self.CHART.outgoing(node)
                )
                added = updated - frontier
                assert added | (frontier - {node}) >= updated  # only declared targets appear
                if kind is NodeKind.END:
                    end_seen = True
                frontier = updated
            assert end_seen


# -- oracle: compilation preserves paths --------------------------------


def random_single_token_chart(rng: random.Random) -> Flowchart:
    nodes = [FlowNode("start", NodeKind.START, "start"), FlowNode("fin", NodeKind.END, "fin")]
    edges: list[FlowEdge] = []
    counter = {"n": 0}

    def fresh(kind: str) -> str:
        counter["n"] += 1
        return f"{kind}{counter['n']:02d}"

    def build(depth: int) -> str:
        roll = rng.random()
        if depth <= 0 or roll < 0.3:
            return "fin"
        if roll < 0.7:
            node = fresh("act")
            nodes.append(FlowNode(node, NodeKind.ACTION, node))
            edges.append(FlowEdge(node, build(depth - 1)))
            return node
        node = fresh("dec")
        nodes.append(FlowNode(node, NodeKind.DECISION, node))
        for i in range(rng.randint(2, 3)):
            edges.append(FlowEdge(node, build(depth - 1), f"br{i}"))
        return node

    edges.append(FlowEdge("start", build(rng.randint(1, 3))))
    return Flowchart("gen", tuple(nodes), tuple(edges))


def chart_traces_oracle(chart: Flowchart) -> list[tuple[tuple[str, str | None], ...]]:
    """Brute-force DFS over the chart itself, independent of the FSM."""
    node_map = chart.node_map
    outgoing: dict[str, list[FlowEdge]] = {}
    for e in chart.edges:
        outgoing.setdefault(e.src, []).append(e)
    start = next(n.id for n in chart.nodes if n.kind is NodeKind.START)
    results: list[tuple[tuple[str, str | None], ...]] = []

    def dfs(node: str, acc: list[tuple[str, str | None]]) -> None:
        if node_map[node].kind is NodeKind.END:
            results.append(tuple(acc + [(node, None)]))
            return
        for edge in outgoing.get(node, []):
            label = edge.label if node_map[node].kind is NodeKind.DECISION else None
            dfs(edge.dst, acc + [(node, label)])

    dfs(start, [])
    # ordering contract: lexicographic on the state-id sequence, branch
    # labels only breaking ties between same-sequence paths
    return sorted(
        results,
        key=lambda t: (tuple(n for n, _ in t), tuple(l or "" for _, l in t)),
    )


def test_compilation_preserves_paths():
    rng = random.Random(1306)
    for _ in range(120):
        chart = random_single_token_chart(rng)
        expected = chart_traces_oracle(chart)
        fsm = compile_to_fsm(chart)
        got = [tuple((s.node, s.chosen_label) for s in t.steps) for t in enumerate_paths(fsm, 10_000)]
        assert got == expected
        assert len(got) == len(expected)


def test_path_count_matches_oracle_on_reference_chart():
    fsm = compile_to_fsm(fig.fig6_chart())
    assert len(enumerate_paths(fsm, 100)) == len(chart_traces_oracle(fig.fig6_chart()))
