"""Version laws and core-model invariants."""

from __future__ import annotations

from datetime import date

import pytest
from hypothesis import given
from hypothesis import strategies as st

from playbook_engine import (
    Version,
    bump,
    compare_versions,
    stamp_reviewed,
)
from playbook_engine.errors import ReviewDateRegression
from playbook_engine.model import (
    FlowEdge,
    FlowNode,
    Flowchart,
    NodeKind,
    document_violations,
    flowchart_violations,
)
import figfixtures as fig

versions = st.builds(
    Version,
    major=st.integers(0, 999),
    minor=st.integers(0, 999),
    patch=st.integers(0, 999),
    reviewed=st.dates(min_value=date(1900, 1, 1), max_value=date(2200, 12, 31)),
)


class TestCompareVersions:
    def test_reviewed_never_participates(self):
        a = Version.parse("1.2.14.20240107")
        b = Version.parse("1.2.14.20200101")
        assert compare_versions(a, b) == 0

    def test_identity(self):
        v = Version.parse("1.0.0.20240101")
        assert compare_versions(v, v) == 0

    def test_major_dominates(self):
        assert compare_versions(Version.parse("2.0.0.20200101"), Version.parse("1.9.9.20250101")) == 1

    @given(versions, versions)
    def test_antisymmetric(self, a, b):
        assert compare_versions(a, b) == -compare_versions(b, a)

    @given(versions, versions, versions)
    def test_transitive(self, a, b, c):
        if compare_versions(a, b) <= 0 and compare_versions(b, c) <= 0:
            assert compare_versions(a, c) <= 0

    @given(versions, versions)
    def test_total_on_triples(self, a, b):
        cmp = compare_versions(a, b)
        assert cmp in (-1, 0, 1)
        if a.precedence_key == b.precedence_key:
            assert cmp == 0


class TestBump:
    def test_patch_resets_nothing_below(self):
        v = bump(Version.parse("1.2.14.20240107"), "patch", date(2024, 2, 1))
        assert str(v) == "1.2.15.20240201"

    def test_major_resets_lower_parts(self):
        v = bump(Version.parse("1.2.14.20240107"), "major", date(2024, 2, 1))
        assert str(v) == "2.0.0.20240201"

    def test_minor_from_zero_base(self):
        v = bump(Version.parse("0.0.0.20240101"), "minor", date(2024, 1, 2))
        assert str(v) == "0.1.0.20240102"

    @given(versions, st.sampled_from(["major", "minor", "patch"]), st.dates())
    def test_bump_strictly_increases(self, v, part, today):
        assert compare_versions(bump(v, part, today), v) == 1


class TestStampReviewed:
    def test_moves_review_date(self):
        v = stamp_reviewed(Version.parse("1.2.14.20240107"), date(2024, 6, 1))
        assert str(v) == "1.2.14.20240601"

    def test_same_day_idempotent(self):
        v = Version.parse("1.0.0.20240101")
        assert stamp_reviewed(v, date(2024, 1, 1)) == v

    def test_regression_rejected(self):
        with pytest.raises(ReviewDateRegression):
            stamp_reviewed(Version.parse("1.0.0.20240601"), date(2024, 1, 1))

    @given(versions, st.dates())
    def test_never_changes_precedence(self, v, today):
        if today >= v.reviewed:
            assert compare_versions(stamp_reviewed(v, today), v) == 0


class TestVersionParsing:
    def test_paper_example_round_trips_byte_identically(self):
        assert str(Version.parse("1.2.14.20240107")) == "1.2.14.20240107"

    def test_parse_fields(self):
        v = Version.parse("1.2.14.20240107")
        assert (v.major, v.minor, v.patch, v.reviewed) == (1, 2, 14, date(2024, 1, 7))

    @pytest.mark.parametrize("bad", ["1.2.14", "1.2.14.2024", "a.b.c.20240101", "1.2.14.20241332", ""])
    def test_rejects_malformed(self, bad):
        with pytest.raises(ValueError):
            Version.parse(bad)

    def test_rejects_negative_parts(self):
        with pytest.raises(ValueError):
            Version(-1, 0, 0, date(2024, 1, 1))

    @given(versions)
    def test_round_trip(self, v):
        assert Version.parse(str(v)) == v


class TestFlowchartInvariants:
    def test_reference_charts_are_valid(self):
        assert flowchart_violations(fig.fig4_chart()) == []
        assert flowchart_violations(fig.fig4_chart(repaired=True)) == []
        assert flowchart_violations(fig.fig6_chart()) == []

    def test_duplicate_decision_labels_flagged(self):
        chart = Flowchart(
            "c",
            (
                FlowNode("s", NodeKind.START, "s"),
                FlowNode("d", NodeKind.DECISION, "d"),
                FlowNode("a", NodeKind.ACTION, "a"),
                FlowNode("b", NodeKind.ACTION, "b"),
                FlowNode("e", NodeKind.END, "e"),
            ),
            (
                FlowEdge("s", "d"),
                FlowEdge("d", "a", "yes"),
                FlowEdge("d", "b", "yes"),
                FlowEdge("a", "e"),
                FlowEdge("b", "e"),
            ),
        )
        assert any("duplicate branch label" in p for p in flowchart_violations(chart))

    def test_start_and_end_edge_rules(self):
        chart = Flowchart(
            "c",
            (FlowNode("s", NodeKind.START, "s"), FlowNode("e", NodeKind.END, "e")),
            (FlowEdge("e", "s"),),
        )
        problems = flowchart_violations(chart)
        assert any("outgoing" in p for p in problems)
        assert any("incoming" in p for p in problems)


class TestDocumentInvariants:
    def test_reference_docs_are_valid(self):
        for doc in fig.stolen_device_docs("repaired"):
            assert document_violations(doc) == []

    def test_self_reference_rejected(self):
        doc = fig.stolen_device_docs()[1]
        bad = type(doc)(**{**doc.__dict__, "references": ("irp_lr",)})
        assert any("references itself" in p for p in document_violations(bad))

    def test_chart_ref_must_be_declared(self):
        chart = Flowchart(
            "c",
            (
                FlowNode("s", NodeKind.START, "s"),
                FlowNode("a", NodeKind.ACTION, "a", ref="sop_9"),
                FlowNode("e", NodeKind.END, "e"),
            ),
            (FlowEdge("s", "a"), FlowEdge("a", "e")),
        )
        doc = fig.stolen_device_docs()[0]
        bad = type(doc)(**{**doc.__dict__, "flowchart": chart})
        assert any("sop_9" in p for p in document_violations(bad))
