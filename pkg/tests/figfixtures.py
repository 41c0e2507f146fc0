"""Shared fixture builders: the stolen-device repository used across tests.

Encodes the reference scenario exactly as the project docs describe it:
a three-IRP / five-SOP repository, the stolen-device workflow chart in
both its as-drawn (dead-ended) and repaired forms, and the twelve-state
response-process chart.
"""

from __future__ import annotations

from datetime import date, datetime, timezone
from pathlib import Path

from playbook_engine import (
    DocKind,
    FlowEdge,
    FlowNode,
    Flowchart,
    NodeKind,
    PlaybookDoc,
    RepositoryStore,
    Version,
    serialize_document,
)
from playbook_engine.clocks import scripted_clock

TODAY = date(2024, 1, 7)

SOP_TITLES = {
    "sop_1": "File Police Report",
    "sop_2": "Check Device Encryption",
    "sop_3": "Reset Password",
    "sop_4": "Reset MFA",
    "sop_5": "Add MFA",
}


def fig4_chart(repaired: bool = False, name: str = "irp_sd") -> Flowchart:
    """The stolen-device workflow: parallel fan-out from start plus one
    decision point. As drawn, SOP_2 dead-ends; the repair routes it to end."""
    nodes = (
        FlowNode("start", NodeKind.START, "IRP Start"),
        FlowNode("SOP_3", NodeKind.ACTION, "Reset Password"),
        FlowNode("SOP_1", NodeKind.ACTION, "File Police Report"),
        FlowNode("SOP_2", NodeKind.ACTION, "Check Device Encryption"),
        FlowNode("D1", NodeKind.DECISION, "Decision Point?"),
        FlowNode("SOP_4", NodeKind.ACTION, "Reset MFA"),
        FlowNode("SOP_5", NodeKind.ACTION, "Add MFA"),
        FlowNode("end", NodeKind.END, "IRP End"),
    )
    edges = [
        FlowEdge("start", "SOP_3"),
        FlowEdge("start", "SOP_1"),
        FlowEdge("SOP_3", "D1"),
        FlowEdge("D1", "SOP_4", "yes"),
        FlowEdge("SOP_1", "SOP_2"),
        FlowEdge("D1", "SOP_5", "no"),
        FlowEdge("SOP_5", "end"),
        FlowEdge("SOP_4", "end"),
    ]
    if repaired:
        edges.append(FlowEdge("SOP_2", "end"))
    return Flowchart(name=name, nodes=nodes, edges=tuple(edges))


def fig6_chart(name: str = "device_process") -> Flowchart:
    """Twelve-step single-token response process with branches at S3 and S6."""
    labels = {
        "S1": "Incident Detection",
        "S2": "Device Reported Stolen by Employee",
        "S3": "Can the device be remotely locked or wiped?",
        "S4": "Containment Actions",
        "S5": "Risk Assessment",
        "S6": "Is remote wipe necessary?",
        "S7": "Initiate Remote Wipe",
        "S8": "Eradication Actions",
        "S9": "Recovery Actions",
        "S10": "Monitor Activity",
        "S11": "Post-Incident Analysis",
        "S12": "Process Completion",
    }
    kinds = {"S1": NodeKind.START, "S12": NodeKind.END}
    kinds.update({s: NodeKind.DECISION for s in ("S3", "S6")})
    nodes = tuple(
        FlowNode(s, kinds.get(s, NodeKind.ACTION), labels[s])
        for s in (f"S{i}" for i in range(1, 13))
    )
    edges = (
        FlowEdge("S1", "S2"),
        FlowEdge("S2", "S3"),
        FlowEdge("S3", "S4", "yes"),
        FlowEdge("S3", "S5", "no"),
        FlowEdge("S4", "S6"),
        FlowEdge("S6", "S7", "yes"),
        FlowEdge("S6", "S8", "no"),
        FlowEdge("S5", "S8"),
        FlowEdge("S7", "S8"),
        FlowEdge("S8", "S9"),
        FlowEdge("S9", "S10"),
        FlowEdge("S10", "S11"),
        FlowEdge("S11", "S12"),
    )
    return Flowchart(name=name, nodes=nodes, edges=edges)


FIG4_DSL = """\
node start start "IRP Start"
node SOP_3 action "Reset Password"
node SOP_1 action "File Police Report"
node SOP_2 action "Check Device Encryption"
node D1 decision "Decision Point?"
node SOP_4 action "Reset MFA"
node SOP_5 action "Add MFA"
node end end "IRP End"
edge start SOP_3
edge start SOP_1
edge SOP_3 D1
edge D1 SOP_4 yes
edge SOP_1 SOP_2
edge D1 SOP_5 no
edge SOP_5 end
edge SOP_4 end
"""


def _doc(
    doc_id: str,
    kind: DocKind,
    title: str,
    references: tuple[str, ...] = (),
    chart: Flowchart | None = None,
    reviewed: date = TODAY,
    body: str = "",
) -> PlaybookDoc:
    return PlaybookDoc(
        id=doc_id,
        kind=kind,
        title=title,
        version=Version(1, 0, 0, reviewed),
        owner="secops",
        references=references,
        body=body or f"Use this {kind.value} when responding to the incident.\n",
        flowchart=chart,
    )


def stolen_device_docs(
    chart: str = "repaired", reviewed: date = TODAY
) -> list[PlaybookDoc]:
    """The eight-document repository: three IRPs referencing five SOPs.

    `chart` selects the workflow embedded in irp_sd: "repaired",
    "as-drawn", or "none".
    """
    charts = {
        "repaired": fig4_chart(repaired=True),
        "as-drawn": fig4_chart(repaired=False),
        "none": None,
    }
    docs = [
        _doc(
            "irp_sd", DocKind.IRP, "Stolen Device Response",
            references=("irp_lr", "irp_ca"), chart=charts[chart], reviewed=reviewed,
        ),
        _doc(
            "irp_lr", DocKind.IRP, "Legal Response",
            references=("sop_1", "sop_2"), reviewed=reviewed,
        ),
        _doc(
            "irp_ca", DocKind.IRP, "Compromised Account Response",
            references=("sop_3", "sop_4", "sop_5"), reviewed=reviewed,
        ),
    ]
    docs.extend(
        _doc(sop_id, DocKind.SOP, title, reviewed=reviewed)
        for sop_id, title in sorted(SOP_TITLES.items())
    )
    return docs


def write_repo(root: Path, docs: list[PlaybookDoc]) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for doc in docs:
        (root / f"{doc.id}.playbook").write_text(serialize_document(doc), encoding="utf-8")
    return root


PAPER_TIMELINE = tuple(
    datetime(2024, 1, 7, 9, minute, tzinfo=timezone.utc) for minute in (0, 5, 10, 15, 30)
)

PAPER_NOTES = (
    "Bob reviews the Remote Wipe SOP to ensure proper execution.",
    "Remote Wipe documentation is out of date; the management interface has changed.",
    "Remote wipe initiated on the stolen device after navigating the updated interface.",
    "Proceeding to the Reset Password SOP for the device's user account.",
)


def replay_paper_session(root: Path):
    """Open a stolen-device session and replay the canonical five-event
    timeline (09:00 through 09:30) as note-only entries.

    Returns (store, session).
    """
    store = RepositoryStore(
        root,
        clock=scripted_clock(list(PAPER_TIMELINE)),
        id_factory=lambda: "papersession1",
    )
    session = store.open_session("irp_sd", actor="bob")
    for note in PAPER_NOTES:
        session = store.record_step(session.session_id, note=note, actor="bob")
    return store, session
