"""Filesystem persistence for playbook repositories and incident sessions.

Documents live one-per-file as plain `.playbook` text so they stay
diffable; saves are write-new-then-rename atomic. Sessions append to
JSONL journal files under `_sessions/` and are replayed on store
startup, so a restart never loses a recorded step.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Callable, Optional

from .analysis import (
    Finding,
    LintReport,
    Severity,
    analyze_flowchart,
    lint_repository,
)
from .clocks import Clock, system_clock
from .errors import (
    IncompleteChart,
    InvalidRequest,
    NotAnIrp,
    RejectedByLint,
    RootNotFound,
    SessionNotActive,
    UnknownDoc,
    UnknownSession,
    VersionConflict,
)
from .fsm import advance, start_execution
from .model import (
    DocKind,
    Flowchart,
    IncidentEvent,
    IncidentLog,
    IncidentSession,
    NodeKind,
    PlaybookDoc,
    SessionStatus,
    Version,
    document_violations,
    event_blocks,
)
from .parser import ParseError, parse_document, serialize_document

SESSION_DIR = "_sessions"

CrashHook = Callable[[str], None]


@dataclass
class _SessionSlot:
    session: IncidentSession
    chart: Flowchart
    cond: threading.Condition


class RepositoryStore:
    """Index over one repository directory plus its live incident sessions.

    Reads are unlocked snapshots of immutable values; every write path
    (document saves, session steps) is serialized per entity.
    """

    def __init__(
        self,
        root,
        stale_after_days: int = 180,
        clock: Optional[Clock] = None,
        id_factory: Optional[Callable[[], str]] = None,
        crash_hook: Optional[CrashHook] = None,
    ):
        self.root = Path(root)
        if not self.root.is_dir():
            raise RootNotFound(f"repository root {self.root} does not exist")
        self.stale_after_days = stale_after_days
        self.clock = clock or system_clock
        self._id_factory = id_factory or (lambda: uuid.uuid4().hex[:12])
        self._crash_hook = crash_hook
        self._lock = threading.RLock()
        self._docs: dict[str, PlaybookDoc] = {}
        self._paths: dict[str, Path] = {}
        self._load_findings: tuple[Finding, ...] = ()
        self._sessions: dict[str, _SessionSlot] = {}
        self._load_documents()
        self._replay_journals()

    # -- documents ---------------------------------------------------

    def _load_documents(self) -> None:
        findings: list[Finding] = []
        docs: dict[str, PlaybookDoc] = {}
        paths: dict[str, Path] = {}
        for path in sorted(self.root.glob("*.playbook")):
            try:
                source = path.read_text(encoding="utf-8")
            except OSError as exc:
                findings.append(Finding(Severity.ERROR, "Unreadable", path.stem, str(exc)))
                continue
            except UnicodeDecodeError as exc:
                findings.append(Finding(Severity.ERROR, "Unreadable", path.stem, str(exc)))
                continue
            try:
                doc = parse_document(source, path=str(path))
            except ParseError as exc:
                findings.append(Finding(Severity.ERROR, exc.code.value, path.stem, str(exc)))
                continue
            if doc.id in docs:
                findings.append(
                    Finding(
                        Severity.ERROR, "DuplicateDocId", doc.id,
                        f"{path.name} redeclares id already loaded from {paths[doc.id].name}",
                    )
                )
                continue
            docs[doc.id] = doc
            paths[doc.id] = path
        self._docs = docs
        self._paths = paths
        self._load_findings = tuple(findings)

    def documents(self) -> list[PlaybookDoc]:
        with self._lock:
            return [self._docs[i] for i in sorted(self._docs)]

    def get(self, doc_id: str) -> PlaybookDoc:
        with self._lock:
            if doc_id not in self._docs:
                raise UnknownDoc(f"no document {doc_id} in {self.root}")
            return self._docs[doc_id]

    def lint(self, today=None, stale_after_days: Optional[int] = None) -> LintReport:
        with self._lock:
            docs = self.documents()
            load_findings = self._load_findings
        report = lint_repository(
            docs,
            today or self.clock().date(),
            stale_after_days if stale_after_days is not None else self.stale_after_days,
        )
        return LintReport.of(load_findings + report.findings)

    def save(self, doc: PlaybookDoc, expected_version: Optional[Version]) -> Version:
        """Persist `doc` atomically under optimistic concurrency control.

        `expected_version` None asserts the document is new; otherwise its
        (major, minor, patch) must equal the stored version's. A save that
        would introduce new Error findings is rejected wholesale.
        """
        violations = document_violations(doc)
        if violations:
            raise RejectedByLint(
                f"document {doc.id} violates invariants",
                findings=[Finding(Severity.ERROR, "InvalidDoc", doc.id, v) for v in violations],
            )
        with self._lock:
            current = self._docs.get(doc.id)
            if expected_version is None:
                if current is not None:
                    raise VersionConflict(
                        f"{doc.id} already exists at {current.version}; pass its version to replace it"
                    )
            elif current is None:
                raise VersionConflict(f"{doc.id} does not exist; expected {expected_version}")
            elif current.version.precedence_key != expected_version.precedence_key:
                raise VersionConflict(
                    f"{doc.id} is at {current.version}, not {expected_version}"
                )

            today = self.clock().date()
            before = {}
            for f in lint_repository(self.documents(), today, self.stale_after_days).errors:
                before[f.sort_key()] = before.get(f.sort_key(), 0) + 1
            candidate = [d for i, d in sorted(self._docs.items()) if i != doc.id] + [doc]
            new_errors = []
            for f in lint_repository(candidate, today, self.stale_after_days).errors:
                if before.get(f.sort_key(), 0) > 0:
                    before[f.sort_key()] -= 1
                else:
                    new_errors.append(f)
            if new_errors:
                raise RejectedByLint(
                    f"saving {doc.id} would introduce lint errors", findings=new_errors
                )

            path = self.root / f"{doc.id}.playbook"
            self._atomic_write(path, serialize_document(doc).encode("utf-8"))
            self._docs[doc.id] = doc
            self._paths[doc.id] = path
            return doc.version

    def _atomic_write(self, path: Path, data: bytes) -> None:
        """write-new-then-rename; a crash at any point leaves old or new bytes."""
        hook = self._crash_hook or (lambda stage: None)
        tmp = path.with_name(f"{path.name}.tmp-{uuid.uuid4().hex[:8]}")
        fd = os.open(tmp, os.O_WRONLY | os.O_CREAT | os.O_EXCL, 0o644)
        try:
            hook("created")
            half = len(data) // 2
            os.write(fd, data[:half])
            hook("partial")
            os.write(fd, data[half:])
            hook("written")
            os.fsync(fd)
            hook("fsynced")
        finally:
            os.close(fd)
        hook("pre-rename")
        os.replace(tmp, path)
        hook("post-rename")
        dir_fd = os.open(self.root, os.O_RDONLY)
        try:
            os.fsync(dir_fd)
        finally:
            os.close(dir_fd)

    # -- sessions ----------------------------------------------------

    def _session_path(self, session_id: str) -> Path:
        return self.root / SESSION_DIR / f"{session_id}.jsonl"

    def _journal_append(self, session_id: str, record: dict) -> None:
        path = self._session_path(session_id)
        path.parent.mkdir(exist_ok=True)
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def open_session(self, irp: str, actor: str) -> IncidentSession:
        doc = self.get(irp)
        if doc.kind is not DocKind.IRP:
            raise NotAnIrp(f"{irp} is a {doc.kind.value}, not an IRP")
        if doc.flowchart is None:
            raise IncompleteChart(
                f"{irp} embeds no flowchart",
                findings=(Finding(Severity.ERROR, "NoFlowchart", irp, "document embeds no flowchart"),),
            )
        report = analyze_flowchart(doc.flowchart)
        if report.has_errors:
            raise IncompleteChart(f"{irp} failed flowchart analysis", findings=report.errors)
        frontier = start_execution(doc.flowchart)
        ts = self.clock()
        session = IncidentSession(
            session_id=self._id_factory(),
            irp=irp,
            started=ts,
            status=SessionStatus.ACTIVE,
            frontier=frontier,
            log=(IncidentEvent(ts, actor, f"IRP {doc.title} initiated by {actor}"),),
        )
        with self._lock:
            self._sessions[session.session_id] = _SessionSlot(
                session, doc.flowchart, threading.Condition()
            )
        self._journal_append(
            session.session_id,
            {
                "type": "open",
                "session_id": session.session_id,
                "irp": irp,
                "actor": actor,
                "ts": ts.isoformat(),
                "text": session.log[0].text,
            },
        )
        return session

    def _slot(self, session_id: str) -> _SessionSlot:
        with self._lock:
            if session_id not in self._sessions:
                raise UnknownSession(f"no session {session_id}")
            return self._sessions[session_id]

    def get_session(self, session_id: str) -> IncidentSession:
        return self._slot(session_id).session

    def sessions(self) -> list[IncidentSession]:
        with self._lock:
            return [self._sessions[s].session for s in sorted(self._sessions)]

    def incident_log(self, session_id: str) -> IncidentLog:
        session = self.get_session(session_id)
        return IncidentLog(session.session_id, session.log)

    def _event_timestamp(self, session: IncidentSession) -> datetime:
        # Clamped so a stepping wall clock can never break log monotonicity.
        ts = self.clock()
        if session.log and ts < session.log[-1].timestamp:
            ts = session.log[-1].timestamp
        return ts

    @staticmethod
    def _step_text(chart: Flowchart, node: str, decision: Optional[str], note: str) -> str:
        n = chart.node_map[node]
        if n.kind is NodeKind.DECISION:
            text = f"Decision at {node} ({n.label}): {decision}"
        elif n.kind is NodeKind.END:
            text = f"Reached {node} ({n.label})"
        else:
            text = f"Completed {node} ({n.label})"
        return f"{text}. {note}" if note else text

    def record_step(
        self,
        session_id: str,
        node: Optional[str] = None,
        decision: Optional[str] = None,
        note: str = "",
        actor: str = "responder",
    ) -> IncidentSession:
        """Advance the session's frontier (or append a note-only event)."""
        slot = self._slot(session_id)
        with slot.cond:
            session = slot.session
            if session.status is not SessionStatus.ACTIVE:
                raise SessionNotActive(f"session {session_id} is {session.status.value}")
            ts = self._event_timestamp(session)
            if node is None:
                if decision is not None:
                    raise InvalidRequest("a decision label needs a node to act on")
                if not note:
                    raise InvalidRequest("a note-only step needs note text")
                updated = session.with_event(IncidentEvent(ts, actor, note))
                self._journal_append(
                    session_id,
                    {"type": "note", "actor": actor, "ts": ts.isoformat(), "text": note},
                )
            else:
                frontier = advance(slot.chart, session.frontier, node, decision)
                text = self._step_text(slot.chart, node, decision, note)
                end_reached = (
                    session.end_reached or slot.chart.node_map[node].kind is NodeKind.END
                )
                status = (
                    SessionStatus.COMPLETE
                    if not frontier and end_reached
                    else SessionStatus.ACTIVE
                )
                updated = IncidentSession(
                    session_id=session.session_id,
                    irp=session.irp,
                    started=session.started,
                    status=status,
                    frontier=frontier,
                    log=session.log + (IncidentEvent(ts, actor, text, node=node),),
                    end_reached=end_reached,
                )
                self._journal_append(
                    session_id,
                    {
                        "type": "step",
                        "node": node,
                        "decision": decision,
                        "note": note,
                        "actor": actor,
                        "ts": ts.isoformat(),
                        "text": text,
                    },
                )
            slot.session = updated
            slot.cond.notify_all()
            return updated

    def abort_session(self, session_id: str, actor: str = "responder") -> IncidentSession:
        slot = self._slot(session_id)
        with slot.cond:
            session = slot.session
            if session.status is not SessionStatus.ACTIVE:
                raise SessionNotActive(f"session {session_id} is {session.status.value}")
            ts = self._event_timestamp(session)
            text = f"Incident aborted by {actor}"
            updated = IncidentSession(
                session_id=session.session_id,
                irp=session.irp,
                started=session.started,
                status=SessionStatus.ABORTED,
                frontier=session.frontier,
                log=session.log + (IncidentEvent(ts, actor, text),),
                end_reached=session.end_reached,
            )
            self._journal_append(
                session_id,
                {"type": "abort", "actor": actor, "ts": ts.isoformat(), "text": text},
            )
            slot.session = updated
            slot.cond.notify_all()
            return updated

    def events_since(
        self, session_id: str, after: int = 0, wait: float = 0.0
    ) -> tuple[list[IncidentEvent], int]:
        """Events with index >= `after`; long-polls while the session is live."""
        slot = self._slot(session_id)
        deadline = time.monotonic() + wait
        with slot.cond:
            while (
                len(slot.session.log) <= after
                and slot.session.status is SessionStatus.ACTIVE
                and (remaining := deadline - time.monotonic()) > 0
            ):
                slot.cond.wait(remaining)
            log = slot.session.log
            return list(log[after:]), len(log)

    # -- journal replay ----------------------------------------------

    def _replay_journals(self) -> None:
        journal_dir = self.root / SESSION_DIR
        if not journal_dir.is_dir():
            return
        for path in sorted(journal_dir.glob("*.jsonl")):
            records = []
            for line in path.read_text(encoding="utf-8").splitlines():
                try:
                    records.append(json.loads(line))
                except json.JSONDecodeError:
                    break  # torn tail from an interrupted append; keep the prefix
            session = self._rebuild(records)
            if session is not None:
                chart = self._docs[session.irp].flowchart
                self._sessions[session.session_id] = _SessionSlot(
                    session, chart, threading.Condition()
                )

    def _rebuild(self, records: list[dict]) -> Optional[IncidentSession]:
        if not records or records[0].get("type") != "open":
            return None
        head = records[0]
        doc = self._docs.get(head["irp"])
        if doc is None or doc.flowchart is None:
            return None
        try:
            frontier = start_execution(doc.flowchart)
        except IncompleteChart:
            return None
        started = datetime.fromisoformat(head["ts"])
        session = IncidentSession(
            session_id=head["session_id"],
            irp=head["irp"],
            started=started,
            status=SessionStatus.ACTIVE,
            frontier=frontier,
            log=(IncidentEvent(started, head["actor"], head["text"]),),
        )
        for record in records[1:]:
            ts = datetime.fromisoformat(record["ts"])
            event = IncidentEvent(ts, record["actor"], record["text"], node=record.get("node"))
            if record["type"] == "note":
                session = session.with_event(event)
            elif record["type"] == "abort":
                session = IncidentSession(
                    session_id=session.session_id,
                    irp=session.irp,
                    started=session.started,
                    status=SessionStatus.ABORTED,
                    frontier=session.frontier,
                    log=session.log + (event,),
                    end_reached=session.end_reached,
                )
            elif record["type"] == "step":
                frontier = advance(
                    doc.flowchart, session.frontier, record["node"], record.get("decision")
                )
                end_reached = (
                    session.end_reached
                    or doc.flowchart.node_map[record["node"]].kind is NodeKind.END
                )
                status = (
                    SessionStatus.COMPLETE
                    if not frontier and end_reached
                    else SessionStatus.ACTIVE
                )
                session = IncidentSession(
                    session_id=session.session_id,
                    irp=session.irp,
                    started=session.started,
                    status=status,
                    frontier=frontier,
                    log=session.log + (event,),
                    end_reached=end_reached,
                )
        return session


def load_repository(root) -> tuple[list[PlaybookDoc], LintReport]:
    """Parse every `*.playbook` under `root` and lint the result.

    Per-file parse failures become Error findings; surviving documents
    load normally.
    """
    store = RepositoryStore(root)
    return store.documents(), store.lint()


def save_document(
    store: RepositoryStore, doc: PlaybookDoc, expected_version: Optional[Version]
) -> Version:
    return store.save(doc, expected_version)


def open_session(store: RepositoryStore, irp: str, actor: str) -> IncidentSession:
    return store.open_session(irp, actor)


def export_log(session: IncidentSession) -> str:
    """Byte-stable text export: header block, then one block per event."""
    blocks = [f"Incident log for {session.irp}"] + event_blocks(session.log)
    return "\n\n".join(blocks) + "\n"
