"""HTTP JSON API over a repository store, consumed by the CLI and web console.

Errors travel as `{code, message, findings?}` envelopes with 400/404/409
status codes mapped per operation. All mutations funnel through the
store's save/step contracts, so the API path and the library path can
never produce different session outcomes.
"""

from __future__ import annotations

import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional
from urllib.parse import parse_qs, urlparse

from .analysis import Finding
from .assist import AssistClient, AssistContext, SopProposal
from .errors import BindFailure, InvalidRequest, PlaybookError, UnknownDoc
from .model import (
    Flowchart,
    IncidentEvent,
    IncidentSession,
    PlaybookDoc,
    Version,
)
from .parser import emit_mermaid, parse_document
from .store import RepositoryStore, export_log

_STATUS_BY_CODE = {
    "UnknownDoc": 404,
    "UnknownSession": 404,
    "RootNotFound": 404,
    "VersionConflict": 409,
    "NodeNotActive": 409,
    "SessionNotActive": 409,
}

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".svg": "image/svg+xml",
    ".ico": "image/x-icon",
}

_MAX_BODY = 4 * 1024 * 1024
_MAX_LONG_POLL = 30.0


def _finding_record(f: Finding) -> dict:
    return {"severity": f.severity.value, "code": f.code, "doc": f.doc, "detail": f.detail}


def _chart_record(chart: Flowchart) -> dict:
    return {
        "name": chart.name,
        "nodes": [
            {"id": n.id, "kind": n.kind.value, "label": n.label, "ref": n.ref}
            for n in chart.nodes
        ],
        "edges": [{"from": e.src, "to": e.dst, "label": e.label} for e in chart.edges],
    }


def _event_record(seq: int, event: IncidentEvent) -> dict:
    return {
        "seq": seq,
        "timestamp": event.timestamp.isoformat(),
        "actor": event.actor,
        "node": event.node,
        "text": event.text,
    }


def _session_record(session: IncidentSession, chart: Optional[Flowchart]) -> dict:
    node_map = chart.node_map if chart is not None else {}
    frontier = []
    for node_id in sorted(session.frontier):
        node = node_map.get(node_id)
        frontier.append(
            {
                "node": node_id,
                "kind": node.kind.value if node else None,
                "label": node.label if node else node_id,
                "ref": node.ref if node else None,
                "branches": sorted(
                    e.label for e in (chart.outgoing(node_id) if chart else ()) if e.label
                ),
            }
        )
    return {
        "session_id": session.session_id,
        "irp": session.irp,
        "status": session.status.value,
        "started": session.started.isoformat(),
        "frontier": frontier,
        "event_count": len(session.log),
    }


class PlaybookService:
    """Route table plus JSON marshalling; one instance serves one store."""

    def __init__(
        self,
        store: RepositoryStore,
        assist_client: Optional[AssistClient] = None,
        static_dir: Optional[Path] = None,
    ):
        self.store = store
        self.assist_client = assist_client
        self.static_dir = Path(static_dir).resolve() if static_dir else None
        self.routes = [
            ("GET", re.compile(r"^/api/documents$"), self.list_documents),
            ("GET", re.compile(r"^/api/documents/(?P<doc_id>[^/]+)$"), self.get_document),
            ("PUT", re.compile(r"^/api/documents/(?P<doc_id>[^/]+)$"), self.put_document),
            ("GET", re.compile(r"^/api/documents/(?P<doc_id>[^/]+)/mermaid$"), self.get_mermaid),
            ("POST", re.compile(r"^/api/lint$"), self.post_lint),
            ("POST", re.compile(r"^/api/sessions$"), self.post_session),
            ("GET", re.compile(r"^/api/sessions/(?P<session_id>[^/]+)$"), self.get_session),
            ("POST", re.compile(r"^/api/sessions/(?P<session_id>[^/]+)/steps$"), self.post_step),
            ("GET", re.compile(r"^/api/sessions/(?P<session_id>[^/]+)/log$"), self.get_log),
            ("GET", re.compile(r"^/api/sessions/(?P<session_id>[^/]+)/events$"), self.get_events),
            ("POST", re.compile(r"^/api/assist/(?P<op>[a-z]+)$"), self.post_assist),
        ]

    # -- documents -----------------------------------------------------

    def _stale(self, doc: PlaybookDoc) -> bool:
        age = (self.store.clock().date() - doc.version.reviewed).days
        return age > self.store.stale_after_days

    def list_documents(self, request) -> tuple[int, dict]:
        docs = self.store.documents()
        return 200, {
            "documents": [
                {
                    "id": d.id,
                    "kind": d.kind.value,
                    "title": d.title,
                    "version": str(d.version),
                    "stale": self._stale(d),
                }
                for d in docs
            ]
        }

    def get_document(self, request, doc_id: str) -> tuple[int, dict]:
        doc = self.store.get(doc_id)
        return 200, {
            "id": doc.id,
            "kind": doc.kind.value,
            "title": doc.title,
            "version": str(doc.version),
            "owner": doc.owner,
            "references": list(doc.references),
            "tech_context": list(doc.tech_context),
            "body": doc.body,
            "flowchart": _chart_record(doc.flowchart) if doc.flowchart else None,
            "stale": self._stale(doc),
        }

    def put_document(self, request, doc_id: str) -> tuple[int, dict]:
        doc = parse_document(request.text, path=f"{doc_id}.playbook")
        if doc.id != doc_id:
            raise InvalidRequest(f"body declares id {doc.id}, URL names {doc_id}")
        header = request.headers.get("X-Expected-Version")
        expected = Version.parse(header) if header else None
        stored = self.store.save(doc, expected_version=expected)
        return 200, {"id": doc.id, "version": str(stored)}

    def get_mermaid(self, request, doc_id: str) -> tuple[int, str]:
        doc = self.store.get(doc_id)
        if doc.flowchart is None:
            raise UnknownDoc(f"{doc_id} embeds no flowchart")
        return 200, emit_mermaid(doc.flowchart)

    def post_lint(self, request) -> tuple[int, dict]:
        body = request.json
        report = self.store.lint(stale_after_days=body.get("stale_after_days"))
        return 200, {
            "findings": [_finding_record(f) for f in report.findings],
            "errors": len(report.errors),
        }

    # -- sessions ------------------------------------------------------

    def _chart_for(self, session: IncidentSession) -> Optional[Flowchart]:
        try:
            return self.store.get(session.irp).flowchart
        except UnknownDoc:
            return None

    def post_session(self, request) -> tuple[int, dict]:
        body = request.json
        irp = body.get("irp")
        if not irp:
            raise InvalidRequest("body must name the irp to execute")
        session = self.store.open_session(irp, actor=body.get("actor", "responder"))
        return 201, _session_record(session, self._chart_for(session))

    def get_session(self, request, session_id: str) -> tuple[int, dict]:
        session = self.store.get_session(session_id)
        return 200, _session_record(session, self._chart_for(session))

    def post_step(self, request, session_id: str) -> tuple[int, dict]:
        body = request.json
        session = self.store.record_step(
            session_id,
            node=body.get("node"),
            decision=body.get("decision"),
            note=body.get("note", ""),
            actor=body.get("actor", "responder"),
        )
        return 200, _session_record(session, self._chart_for(session))

    def get_log(self, request, session_id: str) -> tuple[int, str]:
        return 200, export_log(self.store.get_session(session_id))

    def get_events(self, request, session_id: str) -> tuple[int, dict]:
        after = int(request.query.get("after", ["0"])[0])
        wait = min(float(request.query.get("wait", ["0"])[0]), _MAX_LONG_POLL)
        events, total = self.store.events_since(session_id, after=after, wait=wait)
        session = self.store.get_session(session_id)
        return 200, {
            "events": [_event_record(after + i, e) for i, e in enumerate(events)],
            "next": total,
            "status": session.status.value,
        }

    # -- assist --------------------------------------------------------

    def post_assist(self, request, op: str) -> tuple[int, dict]:
        if self.assist_client is None:
            raise InvalidRequest("no assist provider configured on this service")
        body = request.json
        ctx = AssistContext(
            tech_stack=tuple(body.get("tech_stack", ())),
            compliance=tuple(body.get("compliance", ())),
            org_notes=body.get("org_notes"),
        )
        if op == "enumerate":
            proposals = self.assist_client.enumerate_sops(ctx)
            return 200, {
                "proposals": [{"title": p.title, "description": p.description} for p in proposals]
            }
        if op == "prioritize":
            proposals = [
                SopProposal(p["title"], p.get("description", ""))
                for p in body.get("proposals", ())
            ]
            ranked = self.assist_client.prioritize(proposals, int(body.get("n", 3)), ctx)
            return 200, {"ranked": [self._ranked_record(r) for r in ranked]}
        if op == "gaps":
            candidates = [
                SopProposal(p["title"], p.get("description", ""))
                for p in body.get("candidates", ())
            ]
            ranked = self.assist_client.gap_analysis(self.store.documents(), candidates, ctx)
            return 200, {"ranked": [self._ranked_record(r) for r in ranked]}
        if op == "draft":
            doc = self.assist_client.draft_irp(body.get("scenario", ""), ctx)
            if body.get("save"):
                self.store.save(doc, expected_version=None)
            return 200, {
                "id": doc.id,
                "title": doc.title,
                "version": str(doc.version),
                "body": doc.body,
                "saved": bool(body.get("save")),
            }
        if op == "postmortem":
            session_id = body.get("session_id")
            if not session_id:
                raise InvalidRequest("body must name the session_id to review")
            log = self.store.incident_log(session_id)
            before = len(self.assist_client.audit_trail())
            commentary, recommendations = self.assist_client.postmortem_commentary(log, ctx)
            raw = next(
                (
                    r.response
                    for r in self.assist_client.audit_trail()[before:]
                    if r.operation == "postmortem"
                ),
                "",
            )
            return 200, {
                "commentary": commentary,
                "recommendations": recommendations,
                "raw": raw,
            }
        raise InvalidRequest(f"unknown assist operation {op!r}")

    @staticmethod
    def _ranked_record(r) -> dict:
        return {
            "rank": r.rank,
            "title": r.proposal.title,
            "description": r.proposal.description,
            "rationale": r.rationale,
        }

    # -- static assets ---------------------------------------------------

    def static_asset(self, path: str) -> Optional[tuple[str, bytes]]:
        if self.static_dir is None:
            return None
        relative = path.lstrip("/") or "index.html"
        target = (self.static_dir / relative).resolve()
        if not str(target).startswith(str(self.static_dir)) or not target.is_file():
            return None
        content_type = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        return content_type, target.read_bytes()


class _Request:
    """What a route handler sees: parsed URL, headers, and body."""

    def __init__(self, handler: BaseHTTPRequestHandler):
        parsed = urlparse(handler.path)
        self.path = parsed.path
        self.query = parse_qs(parsed.query)
        self.headers = handler.headers
        length = int(handler.headers.get("Content-Length") or 0)
        if length > _MAX_BODY:
            raise InvalidRequest("request body too large")
        self.raw = handler.rfile.read(length) if length else b""

    @property
    def text(self) -> str:
        return self.raw.decode("utf-8")

    @property
    def json(self) -> dict:
        if not self.raw:
            return {}
        try:
            parsed = json.loads(self.raw)
        except json.JSONDecodeError as exc:
            raise InvalidRequest(f"request body is not JSON: {exc}") from exc
        if not isinstance(parsed, dict):
            raise InvalidRequest("request body must be a JSON object")
        return parsed


def _make_handler(service: PlaybookService):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, format, *args):  # noqa: A002 - stdlib signature
            pass

        def _respond(self, status: int, payload, content_type="application/json") -> None:
            body = (
                json.dumps(payload).encode("utf-8")
                if content_type == "application/json"
                else payload.encode("utf-8") if isinstance(payload, str) else payload
            )
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _dispatch(self, method: str) -> None:
            try:
                request = _Request(self)
                for verb, pattern, fn in service.routes:
                    if verb != method:
                        continue
                    match = pattern.match(request.path)
                    if match:
                        status, payload = fn(request, **match.groupdict())
                        if isinstance(payload, str):
                            self._respond(status, payload, "text/plain; charset=utf-8")
                        else:
                            self._respond(status, payload)
                        return
                if method == "GET":
                    asset = service.static_asset(request.path)
                    if asset is not None:
                        content_type, body = asset
                        self._respond(200, body, content_type)
                        return
                self._respond(404, {"code": "NotFound", "message": f"no route {request.path}"})
            except PlaybookError as exc:
                code = exc.code.value if not isinstance(exc.code, str) else exc.code
                envelope = {"code": code, "message": str(exc)}
                findings = getattr(exc, "findings", None)
                if findings:
                    envelope["findings"] = [_finding_record(f) for f in findings]
                raw_text = getattr(exc, "raw_text", None)
                if raw_text:
                    envelope["raw_text"] = raw_text
                self._respond(_STATUS_BY_CODE.get(code, 400), envelope)
            except Exception as exc:  # pragma: no cover - defensive boundary
                self._respond(500, {"code": "Internal", "message": str(exc)})

        def do_GET(self):
            self._dispatch("GET")

        def do_POST(self):
            self._dispatch("POST")

        def do_PUT(self):
            self._dispatch("PUT")

    return Handler


class RunningService:
    """A bound, background-threaded HTTP server with graceful shutdown."""

    def __init__(self, service: PlaybookService, host: str, port: int):
        try:
            self.httpd = ThreadingHTTPServer((host, port), _make_handler(service))
        except OSError as exc:
            raise BindFailure(f"cannot bind {host}:{port}: {exc}") from exc
        self.httpd.daemon_threads = True
        self.service = service
        self.host, self.port = self.httpd.server_address[:2]
        # tight poll so shutdown() returns promptly
        self._thread = threading.Thread(
            target=lambda: self.httpd.serve_forever(poll_interval=0.05), daemon=True
        )

    @property
    def base_url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start(self) -> "RunningService":
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self.httpd.serve_forever(poll_interval=0.05)

    def shutdown(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()


def serve(
    store: RepositoryStore,
    bind_address: str = "127.0.0.1:8321",
    assist_client: Optional[AssistClient] = None,
    static_dir: Optional[Path] = None,
) -> RunningService:
    """Bind the API (and optional static assets) and return the running server.

    The caller decides between `start()` (background thread) and
    `serve_forever()` (block until `shutdown()`; the CLI wires signals).
    """
    host, _, port_text = bind_address.partition(":")
    try:
        port = int(port_text or "0")
    except ValueError as exc:
        raise BindFailure(f"bad bind address {bind_address!r}") from exc
    service = PlaybookService(store, assist_client=assist_client, static_dir=static_dir)
    return RunningService(service, host or "127.0.0.1", port)
