"""Operator command line: repository maintenance, analysis, drafting, execution.

Exit codes are stable: 0 success, 1 lint errors present, 2 usage error
(including unknown documents), 3 provider or runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import signal
import sys
import threading
from pathlib import Path
from typing import Optional, Sequence

from .analysis import build_ref_graph, render_structured, render_text, transitive_refs
from .assist import AssistClient, AssistContext, ProviderConfig, SopProposal
from .clocks import Clock, clock_from_env, system_clock
from .errors import (
    IncompleteChart,
    InvalidRequest,
    PlaybookError,
    ProviderError,
    UnknownDoc,
    VersionConflict,
)
from .model import NodeKind, bump, stamp_reviewed
from .parser import emit_mermaid
from .service import serve
from .store import RepositoryStore, export_log

EXIT_OK = 0
EXIT_LINT = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 3


def _resolve_root(args) -> Path:
    root = args.root or os.environ.get("PLAYBOOK_ROOT") or "."
    return Path(root)


def _clock(override: Optional[Clock] = None) -> Clock:
    return override or clock_from_env() or system_clock


def _store(args, clock: Optional[Clock] = None) -> RepositoryStore:
    return RepositoryStore(_resolve_root(args), clock=_clock(clock))


def _assist_client(args) -> AssistClient:
    if args.mock:
        fixtures = Path(args.fixtures) if getattr(args, "fixtures", None) else None
        config = ProviderConfig.mock(fixtures)
    else:
        endpoint = os.environ.get("PLAYBOOK_LLM_ENDPOINT", "")
        if not endpoint:
            raise ProviderError(
                "no provider configured; set PLAYBOOK_LLM_ENDPOINT or pass --mock"
            )
        config = ProviderConfig(
            endpoint=endpoint,
            model_name=os.environ.get("PLAYBOOK_LLM_MODEL", ""),
            timeout=float(os.environ.get("PLAYBOOK_LLM_TIMEOUT", "30")),
        )
    return AssistClient(config, today=lambda: _clock()().date())


def _context(args) -> AssistContext:
    return AssistContext(
        tech_stack=tuple(args.tech or ()),
        compliance=tuple(args.compliance or ()),
        org_notes=args.notes,
    )


# -- commands ----------------------------------------------------------


def cmd_lint(args) -> int:
    store = _store(args)
    report = store.lint(stale_after_days=args.stale_after)
    text = render_structured(report) if args.format == "structured" else render_text(report)
    sys.stdout.write(text)
    return EXIT_LINT if report.has_errors else EXIT_OK


def cmd_graph(args) -> int:
    store = _store(args)
    doc = store.get(args.doc)
    if args.mermaid:
        if doc.flowchart is None:
            raise UnknownDoc(f"{doc.id} embeds no flowchart to render")
        sys.stdout.write(emit_mermaid(doc.flowchart))
        return EXIT_OK
    graph = build_ref_graph(store.documents())
    for ref in sorted(transitive_refs(graph, doc.id)):
        print(ref)
    return EXIT_OK


def cmd_version(args) -> int:
    store = _store(args)
    doc = store.get(args.doc)
    today = _clock()().date()
    if args.action == "bump":
        new_version = bump(doc.version, args.part, today)
    else:
        new_version = stamp_reviewed(doc.version, today)
    updated = type(doc)(**{**doc.__dict__, "version": new_version})
    store.save(updated, expected_version=doc.version)
    print(new_version)
    return EXIT_OK


def run_exec(
    root,
    irp: str,
    script: Sequence[str] = (),
    clock: Optional[Clock] = None,
    actor: str = "operator",
    interactive: bool = False,
):
    """Headless tabletop run: walk the IRP answering decisions from `script`.

    Nodes advance in deterministic (sorted) order so identical scripts
    always produce identical logs. Returns (store, completed session).
    """
    store = RepositoryStore(root, clock=_clock(clock))
    session = store.open_session(irp, actor=actor)
    chart = store.get(irp).flowchart
    answers = list(script)
    while session.frontier:
        node = sorted(session.frontier)[0]
        decision = None
        if chart.node_map[node].kind is NodeKind.DECISION:
            if answers:
                decision = answers.pop(0)
            elif interactive:
                labels = sorted(e.label for e in chart.outgoing(node) if e.label)
                decision = input(f"{node} ({chart.node_map[node].label}) [{'/'.join(labels)}]: ")
            else:
                raise InvalidRequest(
                    f"decision script exhausted at {node}; supply more --script answers"
                )
        session = store.record_step(session.session_id, node=node, decision=decision, actor=actor)
    return store, session


def cmd_exec(args) -> int:
    script = [s for chunk in (args.script or ()) for s in chunk.split(",") if s]
    try:
        _, session = run_exec(
            _resolve_root(args),
            args.irp,
            script,
            interactive=sys.stdin.isatty() and not args.script,
        )
    except IncompleteChart as exc:
        sys.stderr.write(f"{exc}\n")
        for finding in exc.findings:
            sys.stderr.write(f"  {finding.severity.value.upper()} {finding.code}: {finding.detail}\n")
        return EXIT_LINT
    except InvalidRequest as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_RUNTIME
    sys.stdout.write(export_log(session))
    return EXIT_OK if session.status.value == "complete" else EXIT_RUNTIME


def _load_proposals(path: str) -> list[SopProposal]:
    records = json.loads(Path(path).read_text(encoding="utf-8"))
    return [SopProposal(r["title"], r.get("description", "")) for r in records]


def _print_proposals(proposals, as_json: bool) -> None:
    if as_json:
        print(json.dumps([{"title": p.title, "description": p.description} for p in proposals]))
        return
    for i, p in enumerate(proposals, start=1):
        line = f"{i}. {p.title}"
        if p.description:
            line += f": {p.description}"
        print(line)


def _print_ranked(ranked, as_json: bool) -> None:
    if as_json:
        print(
            json.dumps(
                [
                    {
                        "rank": r.rank,
                        "title": r.proposal.title,
                        "rationale": r.rationale,
                    }
                    for r in ranked
                ]
            )
        )
        return
    for r in ranked:
        print(f"{r.rank}. {r.proposal.title}: {r.rationale}")


def cmd_assist(args) -> int:
    client = _assist_client(args)
    ctx = _context(args)
    if args.assist_op == "enumerate":
        _print_proposals(client.enumerate_sops(ctx), args.json)
        return EXIT_OK
    if args.assist_op == "prioritize":
        proposals = (
            _load_proposals(args.proposals) if args.proposals else client.enumerate_sops(ctx)
        )
        _print_ranked(client.prioritize(proposals, args.n, ctx), args.json)
        return EXIT_OK
    if args.assist_op == "gaps":
        store = _store(args)
        candidates = [
            SopProposal(*([part.strip() for part in c.split(":", 1)] + [""])[:2])
            for c in (args.candidate or ())
        ]
        if args.candidates:
            candidates.extend(_load_proposals(args.candidates))
        _print_ranked(client.gap_analysis(store.documents(), candidates, ctx), args.json)
        return EXIT_OK
    if args.assist_op == "draft":
        store = _store(args)
        doc = client.draft_irp(args.scenario, ctx)
        if args.id:
            doc = type(doc)(**{**doc.__dict__, "id": args.id})
        store.save(doc, expected_version=None)
        print(f"{doc.id} {doc.version}")
        print(store.root / f"{doc.id}.playbook")
        return EXIT_OK
    if args.assist_op == "postmortem":
        store = _store(args)
        log = store.incident_log(args.session)
        commentary, recommendations = client.postmortem_commentary(log, ctx)
        print("Commentary:")
        for i, item in enumerate(commentary, start=1):
            print(f"{i}. {item}")
        print()
        print("Recommendations:")
        for item in recommendations:
            print(f"- {item}")
        return EXIT_OK
    raise InvalidRequest(f"unknown assist operation {args.assist_op!r}")


def cmd_serve(args) -> int:
    store = _store(args)
    client = _assist_client(args) if (args.mock or os.environ.get("PLAYBOOK_LLM_ENDPOINT")) else None
    static = Path(args.static) if args.static else None
    running = serve(store, args.bind, assist_client=client, static_dir=static)

    def graceful(*_):
        # shutdown() blocks until serve_forever returns, so it must not
        # run on the serving thread the signal interrupted
        threading.Thread(target=running.shutdown, daemon=True).start()

    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, graceful)
    print(f"serving {store.root} on {running.base_url}", file=sys.stderr, flush=True)
    running.serve_forever()
    return EXIT_OK


# -- argument wiring ----------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="playbook",
        description="Versioned incident-response playbooks: lint, graph, execute, draft.",
    )
    parser.add_argument(
        "--root", help="repository directory (default: $PLAYBOOK_ROOT or .)", default=None
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_lint = sub.add_parser("lint", help="validate the repository and report findings")
    p_lint.add_argument("--stale-after", type=int, default=180, metavar="DAYS")
    p_lint.add_argument("--format", choices=("text", "structured"), default="text")
    p_lint.set_defaults(fn=cmd_lint)

    p_graph = sub.add_parser("graph", help="show transitive references or a mermaid chart")
    p_graph.add_argument("--doc", required=True)
    p_graph.add_argument("--mermaid", action="store_true")
    p_graph.set_defaults(fn=cmd_graph)

    p_version = sub.add_parser("version", help="bump or review-stamp a document version")
    p_version.add_argument("doc")
    version_action = p_version.add_subparsers(dest="action", required=True)
    p_bump = version_action.add_parser("bump")
    p_bump.add_argument("part", choices=("major", "minor", "patch"))
    p_review = version_action.add_parser("review")
    p_version.set_defaults(fn=cmd_version)
    p_bump.set_defaults(fn=cmd_version)
    p_review.set_defaults(fn=cmd_version)

    p_assist = sub.add_parser("assist", help="LLM-assisted drafting and review")
    assist_sub = p_assist.add_subparsers(dest="assist_op", required=True)
    for op in ("enumerate", "prioritize", "draft", "gaps", "postmortem"):
        p_op = assist_sub.add_parser(op)
        p_op.add_argument("--mock", action="store_true", help="replay checked-in fixtures")
        p_op.add_argument("--fixtures", help="fixture directory for --mock")
        p_op.add_argument("--tech", action="append", metavar="NAME")
        p_op.add_argument("--compliance", action="append", metavar="NAME")
        p_op.add_argument("--notes")
        p_op.add_argument("--json", action="store_true")
        if op == "prioritize":
            p_op.add_argument("-n", type=int, default=3)
            p_op.add_argument("--proposals", help="JSON file of proposals to rank")
        if op == "gaps":
            p_op.add_argument("--candidate", action="append", metavar="TITLE[:DESC]")
            p_op.add_argument("--candidates", help="JSON file of candidate proposals")
        if op == "draft":
            p_op.add_argument("scenario")
            p_op.add_argument("--id", help="override the generated draft id")
        if op == "postmortem":
            p_op.add_argument("--session", required=True)
        p_op.set_defaults(fn=cmd_assist)

    p_exec = sub.add_parser("exec", help="run an IRP headlessly (tabletop exercise)")
    p_exec.add_argument("irp")
    p_exec.add_argument("--script", action="append", metavar="ANSWERS",
                        help="comma-separated decision answers")
    p_exec.set_defaults(fn=cmd_exec)

    p_serve = sub.add_parser("serve", help="run the HTTP API (and optional web console)")
    p_serve.add_argument("--bind", default="127.0.0.1:8321")
    p_serve.add_argument("--mock", action="store_true")
    p_serve.add_argument("--fixtures")
    p_serve.add_argument("--static", help="directory of built web-console assets")
    p_serve.set_defaults(fn=cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except UnknownDoc as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except VersionConflict as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_RUNTIME
    except ProviderError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_RUNTIME
    except PlaybookError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
