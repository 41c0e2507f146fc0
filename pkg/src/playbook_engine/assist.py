"""Provider-agnostic LLM client for drafting, prioritizing, and reviewing playbooks.

Prompts are versioned text assets under `prompts/`; the deterministic
mock provider replays fixture files keyed by a hash of (template id,
rendered prompt), falling back to a per-template default so the mock
also serves ad-hoc CLI use. Model free text is parsed with a tolerant
numbered/bulleted-list grammar and validated structurally; anything
that fails validation raises UnparseableResponse with the raw text
attached rather than returning a malformed result.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import socket
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass
from datetime import date
from importlib import resources
from pathlib import Path
from typing import Callable, Optional, Sequence

from .errors import (
    FixtureMissing,
    InvalidRequest,
    NotEnoughProposals,
    ProviderTimeout,
    UnparseableResponse,
)
from .model import DocKind, IncidentLog, PlaybookDoc, Version, event_blocks


@dataclass(frozen=True)
class AssistContext:
    """Organizational context that narrows prompts to the actual environment."""

    tech_stack: tuple[str, ...] = ()
    compliance: tuple[str, ...] = ()
    org_notes: Optional[str] = None

    @property
    def is_empty(self) -> bool:
        return not (self.tech_stack or self.compliance or self.org_notes)


@dataclass(frozen=True)
class SopProposal:
    title: str
    description: str = ""


@dataclass(frozen=True)
class RankedProposal:
    proposal: SopProposal
    rank: int
    rationale: str


@dataclass(frozen=True)
class ProviderConfig:
    endpoint: str = ""
    model_name: str = ""
    api_key_env: str = "PLAYBOOK_LLM_API_KEY"
    timeout: float = 30.0
    mock_mode: bool = False
    mock_fixture_dir: Optional[Path] = None

    @classmethod
    def mock(cls, fixture_dir: Optional[Path] = None) -> "ProviderConfig":
        return cls(mock_mode=True, mock_fixture_dir=fixture_dir or packaged_fixture_dir())


@dataclass(frozen=True)
class AuditRecord:
    operation: str
    template_id: str
    prompt: str
    response: str


def packaged_fixture_dir() -> Path:
    return Path(str(resources.files("playbook_engine") / "assist_fixtures"))


def fixture_key(template_id: str, prompt: str) -> str:
    return hashlib.sha256(f"{template_id}\n{prompt}".encode("utf-8")).hexdigest()[:12]


def fixture_path(fixture_dir: Path, template_id: str, prompt: str) -> Path:
    """Where the mock provider looks for the reply to `prompt`."""
    return Path(fixture_dir) / f"{template_id}.{fixture_key(template_id, prompt)}.txt"


def _load_template(template_id: str) -> str:
    text = (resources.files("playbook_engine") / "prompts" / f"{template_id}.txt").read_text(
        encoding="utf-8"
    )
    return text.rstrip("\n")


def oxford_join(items: Sequence[str]) -> str:
    if not items:
        return ""
    if len(items) == 1:
        return items[0]
    if len(items) == 2:
        return f"{items[0]} and {items[1]}"
    return ", ".join(items[:-1]) + f", and {items[-1]}"


def _context_suffix(ctx: AssistContext) -> str:
    lines = []
    if ctx.compliance:
        lines.append(f"Applicable compliance requirements: {oxford_join(ctx.compliance)}.")
    if ctx.org_notes:
        lines.append(f"Organization notes: {ctx.org_notes}")
    return "".join("\n" + line for line in lines)


class MockProvider:
    """Replays checked-in fixture files; never touches the network."""

    def __init__(self, fixture_dir: Path):
        self.fixture_dir = Path(fixture_dir)

    def complete(self, template_id: str, prompt: str) -> str:
        exact = fixture_path(self.fixture_dir, template_id, prompt)
        if exact.is_file():
            return exact.read_text(encoding="utf-8")
        default = self.fixture_dir / f"{template_id}.default.txt"
        if default.is_file():
            return default.read_text(encoding="utf-8")
        raise FixtureMissing(
            f"no fixture {exact.name} (and no {default.name}) under {self.fixture_dir}"
        )


class HttpProvider:
    """Minimal chat-completion client over HTTPS."""

    def __init__(self, config: ProviderConfig):
        self.config = config

    def complete(self, template_id: str, prompt: str) -> str:
        api_key = os.environ.get(self.config.api_key_env, "")
        payload = json.dumps(
            {
                "model": self.config.model_name,
                "messages": [{"role": "user", "content": prompt}],
            }
        ).encode("utf-8")
        request = urllib.request.Request(
            self.config.endpoint,
            data=payload,
            headers={
                "Content-Type": "application/json",
                "Authorization": f"Bearer {api_key}",
            },
        )
        try:
            with urllib.request.urlopen(request, timeout=self.config.timeout) as response:
                raw = response.read().decode("utf-8")
        except (urllib.error.URLError, socket.timeout, ConnectionError, OSError) as exc:
            raise ProviderTimeout(f"provider unreachable: {exc}") from exc
        try:
            parsed = json.loads(raw)
            return parsed["choices"][0]["message"]["content"]
        except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
            raise UnparseableResponse(f"malformed provider payload: {exc}", raw_text=raw) from exc


# -- free-text parsing -----------------------------------------------

_NUMBERED_RE = re.compile(r"^\s*(\d+)[.)]\s+(.*\S)\s*$")
_BULLET_RE = re.compile(r"^\s*[-*•]\s+(.*\S)\s*$")
_HEADING_SECTION_RE = re.compile(r"^#{0,6}\s*(\d+)\.\s+\S")


@dataclass
class _Item:
    number: Optional[int]
    title: str
    description: str

    def rendered(self) -> str:
        return f"{self.title}: {self.description}" if self.description else self.title


def _split_title(text: str) -> tuple[str, str]:
    m = re.match(r"^\*\*(.+?)\*\*:?\s*(.*)$", text)
    if m:
        return m.group(1).strip().rstrip(":"), m.group(2).strip()
    title, sep, rest = text.partition(":")
    if sep:
        return title.strip(), rest.strip()
    return text.strip(), ""


def _parse_items(text: str, numbered: bool = True) -> list[_Item]:
    """Tolerant list grammar: items may wrap onto following lines; a blank
    line closes the open item so surrounding prose is never absorbed."""
    pattern = _NUMBERED_RE if numbered else _BULLET_RE
    items: list[_Item] = []
    open_item: Optional[_Item] = None
    for line in text.splitlines():
        if not line.strip():
            open_item = None
            continue
        m = pattern.match(line)
        if m:
            number = int(m.group(1)) if numbered else None
            body = m.group(2) if numbered else m.group(1)
            title, description = _split_title(body)
            open_item = _Item(number, title, description)
            items.append(open_item)
        elif open_item is not None and not _NUMBERED_RE.match(line) and not _BULLET_RE.match(line):
            extra = line.strip()
            open_item.description = (
                f"{open_item.description} {extra}".strip() if open_item.description else extra
            )
        else:
            open_item = None
    return items


# -- client ----------------------------------------------------------


class AssistClient:
    """All LLM-backed operations; pure function of (inputs, fixtures) in mock mode."""

    def __init__(
        self,
        config: Optional[ProviderConfig] = None,
        today: Callable[[], date] = date.today,
    ):
        self.config = config or ProviderConfig.mock()
        if self.config.mock_mode:
            if self.config.mock_fixture_dir is None:
                raise InvalidRequest("mock mode requires a fixture directory")
            self._provider = MockProvider(self.config.mock_fixture_dir)
        else:
            self._provider = HttpProvider(self.config)
        self._today = today
        self._audit: list[AuditRecord] = []
        self._audit_lock = threading.Lock()

    def audit_trail(self) -> tuple[AuditRecord, ...]:
        with self._audit_lock:
            return tuple(self._audit)

    def _complete(self, operation: str, template_id: str, prompt: str) -> str:
        response = self._provider.complete(template_id, prompt)
        with self._audit_lock:
            self._audit.append(AuditRecord(operation, template_id, prompt, response))
        return response

    @staticmethod
    def _tech_phrase(ctx: AssistContext) -> str:
        return oxford_join(ctx.tech_stack) if ctx.tech_stack else "current"

    def enumerate_sops(self, ctx: AssistContext) -> list[SopProposal]:
        """Ask for the SOP catalog an environment like `ctx` ought to have."""
        if ctx.is_empty:
            raise InvalidRequest("assist context must name a tech stack, compliance, or notes")
        prompt = _load_template("enumerate_sops").format(
            tech=self._tech_phrase(ctx), extra=_context_suffix(ctx)
        )
        response = self._complete("enumerate_sops", "enumerate_sops", prompt)
        proposals: list[SopProposal] = []
        seen: set[str] = set()
        for item in _parse_items(response, numbered=True):
            if item.title and item.title not in seen:
                seen.add(item.title)
                proposals.append(SopProposal(item.title, item.description))
        return proposals

    def _ranked(
        self,
        operation: str,
        prompt: str,
        allowed_titles: dict[str, SopProposal],
        expect_exactly: Optional[int] = None,
    ) -> list[RankedProposal]:
        response = self._complete(operation, operation, prompt)
        items = _parse_items(response, numbered=True)
        if not items:
            raise UnparseableResponse(
                f"{operation} reply contains no ranked items", raw_text=response
            )
        titles = [i.title for i in items]
        if len(set(titles)) != len(titles):
            raise UnparseableResponse(
                f"{operation} reply ranks a title twice", raw_text=response
            )
        for title in titles:
            if title not in allowed_titles:
                raise UnparseableResponse(
                    f"{operation} reply names {title!r}, which is not among the inputs",
                    raw_text=response,
                )
        if expect_exactly is not None and len(items) < expect_exactly:
            raise UnparseableResponse(
                f"{operation} reply has {len(items)} items, expected {expect_exactly}",
                raw_text=response,
            )
        # Provider numbering fixes the order; equal numbers tie-break by
        # title, and ranks are reassigned contiguously from 1.
        items.sort(key=lambda i: (i.number, i.title))
        if expect_exactly is not None:
            items = items[:expect_exactly]
        return [
            RankedProposal(allowed_titles[item.title], rank, item.description)
            for rank, item in enumerate(items, start=1)
        ]

    def prioritize(
        self, proposals: Sequence[SopProposal], n: int, ctx: AssistContext
    ) -> list[RankedProposal]:
        """Pick the `n` highest-value proposals, each with a rationale."""
        if n < 1:
            raise InvalidRequest("n must be positive")
        if n > len(proposals):
            raise NotEnoughProposals(f"asked for top {n} of {len(proposals)} proposals")
        listing = "\n".join(
            f"{i}. {p.title}" + (f": {p.description}" if p.description else "")
            for i, p in enumerate(proposals, start=1)
        )
        prompt = _load_template("prioritize").format(
            n=n, proposals=listing, extra=_context_suffix(ctx)
        )
        return self._ranked(
            "prioritize",
            prompt,
            {p.title: p for p in proposals},
            expect_exactly=n,
        )

    def gap_analysis(
        self,
        existing: Sequence[PlaybookDoc],
        candidates: Sequence[SopProposal],
        ctx: AssistContext,
    ) -> list[RankedProposal]:
        """Rank candidate SOPs by how much new coverage each one adds."""
        if not candidates:
            raise NotEnoughProposals("gap analysis needs at least one candidate")
        existing_listing = (
            "\n".join(f"- {doc.title}" for doc in existing) if existing else "- (none yet)"
        )
        candidate_listing = "\n".join(
            f"{i}. {p.title}" + (f": {p.description}" if p.description else "")
            for i, p in enumerate(candidates, start=1)
        )
        prompt = _load_template("gap_analysis").format(
            existing=existing_listing,
            candidates=candidate_listing,
            extra=_context_suffix(ctx),
        )
        return self._ranked("gap_analysis", prompt, {p.title: p for p in candidates})

    def draft_irp(self, scenario: str, ctx: AssistContext) -> PlaybookDoc:
        """Draft a full IRP document for `scenario` at version 0.1.0.

        The draft enters review with empty references; humans wire it into
        the repository.
        """
        if not scenario.strip():
            raise InvalidRequest("scenario must be non-empty")
        prompt = _load_template("draft_irp").format(
            scenario=scenario.strip(),
            tech=self._tech_phrase(ctx),
            extra=_context_suffix(ctx),
        )
        response = self._complete("draft_irp", "draft_irp", prompt)
        sections = {
            int(m.group(1))
            for line in response.splitlines()
            if (m := _HEADING_SECTION_RE.match(line.strip()))
        }
        if not {1, 2, 3, 4, 5, 6} <= sections:
            raise UnparseableResponse(
                f"draft is missing outline sections {sorted(set(range(1, 7)) - sections)}",
                raw_text=response,
            )
        slug = re.sub(r"[^a-z0-9]+", "-", scenario.lower()).strip("-")[:48].strip("-")
        return PlaybookDoc(
            id=f"{slug}-draft",
            kind=DocKind.IRP,
            title=f"Incident Response Plan: {scenario.strip()}",
            version=Version(0, 1, 0, self._today()),
            owner="unreviewed-draft",
            references=(),
            body=response if response.endswith("\n") else response + "\n",
            tech_context=ctx.tech_stack,
        )

    def postmortem_commentary(
        self, log: IncidentLog, ctx: AssistContext
    ) -> tuple[list[str], list[str]]:
        """Commentary items and improvement recommendations for a finished incident."""
        if not log.events:
            raise InvalidRequest("post-mortem needs a non-empty incident log")
        prompt = _load_template("postmortem").format(
            log="\n\n".join(event_blocks(log.events)), extra=_context_suffix(ctx)
        )
        response = self._complete("postmortem", "postmortem", prompt)
        commentary = [i.rendered() for i in _parse_items(response, numbered=True)]
        recommendations = [i.rendered() for i in _parse_items(response, numbered=False)]
        if not commentary and not recommendations:
            raise UnparseableResponse(
                "post-mortem reply contains neither commentary nor recommendations",
                raw_text=response,
            )
        return commentary, recommendations
