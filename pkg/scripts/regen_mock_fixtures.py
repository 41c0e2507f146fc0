#!/usr/bin/env python3
"""Regenerate the prompt-hash keyed mock fixtures from the default replies.

The mock provider resolves fixtures by sha256(template id + rendered
prompt); this script replays the canonical calls (the stolen-device
walkthrough the docs and tests use), captures each rendered prompt from
the client's audit trail, and copies the default reply into the keyed
fixture file. Run it after editing a prompt template or fixture text:

    python scripts/regen_mock_fixtures.py
"""

from __future__ import annotations

import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

import figfixtures as fig
from playbook_engine import AssistClient, AssistContext, ProviderConfig
from playbook_engine.assist import fixture_path, packaged_fixture_dir


def main() -> None:
    fixture_dir = packaged_fixture_dir()
    client = AssistClient(ProviderConfig.mock(fixture_dir))

    ad_ctx = AssistContext(tech_stack=("Microsoft Active Directory",))
    proposals = client.enumerate_sops(ad_ctx)
    client.prioritize(proposals, 3, ad_ctx)

    client.draft_irp(
        "a stolen device (laptop, phone, etc.)",
        AssistContext(
            tech_stack=(
                "Bitlocker",
                "Active Directory",
                "Windows Laptops",
                "iPhone or Android mobile devices",
            )
        ),
    )

    existing = [d for d in fig.stolen_device_docs("none") if d.id == "sop_3"]
    from playbook_engine import SopProposal

    client.gap_analysis(
        existing,
        [
            SopProposal("Reset MFA", "Recover a user's second factor"),
            SopProposal("Reset Password v2", "Updated password reset walkthrough"),
        ],
        AssistContext(tech_stack=("Active Directory",)),
    )

    with tempfile.TemporaryDirectory() as tmp:
        repo = fig.write_repo(Path(tmp) / "repo", fig.stolen_device_docs("repaired"))
        store, session = fig.replay_paper_session(repo)
        client.postmortem_commentary(store.incident_log(session.session_id), AssistContext())

    for record in client.audit_trail():
        default = fixture_dir / f"{record.template_id}.default.txt"
        keyed = fixture_path(fixture_dir, record.template_id, record.prompt)
        keyed.write_text(default.read_text(encoding="utf-8"), encoding="utf-8")
        print(f"{record.operation:12s} -> {keyed.name}")


if __name__ == "__main__":
    main()
