"""Command-line behavior: output, exit codes, and library equivalence."""

from __future__ import annotations

import json
from datetime import date

import pytest

from playbook_engine import RepositoryStore, Version, export_log
from playbook_engine.analysis import parse_structured
from playbook_engine.cli import main, run_exec
from playbook_engine.clocks import CLOCK_ENV
import figfixtures as fig


@pytest.fixture(autouse=True)
def fixed_cli_clock(monkeypatch):
    monkeypatch.setenv(CLOCK_ENV, "2024-02-01T09:00:00+00:00/300")


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestLint:
    def test_clean_repo_exits_zero(self, repo_repaired, capsys):
        code, out, _ = run(capsys, "--root", str(repo_repaired), "lint")
        assert code == 0
        assert "ERROR" not in out

    def test_dead_end_exits_one_and_prints_finding(self, repo_as_drawn, capsys):
        code, out, _ = run(capsys, "--root", str(repo_as_drawn), "lint")
        assert code == 1
        assert "DeadEnd" in out and "SOP_2" in out

    def test_unknown_flag_exits_two(self, repo_repaired, capsys):
        code, _, _ = run(capsys, "--root", str(repo_repaired), "lint", "--frobnicate")
        assert code == 2

    def test_structured_round_trips(self, repo_as_drawn, capsys):
        code, out, _ = run(
            capsys, "--root", str(repo_as_drawn), "lint", "--format", "structured"
        )
        assert code == 1
        report = parse_structured(out)
        assert any(f.code == "DeadEnd" for f in report.findings)

    def test_stale_after_flag(self, repo_repaired, capsys):
        code, out, _ = run(
            capsys, "--root", str(repo_repaired), "lint", "--stale-after", "5"
        )
        assert code == 0  # staleness is a warning, not an error
        assert "Stale" in out

    def test_respects_playbook_root_env(self, repo_repaired, capsys, monkeypatch):
        monkeypatch.setenv("PLAYBOOK_ROOT", str(repo_repaired))
        code, _, _ = run(capsys, "lint")
        assert code == 0


class TestGraph:
    def test_transitive_listing(self, repo_repaired, capsys):
        code, out, _ = run(capsys, "--root", str(repo_repaired), "graph", "--doc", "irp_sd")
        assert code == 0
        assert out.split() == ["irp_ca", "irp_lr", "sop_1", "sop_2", "sop_3", "sop_4", "sop_5"]

    def test_leaf_listing_is_empty(self, repo_repaired, capsys):
        code, out, _ = run(capsys, "--root", str(repo_repaired), "graph", "--doc", "sop_1")
        assert code == 0 and out == ""

    def test_mermaid_rendering(self, repo_repaired, capsys):
        code, out, _ = run(
            capsys, "--root", str(repo_repaired), "graph", "--doc", "irp_sd", "--mermaid"
        )
        assert code == 0
        assert "D1{Decision Point?}" in out

    def test_unknown_doc_exits_two(self, repo_repaired, capsys):
        code, _, err = run(capsys, "--root", str(repo_repaired), "graph", "--doc", "nope")
        assert code == 2
        assert "nope" in err


class TestVersionCommand:
    def test_bump_major(self, repo_repaired, capsys):
        store = RepositoryStore(repo_repaired)
        base = store.get("sop_4")
        updated = type(base)(**{**base.__dict__, "version": Version.parse("1.2.14.20240107")})
        store.save(updated, expected_version=base.version)

        code, out, _ = run(capsys, "--root", str(repo_repaired), "version", "sop_4", "bump", "major")
        assert code == 0
        assert out.strip() == "2.0.0.20240201"
        assert str(RepositoryStore(repo_repaired).get("sop_4").version) == "2.0.0.20240201"

    def test_bump_patch(self, repo_repaired, capsys):
        code, out, _ = run(capsys, "--root", str(repo_repaired), "version", "sop_4", "bump", "patch")
        assert code == 0
        assert out.strip() == "1.0.1.20240201"

    def test_review_stamp(self, repo_repaired, capsys):
        code, out, _ = run(capsys, "--root", str(repo_repaired), "version", "sop_4", "review")
        assert code == 0
        assert out.strip() == "1.0.0.20240201"

    def test_review_same_day_idempotent(self, repo_repaired, capsys):
        run(capsys, "--root", str(repo_repaired), "version", "sop_4", "review")
        code, out, _ = run(capsys, "--root", str(repo_repaired), "version", "sop_4", "review")
        assert code == 0
        assert out.strip() == "1.0.0.20240201"

    def test_missing_doc_exits_two(self, repo_repaired, capsys):
        code, _, _ = run(capsys, "--root", str(repo_repaired), "version", "ghost", "bump", "major")
        assert code == 2

    def test_review_regression_exits_three(self, repo_repaired, capsys, monkeypatch):
        monkeypatch.setenv(CLOCK_ENV, "2020-01-01T09:00:00+00:00/300")
        code, _, err = run(capsys, "--root", str(repo_repaired), "version", "sop_4", "review")
        assert code == 3
        assert "review" in err.lower()


class TestAssistCommands:
    def test_enumerate_prints_fifteen_titles(self, capsys):
        code, out, _ = run(capsys, "assist", "enumerate", "--mock", "--tech", "Microsoft Active Directory")
        assert code == 0
        lines = [l for l in out.splitlines() if l and l[0].isdigit()]
        assert len(lines) == 15
        assert lines[0].startswith("1. User Account Management")

    def test_prioritize_prints_top_three(self, capsys):
        code, out, _ = run(
            capsys, "assist", "prioritize", "--mock", "-n", "3",
            "--tech", "Microsoft Active Directory",
        )
        assert code == 0
        lines = out.splitlines()
        assert lines[0].startswith("1. Handling Stolen or Compromised Credentials")
        assert lines[1].startswith("2. Monitoring and Responding to AD Alerts")
        assert lines[2].startswith("3. Disaster Recovery Planning")

    def test_draft_writes_reviewable_file(self, repo_repaired, capsys):
        code, out, _ = run(
            capsys, "--root", str(repo_repaired), "assist", "draft", "--mock",
            "a stolen device (laptop, phone, etc.)",
            "--tech", "Bitlocker", "--tech", "Active Directory",
            "--tech", "Windows Laptops", "--tech", "iPhone or Android mobile devices",
        )
        assert code == 0
        assert "0.1.0.20240201" in out
        draft = RepositoryStore(repo_repaired).get("a-stolen-device-laptop-phone-etc-draft")
        assert "Use Active Directory to disable the user account" in draft.body

    def test_draft_never_overwrites(self, repo_repaired, capsys):
        args = (
            "--root", str(repo_repaired), "assist", "draft", "--mock",
            "a stolen device (laptop, phone, etc.)",
            "--tech", "Bitlocker", "--tech", "Active Directory",
            "--tech", "Windows Laptops", "--tech", "iPhone or Android mobile devices",
        )
        assert run(capsys, *args)[0] == 0
        code, _, err = run(capsys, *args)
        assert code == 3
        assert "already exists" in err

    def test_gaps_ranks_candidates(self, repo_repaired, capsys):
        code, out, _ = run(
            capsys, "--root", str(repo_repaired), "assist", "gaps", "--mock",
            "--tech", "Active Directory",
            "--candidate", "Reset MFA: Recover a user's second factor",
            "--candidate", "Reset Password v2: Updated password reset walkthrough",
        )
        assert code == 0
        assert out.splitlines()[0].startswith("1. Reset MFA")

    def test_postmortem_on_recorded_session(self, repo_repaired, capsys):
        store, session = fig.replay_paper_session(repo_repaired)
        code, out, _ = run(
            capsys, "--root", str(repo_repaired), "assist", "postmortem", "--mock",
            "--session", session.session_id,
        )
        assert code == 0
        assert "Challenges with Outdated SOPs" in out
        assert "Automated Alerts for SOP Updates" in out

    def test_no_provider_exits_three(self, capsys, monkeypatch):
        monkeypatch.delenv("PLAYBOOK_LLM_ENDPOINT", raising=False)
        code, _, err = run(capsys, "assist", "enumerate", "--tech", "AD")
        assert code == 3
        assert "provider" in err.lower()


class TestExec:
    def test_yes_script(self, repo_repaired, capsys):
        code, out, _ = run(capsys, "--root", str(repo_repaired), "exec", "irp_sd", "--script", "yes")
        assert code == 0
        assert "SOP_4" in out and "SOP_5" not in out

    def test_no_script(self, repo_repaired, capsys):
        code, out, _ = run(capsys, "--root", str(repo_repaired), "exec", "irp_sd", "--script", "no")
        assert code == 0
        assert "SOP_5" in out and "SOP_4" not in out

    def test_dead_ended_chart_exits_one(self, repo_as_drawn, capsys):
        code, _, err = run(capsys, "--root", str(repo_as_drawn), "exec", "irp_sd", "--script", "yes")
        assert code == 1
        assert "DeadEnd" in err and "SOP_2" in err

    def test_script_exhaustion_exits_three(self, repo_repaired, capsys):
        code, _, err = run(capsys, "--root", str(repo_repaired), "exec", "irp_sd", "--script", "")
        assert code == 3
        assert "script" in err.lower()

    def test_cli_matches_library_run(self, tmp_path, capsys):
        docs = fig.stolen_device_docs("repaired")
        root_cli = fig.write_repo(tmp_path / "cli", docs)
        root_lib = fig.write_repo(tmp_path / "lib", docs)
        code, out, _ = run(capsys, "--root", str(root_cli), "exec", "irp_sd", "--script", "yes")
        assert code == 0
        from playbook_engine.clocks import clock_from_env

        _, session = run_exec(root_lib, "irp_sd", ["yes"], clock=clock_from_env(), actor="operator")
        assert out == export_log(session)


class TestExitCodeMatrix:
    def test_usage_errors(self, repo_repaired, capsys):
        cases = [
            ("--root", str(repo_repaired), "lint", "--format", "yaml"),
            ("--root", str(repo_repaired), "graph"),
            ("--root", str(repo_repaired), "nonsense"),
            ("--root", str(repo_repaired), "version", "sop_4", "bump", "epoch"),
        ]
        for argv in cases:
            assert run(capsys, *argv)[0] == 2

    def test_runtime_errors(self, repo_repaired, capsys):
        code, _, _ = run(capsys, "--root", str(repo_repaired / "missing"), "lint")
        assert code == 3
