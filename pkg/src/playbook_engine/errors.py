"""Exception hierarchy shared across the engine.

Every failure the library raises derives from PlaybookError so callers
(CLI, HTTP service) can map errors to exit codes / status codes by type.
"""

from __future__ import annotations


class PlaybookError(Exception):
    """Base class for all engine errors."""

    code = "PlaybookError"

    def __str__(self) -> str:
        return super().__str__() or self.code


# -- versioning ----------------------------------------------------------


class ReviewDateRegression(PlaybookError):
    """Review stamp would move the reviewed date backwards."""

    code = "ReviewDateRegression"


# -- reference graph -----------------------------------------------------


class DuplicateDocId(PlaybookError):
    code = "DuplicateDocId"


class UnknownDoc(PlaybookError):
    code = "UnknownDoc"


class CyclicGraph(PlaybookError):
    code = "CyclicGraph"


# -- flowcharts / execution ----------------------------------------------


class InvalidFlowchart(PlaybookError):
    """Chart is too malformed to analyze (unknown edge endpoints, no start)."""

    code = "InvalidFlowchart"


class IncompleteChart(PlaybookError):
    """Chart failed structural analysis; `findings` carries the reasons."""

    code = "IncompleteChart"

    def __init__(self, message: str, findings=()):
        super().__init__(message)
        self.findings = tuple(findings)


class ParallelChartNotCompilable(PlaybookError):
    code = "ParallelChartNotCompilable"


class CyclicFsm(PlaybookError):
    code = "CyclicFsm"


class PathExplosion(PlaybookError):
    code = "PathExplosion"


class NodeNotActive(PlaybookError):
    code = "NodeNotActive"


class MissingDecision(PlaybookError):
    code = "MissingDecision"


class UnknownBranch(PlaybookError):
    code = "UnknownBranch"


# -- repository / sessions -----------------------------------------------


class RootNotFound(PlaybookError):
    code = "RootNotFound"


class BindFailure(PlaybookError):
    code = "BindFailure"


class VersionConflict(PlaybookError):
    code = "VersionConflict"


class RejectedByLint(PlaybookError):
    """Save would introduce new Error findings; they are attached."""

    code = "RejectedByLint"

    def __init__(self, message: str, findings=()):
        super().__init__(message)
        self.findings = tuple(findings)


class NotAnIrp(PlaybookError):
    code = "NotAnIrp"


class UnknownSession(PlaybookError):
    code = "UnknownSession"


class SessionNotActive(PlaybookError):
    code = "SessionNotActive"


# -- LLM assist -----------------------------------------------------------


class InvalidRequest(PlaybookError):
    code = "InvalidRequest"


class ProviderError(PlaybookError):
    code = "ProviderError"


class ProviderTimeout(ProviderError):
    code = "ProviderTimeout"


class UnparseableResponse(ProviderError):
    """Model output failed structural validation; raw text is preserved."""

    code = "UnparseableResponse"

    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text


class NotEnoughProposals(ProviderError):
    code = "NotEnoughProposals"


class FixtureMissing(ProviderError):
    """Mock provider found no fixture for the rendered prompt."""

    code = "FixtureMissing"
