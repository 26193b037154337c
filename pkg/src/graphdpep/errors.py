"""Exception hierarchy shared across the package.

Every error raised by library code derives from GraphDpepError so the CLI can
catch the whole family and exit with a single machine-parseable line.
"""

from __future__ import annotations


class GraphDpepError(Exception):
    """Base class for all package errors."""


class MalformedRecord(GraphDpepError):
    def __init__(self, index: int, reason: str):
        self.index = index
        self.reason = reason
        super().__init__(f"record {index}: {reason}")


class DanglingEntityIndex(GraphDpepError):
    def __init__(self, index: int, reason: str):
        self.index = index
        self.reason = reason
        super().__init__(f"record {index}: {reason}")


class DuplicateRid(GraphDpepError):
    pass


class MissingDescription(GraphDpepError):
    pass


class BadAliasPhrase(GraphDpepError):
    pass


class NAUnverbalizable(GraphDpepError):
    pass


class AliasOutOfRange(GraphDpepError):
    pass


class BudgetExceeded(GraphDpepError):
    pass


class BackendUnavailable(GraphDpepError):
    pass


class ReplayMiss(GraphDpepError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"replay fixture has no response for key {key}")


class TooFewPoints(GraphDpepError):
    pass


class UnresolvedTriplet(GraphDpepError):
    pass


class JudgeUnparseable(GraphDpepError):
    pass
