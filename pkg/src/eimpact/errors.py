"""Exception types shared across the package."""

from __future__ import annotations


class EImpactError(Exception):
    """Base class for all errors raised by this package."""


# ── corpus ────────────────────────────────────────────────────────────


class MissingColumn(EImpactError):
    def __init__(self, name: str):
        super().__init__(f"required CSV column missing: {name!r}")
        self.name = name


class MalformedRow(EImpactError):
    """Row with wrong arity, bad timestamp, or otherwise unparseable fields."""

    def __init__(self, line: int, detail: str = ""):
        msg = f"malformed row at line {line}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.line = line
        self.detail = detail


class DuplicateId(EImpactError):
    def __init__(self, record_id: str):
        super().__init__(f"duplicate record id: {record_id!r}")
        self.record_id = record_id


class NoRoot(EImpactError):
    def __init__(self, conversation_id: str = ""):
        super().__init__(f"no root record found for conversation {conversation_id!r}")
        self.conversation_id = conversation_id


class MultipleRoots(EImpactError):
    def __init__(self, ids):
        ids = sorted(ids)
        super().__init__(f"multiple root candidates: {ids}")
        self.ids = ids


# ── affect ────────────────────────────────────────────────────────────


class UnknownLabel(EImpactError):
    def __init__(self, value: str):
        super().__init__(f"unknown emotion label: {value!r}")
        self.value = value


# ── graph ─────────────────────────────────────────────────────────────


class CycleDetected(EImpactError):
    def __init__(self, ids):
        ids = sorted(ids)
        super().__init__(f"parent relation contains a cycle through: {ids}")
        self.ids = ids


class NodeNotFound(EImpactError):
    def __init__(self, node_id: str):
        super().__init__(f"node not in graph: {node_id!r}")
        self.node_id = node_id


# ── impact ────────────────────────────────────────────────────────────


class EmptyGraph(EImpactError):
    def __init__(self, detail: str = "no nodes in scope"):
        super().__init__(detail)


# ── toxicity ──────────────────────────────────────────────────────────


class MissingApiKey(EImpactError):
    def __init__(self, env_var: str):
        super().__init__(f"API key environment variable not set: {env_var}")
        self.env_var = env_var


class RateLimited(EImpactError):
    def __init__(self, attempts: int):
        super().__init__(f"rate limited; retries exhausted after {attempts} attempts")
        self.attempts = attempts


class ProtocolError(EImpactError):
    """Malformed or unexpected response from the remote scoring service."""


class Timeout(EImpactError):
    """Remote scoring request timed out."""


# ── simulate ──────────────────────────────────────────────────────────


class MissingScore(EImpactError):
    def __init__(self, record_id: str):
        super().__init__(f"record has no emotion score entry: {record_id!r}")
        self.record_id = record_id


class MissingToxicity(EImpactError):
    def __init__(self, record_id: str):
        super().__init__(f"record has no toxicity entry: {record_id!r}")
        self.record_id = record_id


# ── pipeline / CLI ────────────────────────────────────────────────────


class UsageError(EImpactError):
    """Bad configuration or command-line usage (exit code 2)."""


class PipelineStageError(EImpactError):
    """Wraps a failure so the CLI can name the stage that failed."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage}: {cause}")
        self.stage = stage
        self.cause = cause
