"""Toxicity scoring and the combined influential/toxic framework.

Three providers share one contract (a probability per node): an offline
linear-saturating lexicon heuristic, a remote HTTP scoring service, and
precomputed values from CSV. Nodes above the threshold (default 0.9,
strict) are toxic; intersecting them with the influential set yields the
combined result.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Mapping

import requests

from .errors import (
    MalformedRow,
    MissingApiKey,
    MissingColumn,
    ProtocolError,
    RateLimited,
    Timeout,
)
from .graph import ConversationGraph
from .impact import InfluentialSet

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.9
DEFAULT_ENDPOINT = "https://commentanalyzer.googleapis.com/v1alpha1/comments:analyze"
DEFAULT_API_KEY_ENV = "TOXICITY_API_KEY"


@dataclass(frozen=True)
class ToxicityScore:
    node: str
    value: float
    source: str  # offline | remote | precomputed

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"toxicity value out of range: {self.value}")


@dataclass(frozen=True)
class ToxicityConfig:
    threshold: float = DEFAULT_THRESHOLD
    provider: str = "offline"
    endpoint: str = DEFAULT_ENDPOINT
    api_key_env: str = DEFAULT_API_KEY_ENV
    max_retries: int = 3
    request_interval: float = 1.0
    request_timeout: float = 10.0
    saturation: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must be in (0, 1): {self.threshold}")


@dataclass(frozen=True)
class Overlap:
    containment: float
    jaccard: float


@dataclass(frozen=True)
class CombinedResult:
    """Intersection of the influential set with the toxic set."""

    eimpact_set: frozenset[str]
    toxic_set: frozenset[str]
    combined: frozenset[str]
    overlap: Overlap


# ── offline scoring ───────────────────────────────────────────────────


def offline_toxicity_score(
    tokens: Iterable[str],
    toxicity_lexicon: Mapping[str, float],
    saturation: float = 2.0,
    node: str = "",
) -> ToxicityScore:
    """Linear-saturating lexicon heuristic: min(1, sum weights / s).

    A deliberately simple stand-in for the remote scorer so the full
    pipeline runs air-gapped; every matched token occurrence counts.
    """
    total = math.fsum(toxicity_lexicon.get(t, 0.0) for t in tokens)
    return ToxicityScore(node, min(1.0, total / saturation), "offline")


def load_toxicity_lexicon(source: IO[str] | str | Path) -> dict[str, float]:
    """Load a toxicity lexicon CSV with columns ``token,weight``."""
    if isinstance(source, (str, Path)):
        source = open(source, "r", encoding="utf-8", newline="")
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise MissingColumn("token") from None
    index = {name.strip(): i for i, name in enumerate(header)}
    for name in ("token", "weight"):
        if name not in index:
            raise MissingColumn(name)
    lexicon: dict[str, float] = {}
    for row in reader:
        if not row:
            continue
        if len(row) <= max(index.values()):
            raise MalformedRow(reader.line_num, "too few fields")
        token = row[index["token"]].strip().lower()
        try:
            weight = float(row[index["weight"]])
        except ValueError:
            raise MalformedRow(reader.line_num, f"bad weight {row[index['weight']]!r}") from None
        if not 0.0 <= weight <= 1.0:
            raise MalformedRow(reader.line_num, f"weight out of range: {weight}")
        lexicon[token] = weight
    return lexicon


def load_precomputed_toxicity(source: IO[str] | str | Path) -> dict[str, ToxicityScore]:
    """Load precomputed toxicity values from a CSV ``id,value``.

    Out-of-range values are clamped to [0, 1] with a logged warning.
    """
    if isinstance(source, (str, Path)):
        source = open(source, "r", encoding="utf-8", newline="")
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise MissingColumn("id") from None
    index = {name.strip(): i for i, name in enumerate(header)}
    for name in ("id", "value"):
        if name not in index:
            raise MissingColumn(name)
    out: dict[str, ToxicityScore] = {}
    for row in reader:
        if not row:
            continue
        if len(row) <= max(index.values()):
            raise MalformedRow(reader.line_num, "too few fields")
        node = row[index["id"]].strip()
        try:
            value = float(row[index["value"]])
        except ValueError:
            raise MalformedRow(reader.line_num, f"bad value {row[index['value']]!r}") from None
        if not math.isfinite(value):
            raise MalformedRow(reader.line_num, f"bad value {value!r}")
        if value < 0.0 or value > 1.0:
            clamped = min(1.0, max(0.0, value))
            logger.warning(
                "toxicity %s for node %s outside [0,1]; clamped to %s", value, node, clamped
            )
            value = clamped
        out[node] = ToxicityScore(node, value, "precomputed")
    return out


# ── remote scoring ────────────────────────────────────────────────────


class RemoteToxicityScorer:
    """HTTP client for a per-comment toxicity scoring service.

    Requests pass through a single pacing gate: no two leave closer
    than ``request_interval`` seconds. Transient failures (429 and 5xx)
    are retried with exponential backoff up to ``max_retries`` times.
    """

    def __init__(self, config: ToxicityConfig, session: requests.Session | None = None):
        key = os.environ.get(config.api_key_env, "")
        if not key:
            raise MissingApiKey(config.api_key_env)
        self.config = config
        self.api_key = key
        self.session = session or requests.Session()
        self._gate = threading.Lock()
        self._next_allowed = 0.0

    def _pace(self) -> None:
        wait = self._next_allowed - time.monotonic()
        if wait > 0:
            time.sleep(wait)
        self._next_allowed = time.monotonic() + self.config.request_interval

    def score(self, text: str, node: str = "") -> ToxicityScore:
        body = {"comment": {"text": text}, "requestedAttributes": {"TOXICITY": {}}}
        attempts = self.config.max_retries + 1
        with self._gate:
            for attempt in range(attempts):
                self._pace()
                try:
                    resp = self.session.post(
                        self.config.endpoint,
                        params={"key": self.api_key},
                        json=body,
                        timeout=self.config.request_timeout,
                    )
                except requests.Timeout as exc:
                    raise Timeout(f"request timed out: {exc}") from exc
                except requests.RequestException as exc:
                    raise ProtocolError(f"request failed: {exc}") from exc

                if resp.status_code == 429 or 500 <= resp.status_code < 600:
                    if attempt + 1 < attempts:
                        time.sleep(self.config.request_interval * 2**attempt)
                        continue
                    if resp.status_code == 429:
                        raise RateLimited(attempts)
                    raise ProtocolError(
                        f"server error {resp.status_code} after {attempts} attempts"
                    )
                if resp.status_code != 200:
                    raise ProtocolError(f"unexpected status {resp.status_code}")
                return ToxicityScore(node, self._parse_value(resp, node), "remote")
        raise ProtocolError("unreachable")  # pragma: no cover

    def _parse_value(self, resp, node: str) -> float:
        try:
            payload = resp.json()
        except ValueError as exc:
            raise ProtocolError(f"response body is not JSON: {exc}") from exc
        try:
            value = payload["attributeScores"]["TOXICITY"]["summaryScore"]["value"]
        except (KeyError, TypeError):
            raise ProtocolError("response missing attributeScores.TOXICITY.summaryScore.value") from None
        if not isinstance(value, (int, float)) or not math.isfinite(float(value)):
            raise ProtocolError(f"summary score is not numeric: {value!r}")
        value = float(value)
        if value < 0.0 or value > 1.0:
            logger.warning("remote toxicity %s for node %s outside [0,1]; clamped", value, node)
            value = min(1.0, max(0.0, value))
        return value

    def score_many(self, texts: Mapping[str, str]) -> dict[str, ToxicityScore]:
        return {node: self.score(text, node) for node, text in sorted(texts.items())}


def remote_toxicity_score(text: str, config: ToxicityConfig, node: str = "") -> ToxicityScore:
    """One-shot remote scoring (builds a throwaway paced client)."""
    return RemoteToxicityScorer(config).score(text, node)


# ── flagging and set algebra ──────────────────────────────────────────


def toxic_nodes(
    scores: Mapping[str, float], threshold: float = DEFAULT_THRESHOLD
) -> set[str]:
    """Nodes whose toxicity strictly exceeds the threshold."""
    return {node for node, value in scores.items() if value > threshold}


def combined_influential(eimpact: InfluentialSet, toxic: set[str]) -> CombinedResult:
    members = frozenset(eimpact.members)
    toxic_set = frozenset(toxic)
    combined = members & toxic_set
    union = members | toxic_set
    containment = len(combined) / len(toxic_set) if toxic_set else 0.0
    jaccard = len(combined) / len(union) if union else 0.0
    return CombinedResult(members, toxic_set, combined, Overlap(containment, jaccard))


def toxicity_concentration(
    graph: ConversationGraph, toxic: set[str], influential: InfluentialSet
) -> float:
    """Fraction of toxic nodes inside influential reply subtrees.

    Influential nodes themselves count as part of their subtree; with
    no influential nodes (empty union) or no toxic nodes the fraction
    is 0.
    """
    if not toxic:
        return 0.0
    covered: set[str] = set()
    for node in influential.members:
        if node in graph:
            covered.update(graph.subtree_nodes(node))
    return len(toxic & covered) / len(toxic)
