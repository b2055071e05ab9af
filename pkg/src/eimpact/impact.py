"""Emotion propagation: per-node impact, emotion boards, influential nodes.

A node's impact on the root is its emotion probability times a weighted
sum of its normalized structural attributes (in-degree, reply-subtree
size, PageRank), decayed exponentially with depth. The root's Emotion
Board aggregates those impacts per label; nodes whose impact strictly
exceeds the mean are influential, and the same analysis re-runs inside
each influential node's reply subtree (drill-down).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from .affect import EMOTION_LABELS, EmotionLabel
from .errors import EmptyGraph, NodeNotFound
from .graph import ConversationGraph, NodeMetrics, compute_metrics


@dataclass(frozen=True)
class ImpactWeights:
    """Mixing weights for the impact rule.

    alpha, beta, gamma weight the normalized in-degree, subtree-size,
    and PageRank terms and must sum to 1; decay in (0, 1] discounts
    depth. include_root widens the aggregation scope to the root.
    """

    alpha: float = 1.0 / 3.0
    beta: float = 1.0 / 3.0
    gamma: float = 1.0 / 3.0
    decay: float = 0.8
    include_root: bool = False

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if abs(self.alpha + self.beta + self.gamma - 1.0) > 1e-9:
            raise ValueError("alpha + beta + gamma must sum to 1")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must be in (0, 1]")

    @classmethod
    def parse(cls, spec: str, include_root: bool = False) -> "ImpactWeights":
        """Parse the CLI form ``alpha,beta,gamma,decay``."""
        parts = [p.strip() for p in spec.split(",")]
        if len(parts) != 4:
            raise ValueError("weights must be four comma-separated numbers: a,b,g,lambda")
        a, b, g, decay = (float(p) for p in parts)
        return cls(a, b, g, decay, include_root)


@dataclass(frozen=True)
class NodeImpact:
    node: str
    value: float


@dataclass(frozen=True)
class EmotionBoard:
    """Normalized six-emotion distribution of propagated mass.

    Either all six proportions are zero (no evidence) or they sum to 1.
    """

    proportions: dict[EmotionLabel, float]

    def is_zero(self) -> bool:
        return all(v == 0.0 for v in self.proportions.values())


@dataclass(frozen=True)
class InfluentialSet:
    """Nodes whose impact strictly exceeds the mean impact in scope."""

    threshold: float
    members: frozenset[str]


EMPTY_INFLUENTIAL = InfluentialSet(0.0, frozenset())


def node_impact(
    metrics: NodeMetrics,
    d_max: int,
    n: int,
    p_max: float,
    weights: ImpactWeights = ImpactWeights(),
) -> float:
    """Impact of one node given whole-graph aggregates; 0/0 terms are 0."""

    def ratio(num: float, den: float) -> float:
        return num / den if den > 0 else 0.0

    structural = (
        weights.alpha * ratio(metrics.direct_responses, d_max)
        + weights.beta * ratio(metrics.engagement, n - 1)
        + weights.gamma * ratio(metrics.pagerank, p_max)
    )
    return metrics.emotion_score * structural * weights.decay**metrics.depth


def compute_impacts(
    graph: ConversationGraph,
    weights: ImpactWeights = ImpactWeights(),
    metrics: Mapping[str, NodeMetrics] | None = None,
) -> dict[str, float]:
    """Impact values for every node in scope (root excluded by default).

    Aggregates (max in-degree, node count, max PageRank) are taken over
    the whole graph being analyzed.
    """
    if metrics is None:
        metrics = compute_metrics(graph)
    d_max = max(m.direct_responses for m in metrics.values())
    p_max = max(m.pagerank for m in metrics.values())
    n = len(graph)
    return {
        v: node_impact(metrics[v], d_max, n, p_max, weights)
        for v in graph.nodes
        if weights.include_root or v != graph.root
    }


def emotion_board(
    graph: ConversationGraph,
    impacts: Mapping[str, float],
    weights: ImpactWeights = ImpactWeights(),
) -> EmotionBoard:
    """Aggregate impact mass per label and normalize to a distribution."""
    mass = {label: 0.0 for label in EMOTION_LABELS}
    for v, value in impacts.items():
        if v == graph.root and not weights.include_root:
            continue
        score = graph.score_of(v)
        if score.scored and score.label is not None:
            mass[score.label] += value
    total = sum(mass.values())
    if total <= 0.0:
        return EmotionBoard({label: 0.0 for label in EMOTION_LABELS})
    return EmotionBoard({label: mass[label] / total for label in EMOTION_LABELS})


# Relative guard so values equal to the mean up to float dust stay below
# the strict > cutoff (e.g. a mean of exactly 0.2 computed from doubles).
_MEAN_GUARD = 1e-12


def influential_nodes(impacts: Mapping[str, float]) -> InfluentialSet:
    """Nodes with impact strictly greater than the mean impact."""
    if not impacts:
        raise EmptyGraph("no impact entries in scope")
    threshold = math.fsum(impacts.values()) / len(impacts)
    cutoff = threshold * (1.0 + _MEAN_GUARD)
    members = frozenset(v for v, value in impacts.items() if value > cutoff)
    return InfluentialSet(threshold, members)


def drilldown(
    graph: ConversationGraph,
    influential: InfluentialSet,
    weights: ImpactWeights = ImpactWeights(),
    max_depth: int = 2,
) -> dict[str, InfluentialSet]:
    """Re-run the influence analysis inside each influential subtree.

    Each influential node is treated as the root of its reply subtree;
    metrics, PageRank, and aggregates are recomputed within that
    subgraph. Recurses into the nested influential sets up to
    ``max_depth`` levels. Leaf subtrees map to the empty set.
    """
    result: dict[str, InfluentialSet] = {}

    def analyze(node_id: str, level: int) -> None:
        sub = graph.subgraph(node_id)
        impacts = compute_impacts(sub, weights) if len(sub) > 1 else {}
        found = influential_nodes(impacts) if impacts else EMPTY_INFLUENTIAL
        result[node_id] = found
        if level < max_depth:
            for member in sorted(found.members):
                analyze(member, level + 1)

    for node_id in sorted(influential.members):
        analyze(node_id, 1)
    return result


def tree_emotion_distribution(
    graph: ConversationGraph, subtree_root: str
) -> dict[EmotionLabel, float]:
    """Percentage of scored subtree nodes carrying each label.

    Unscored nodes are excluded from the denominator; with no scored
    nodes at all, every percentage is zero.
    """
    if subtree_root not in graph:
        raise NodeNotFound(subtree_root)
    counts = {label: 0 for label in EMOTION_LABELS}
    scored_total = 0
    for v in graph.subtree_nodes(subtree_root):
        score = graph.score_of(v)
        if score.scored and score.label is not None:
            counts[score.label] += 1
            scored_total += 1
    if scored_total == 0:
        return {label: 0.0 for label in EMOTION_LABELS}
    return {label: 100.0 * counts[label] / scored_total for label in EMOTION_LABELS}


def raw_label_distribution(
    graph: ConversationGraph,
    impacts: Mapping[str, float],
    weights: ImpactWeights = ImpactWeights(),
) -> dict[EmotionLabel, float]:
    """Unweighted label fractions over scored nodes in the impact scope."""
    counts = {label: 0 for label in EMOTION_LABELS}
    scored_total = 0
    for v in impacts:
        if v == graph.root and not weights.include_root:
            continue
        score = graph.score_of(v)
        if score.scored and score.label is not None:
            counts[score.label] += 1
            scored_total += 1
    return {
        label: (counts[label] / scored_total if scored_total else 0.0)
        for label in EMOTION_LABELS
    }


def distribution_shift(
    graph: ConversationGraph,
    impacts: Mapping[str, float],
    weights: ImpactWeights = ImpactWeights(),
) -> dict[EmotionLabel, float]:
    """Propagated-minus-raw label distribution, in percentage points.

    The raw distribution counts scored nodes in the same scope as the
    impacts. Shifts sum to zero; if the board carries no mass at all
    the shift is all zeros.
    """
    board = emotion_board(graph, impacts, weights)
    if board.is_zero():
        return {label: 0.0 for label in EMOTION_LABELS}
    raw = raw_label_distribution(graph, impacts, weights)
    return {
        label: 100.0 * (board.proportions[label] - raw[label]) for label in EMOTION_LABELS
    }
