"""Timestamp-ordered replay under freeze policies, plus a synthetic
conversation generator for testing the pipeline end to end.

Replay processes arrivals in order while periodically re-evaluating a
policy's flag set on the graph built so far; flagged nodes are frozen
and any later arrival whose parent chain passes through a frozen (or
already suppressed) node is suppressed. Reduction is the share of
baseline toxic arrivals that were suppressed.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from enum import Enum
from typing import Mapping

from .affect import EMOTION_LABELS, EmotionLabel, EmotionScore
from .corpus import Conversation, ConversationRecord, resolve_parents
from .errors import MissingScore, MissingToxicity, MultipleRoots, NoRoot
from .graph import ConversationGraph
from .impact import ImpactWeights, compute_impacts, influential_nodes
from .toxicity import DEFAULT_THRESHOLD, toxic_nodes


class PolicyKind(str, Enum):
    EIMPACT = "eimpact"
    TOXICITY = "toxicity"
    COMBINED = "combined"


@dataclass(frozen=True)
class Policy:
    kind: PolicyKind
    evaluation_cadence: int = 25
    freeze_root_allowed: bool = False

    def __post_init__(self):
        if self.evaluation_cadence < 1:
            raise ValueError("evaluation_cadence must be >= 1")


@dataclass(frozen=True)
class InterventionOutcome:
    """Result of one replay: what was frozen, suppressed, and retained.

    ``frozen_at`` maps each frozen node to the arrival count at which it
    was frozen, which makes the suppression schedule reproducible from
    the outcome alone.
    """

    policy: PolicyKind
    baseline_toxic: int
    retained_toxic: int
    suppressed: int
    frozen: frozenset[str]
    reduction_percent: float
    frozen_at: dict[str, int] = field(default_factory=dict)
    n_arrivals: int = 0


@dataclass(frozen=True)
class SynthParams:
    """Knobs for the seeded branching-process generator.

    ``anger_multiplier`` boosts both the reply rate under anger parents
    and the chance that those replies are themselves anger (angry
    threads breed angry, fast-growing subtrees).
    """

    seed: int = 0
    max_nodes: int = 100
    base_branching: float = 1.0
    emotion_mix: dict[EmotionLabel, float] | None = None
    anger_multiplier: float = 1.0
    toxic_given_anger: float = 0.1
    toxic_given_other: float = 0.02

    def __post_init__(self):
        if self.max_nodes < 1:
            raise ValueError("max_nodes must be >= 1")
        if self.base_branching < 0:
            raise ValueError("base_branching must be >= 0")
        if self.anger_multiplier < 1:
            raise ValueError("anger_multiplier must be >= 1")
        for p in (self.toxic_given_anger, self.toxic_given_other):
            if not 0.0 <= p <= 1.0:
                raise ValueError("toxicity probabilities must be in [0, 1]")

    def mix(self) -> dict[EmotionLabel, float]:
        mix = self.emotion_mix or {label: 1.0 for label in EMOTION_LABELS}
        total = sum(mix.values())
        if total <= 0:
            raise ValueError("emotion_mix must have positive total weight")
        return {label: mix.get(label, 0.0) / total for label in EMOTION_LABELS}


_SYNTH_WORDS = {
    EmotionLabel.ANGER: ("furious", "outrage", "disgrace"),
    EmotionLabel.FEAR: ("terrified", "worried", "dread"),
    EmotionLabel.JOY: ("delighted", "wonderful", "cheer"),
    EmotionLabel.LOVE: ("adore", "heartfelt", "darling"),
    EmotionLabel.SADNESS: ("heartbroken", "grim", "mourning"),
    EmotionLabel.SURPRISE: ("astonished", "unexpected", "whoa"),
}

_EPOCH = datetime(2024, 1, 1, tzinfo=timezone.utc)


def _poisson(rng: random.Random, mean: float) -> int:
    if mean <= 0:
        return 0
    limit = math.exp(-mean)
    k = 0
    p = 1.0
    while True:
        p *= rng.random()
        if p <= limit:
            return k
        k += 1


def synthesize_conversation(
    params: SynthParams,
) -> tuple[Conversation, dict[str, EmotionScore], dict[str, float]]:
    """Grow a conversation breadth-first from a seeded RNG.

    Reply counts are Poisson with mean base_branching, tripled (etc.)
    under anger parents per ``anger_multiplier``; labels come from the
    emotion mix with the same multiplier applied to anger replies under
    anger parents; toxicity values land above 0.9 with the configured
    conditional probabilities. Identical params yield byte-identical
    conversations.
    """
    rng = random.Random(params.seed)
    mix = params.mix()
    anger_mix = dict(mix)
    anger_mix[EmotionLabel.ANGER] = anger_mix[EmotionLabel.ANGER] * params.anger_multiplier
    anger_total = sum(anger_mix.values())
    anger_mix = {label: w / anger_total for label, w in anger_mix.items()}

    width = max(4, len(str(params.max_nodes)))
    root_id = "n" + "1".zfill(width)

    def draw_label(parent_label: EmotionLabel | None) -> EmotionLabel:
        weights = anger_mix if parent_label == EmotionLabel.ANGER else mix
        x = rng.random()
        acc = 0.0
        for label in EMOTION_LABELS:
            acc += weights[label]
            if x < acc:
                return label
        return EMOTION_LABELS[-1]

    records: list[ConversationRecord] = []
    scores: dict[str, EmotionScore] = {}
    toxicity: dict[str, float] = {}
    labels: dict[str, EmotionLabel] = {}

    def add_node(parent: ConversationRecord | None) -> ConversationRecord:
        index = len(records) + 1
        node_id = "n" + str(index).zfill(width)
        label = draw_label(labels[parent.id] if parent else None)
        score = rng.uniform(0.55, 0.95)
        toxic_p = (
            params.toxic_given_anger
            if label == EmotionLabel.ANGER
            else params.toxic_given_other
        )
        is_toxic = rng.random() < toxic_p
        value = rng.uniform(0.905, 0.995) if is_toxic else rng.uniform(0.0, 0.6)
        words = _SYNTH_WORDS[label]
        text = f"{words[index % len(words)]} {words[(index // 3) % len(words)]} #{label.value}"
        record = ConversationRecord(
            id=node_id,
            conversation_id=root_id,
            author_id=f"u{index:04d}",
            created_at=_EPOCH + timedelta(seconds=index),
            in_reply_to_user_id=parent.author_id if parent else None,
            lang="en",
            text=text,
            parent_id=parent.id if parent else None,
        )
        records.append(record)
        labels[node_id] = label
        scores[node_id] = EmotionScore(label, score, True)
        toxicity[node_id] = value
        return record

    queue = [add_node(None)]
    while queue and len(records) < params.max_nodes:
        node = queue.pop(0)
        mean = params.base_branching * (
            params.anger_multiplier if labels[node.id] == EmotionLabel.ANGER else 1.0
        )
        for _ in range(_poisson(rng, mean)):
            if len(records) >= params.max_nodes:
                break
            queue.append(add_node(node))

    conversation = Conversation(root_id, records, [])
    return conversation, scores, toxicity


# ── replay ────────────────────────────────────────────────────────────


def _find_replay_root(ids: list[str], parents: Mapping[str, str]) -> str:
    roots = [i for i in ids if i not in parents]
    if not roots:
        raise NoRoot()
    if len(roots) > 1:
        raise MultipleRoots(roots)
    return roots[0]


def replay_with_policy(
    conversation: Conversation,
    scores: Mapping[str, EmotionScore],
    toxicity: Mapping[str, float],
    policy: Policy,
    weights: ImpactWeights = ImpactWeights(),
    tox_threshold: float = DEFAULT_THRESHOLD,
    parents: Mapping[str, str] | None = None,
) -> InterventionOutcome:
    """Replay arrivals under a freeze policy and measure suppression.

    Every ``evaluation_cadence`` arrivals the policy's flag set is
    recomputed on the graph of retained nodes and newly flagged nodes
    are frozen (the root only when the policy allows it). An arrival
    with a frozen or suppressed node anywhere in its parent chain is
    suppressed. Frozen nodes stay in the graph; only their later
    descendants are lost.
    """
    records = sorted(conversation.records, key=ConversationRecord.sort_key)
    if parents is None:
        parents, _ = resolve_parents(records)
    for r in records:
        if r.id not in scores:
            raise MissingScore(r.id)
        if r.id not in toxicity:
            raise MissingToxicity(r.id)

    root = _find_replay_root([r.id for r in records], parents)
    frozen_at: dict[str, int] = {}
    suppressed: set[str] = set()
    retained: list[str] = []

    def evaluate(count: int) -> None:
        flags = _policy_flags(
            policy.kind, retained, parents, scores, toxicity, weights, tox_threshold, root
        )
        for node in sorted(flags):
            if node in frozen_at:
                continue
            if node == root and not policy.freeze_root_allowed:
                continue
            frozen_at[node] = count

    for count, r in enumerate(records, start=1):
        blocked = False
        cur = parents.get(r.id)
        while cur is not None:
            if cur in frozen_at or cur in suppressed:
                blocked = True
                break
            cur = parents.get(cur)
        if blocked:
            suppressed.add(r.id)
        else:
            retained.append(r.id)
        if count % policy.evaluation_cadence == 0:
            evaluate(count)

    baseline_toxic = sum(1 for r in records if toxicity[r.id] > tox_threshold)
    retained_toxic = sum(1 for v in retained if toxicity[v] > tox_threshold)
    reduction = (
        100.0 * (baseline_toxic - retained_toxic) / baseline_toxic
        if baseline_toxic > 0
        else 0.0
    )
    return InterventionOutcome(
        policy=policy.kind,
        baseline_toxic=baseline_toxic,
        retained_toxic=retained_toxic,
        suppressed=len(suppressed),
        frozen=frozenset(frozen_at),
        reduction_percent=reduction,
        frozen_at=dict(frozen_at),
        n_arrivals=len(records),
    )


def _policy_flags(
    kind: PolicyKind,
    retained: list[str],
    parents: Mapping[str, str],
    scores: Mapping[str, EmotionScore],
    toxicity: Mapping[str, float],
    weights: ImpactWeights,
    tox_threshold: float,
    root: str,
) -> set[str]:
    retained_set = set(retained)
    if kind == PolicyKind.TOXICITY:
        return toxic_nodes({v: toxicity[v] for v in retained}, tox_threshold)

    sub_parents = {v: p for v, p in parents.items() if v in retained_set and p in retained_set}
    graph = ConversationGraph.from_parent_map(
        retained_set, sub_parents, {v: scores[v] for v in retained}
    )
    impacts = compute_impacts(graph, weights) if len(graph) > 1 else {}
    members = influential_nodes(impacts).members if impacts else frozenset()
    if kind == PolicyKind.EIMPACT:
        return set(members)
    toxic = toxic_nodes({v: toxicity[v] for v in graph.nodes}, tox_threshold)
    return set(members) & toxic


def compare_policies(
    conversation: Conversation,
    scores: Mapping[str, EmotionScore],
    toxicity: Mapping[str, float],
    weights: ImpactWeights = ImpactWeights(),
    tox_threshold: float = DEFAULT_THRESHOLD,
    evaluation_cadence: int = 25,
    freeze_root_allowed: bool = False,
    parents: Mapping[str, str] | None = None,
) -> list[InterventionOutcome]:
    """Run every policy kind on identical inputs, at the same cadence."""
    outcomes = []
    for kind in PolicyKind:
        policy = Policy(kind, evaluation_cadence, freeze_root_allowed)
        outcomes.append(
            replay_with_policy(
                conversation, scores, toxicity, policy, weights, tox_threshold, parents
            )
        )
    return outcomes
