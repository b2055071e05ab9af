from __future__ import annotations

import random

import pytest

from eimpact.affect import EMOTION_LABELS, EmotionLabel, EmotionScore, UNSCORED
from eimpact.errors import EmptyGraph, NodeNotFound
from eimpact.graph import ConversationGraph, NodeMetrics
from eimpact.impact import (
    EMPTY_INFLUENTIAL,
    ImpactWeights,
    compute_impacts,
    distribution_shift,
    drilldown,
    emotion_board,
    influential_nodes,
    node_impact,
    raw_label_distribution,
    tree_emotion_distribution,
)

from conftest import graph_from_parents, random_tree_parents, scored


def random_scored_graph(rng: random.Random, n: int) -> ConversationGraph:
    parents = random_tree_parents(rng, n)
    scores = {}
    for i in range(n):
        if rng.random() < 0.8:
            label = rng.choice(list(EMOTION_LABELS))
            scores[f"v{i:03d}"] = EmotionScore(label, rng.random(), True)
        else:
            scores[f"v{i:03d}"] = UNSCORED
    return graph_from_parents(parents, "v000", scores)


# ── node_impact ───────────────────────────────────────────────────────


def test_unscored_node_has_zero_impact():
    metrics = NodeMetrics(5, 20, 1, 0.2, 0.0)
    assert node_impact(metrics, 5, 40, 0.2) == 0.0


def test_maximal_node_has_impact_one():
    metrics = NodeMetrics(4, 9, 0, 0.3, 1.0)
    assert node_impact(metrics, 4, 10, 0.3) == pytest.approx(1.0, abs=1e-12)


def test_hand_evaluated_fixture():
    # score .8; all three normalized terms .5; depth 2 at decay .8.
    metrics = NodeMetrics(2, 5, 2, 0.05, 0.8)
    value = node_impact(metrics, 4, 11, 0.1)
    assert value == pytest.approx(0.8 * 0.5 * 0.64, abs=1e-12)
    assert value == pytest.approx(0.256, abs=1e-12)


def test_zero_over_zero_terms_are_zero():
    metrics = NodeMetrics(0, 0, 0, 0.0, 1.0)
    assert node_impact(metrics, 0, 1, 0.0) == 0.0


def test_weights_validation():
    with pytest.raises(ValueError):
        ImpactWeights(0.5, 0.5, 0.5)
    with pytest.raises(ValueError):
        ImpactWeights(decay=0.0)
    with pytest.raises(ValueError):
        ImpactWeights(-0.5, 1.0, 0.5)
    weights = ImpactWeights.parse("0.5,0.3,0.2,1.0")
    assert weights.alpha == 0.5 and weights.decay == 1.0
    with pytest.raises(ValueError):
        ImpactWeights.parse("1,0,0")


# ── emotion board ─────────────────────────────────────────────────────


def test_board_single_class_mass():
    parents = {"a": "r", "b": "r", "c": "a"}
    scores = {v: scored(EmotionLabel.ANGER) for v in ("a", "b", "c")}
    graph = graph_from_parents(parents, "r", scores)
    impacts = compute_impacts(graph)
    board = emotion_board(graph, impacts)
    assert board.proportions[EmotionLabel.ANGER] == pytest.approx(1.0, abs=1e-12)
    assert sum(board.proportions.values()) == pytest.approx(1.0, abs=1e-9)


def test_board_root_only_graph_is_all_zero():
    graph = graph_from_parents({}, "r", {"r": scored(EmotionLabel.JOY)})
    impacts = compute_impacts(graph)  # empty scope: root excluded
    assert impacts == {}
    board = emotion_board(graph, impacts)
    assert board.is_zero()


def test_board_matches_per_label_summation_oracle():
    rng = random.Random(21)
    graph = random_scored_graph(rng, 12)
    impacts = compute_impacts(graph)
    board = emotion_board(graph, impacts)
    mass = dict.fromkeys(EMOTION_LABELS, 0.0)
    for v, value in impacts.items():
        s = graph.score_of(v)
        if s.scored:
            mass[s.label] += value
    total = sum(mass.values())
    for label in EMOTION_LABELS:
        assert board.proportions[label] == pytest.approx(mass[label] / total, abs=1e-9)


# ── influential nodes ─────────────────────────────────────────────────


def test_influential_forced_arithmetic():
    result = influential_nodes({"a": 0.1, "b": 0.2, "c": 0.3})
    assert result.threshold == pytest.approx(0.2, abs=1e-12)
    assert result.members == {"c"}


def test_influential_all_equal_is_empty():
    result = influential_nodes({"a": 0.5, "b": 0.5, "c": 0.5})
    assert result.members == frozenset()


def test_influential_empty_scope_raises():
    with pytest.raises(EmptyGraph):
        influential_nodes({})


def test_influential_matches_filter_oracle():
    rng = random.Random(17)
    impacts = {f"n{i}": rng.random() for i in range(100)}
    result = influential_nodes(impacts)
    mean = sum(impacts.values()) / len(impacts)
    assert result.members == {v for v, x in impacts.items() if x > mean}


def test_influential_scale_invariance():
    rng = random.Random(8)
    impacts = {f"n{i}": rng.random() for i in range(60)}
    baseline = influential_nodes(impacts).members
    for c in (0.1, 1.0, 10.0):
        scaled = {v: c * x for v, x in impacts.items()}
        assert influential_nodes(scaled).members == baseline


# ── drill-down ────────────────────────────────────────────────────────


def test_drilldown_influential_leaf_maps_to_empty_set():
    parents = {"a": "r", "b": "r"}
    scores = {"a": scored(EmotionLabel.ANGER, 0.9), "b": scored(EmotionLabel.JOY, 0.1)}
    graph = graph_from_parents(parents, "r", scores)
    impacts = compute_impacts(graph)
    influential = influential_nodes(impacts)
    assert "a" in influential.members
    result = drilldown(graph, influential)
    for node in influential.members:
        assert result[node] == EMPTY_INFLUENTIAL


def test_drilldown_empty_influential_set():
    graph = graph_from_parents({"a": "r"}, "r")
    assert drilldown(graph, EMPTY_INFLUENTIAL) == {}


def test_drilldown_two_levels_match_extracted_subtree_recomputation():
    rng = random.Random(31)
    graph = random_scored_graph(rng, 60)
    impacts = compute_impacts(graph)
    influential = influential_nodes(impacts)
    assert influential.members
    result = drilldown(graph, influential, max_depth=2)

    def recompute(node):
        # Independently extract the subtree and re-run the analysis.
        members = set(graph.subtree_nodes(node))
        sub_parents = {v: p for v, p in graph.parent.items() if v in members and p in members}
        sub = ConversationGraph.from_parent_map(
            members, sub_parents, {v: graph.scores[v] for v in members}
        )
        sub_impacts = compute_impacts(sub)
        return influential_nodes(sub_impacts).members if sub_impacts else frozenset()

    for top in influential.members:
        assert result[top].members == recompute(top)
        for nested in result[top].members:
            assert result[nested].members == recompute(nested)


# ── tree emotion distribution ─────────────────────────────────────────


def test_distribution_single_class_subtree(worked_example_graph):
    graph = ConversationGraph(
        worked_example_graph.root,
        worked_example_graph.parent,
        {v: scored(EmotionLabel.JOY) for v in ("3", "4", "5", "6", "7", "8")},
    )
    dist = tree_emotion_distribution(graph, "3")
    assert dist[EmotionLabel.JOY] == 100.0
    assert sum(dist.values()) == pytest.approx(100.0, abs=1e-6)


def test_distribution_unscored_subtree_is_all_zero(worked_example_graph):
    dist = tree_emotion_distribution(worked_example_graph, "3")
    assert all(v == 0.0 for v in dist.values())
    with pytest.raises(NodeNotFound):
        tree_emotion_distribution(worked_example_graph, "zz")


def test_distribution_matches_counting_oracle():
    rng = random.Random(14)
    graph = random_scored_graph(rng, 30)
    for node in ("v000", "v001"):
        if node not in graph:
            continue
        dist = tree_emotion_distribution(graph, node)
        members = graph.subtree_nodes(node)
        scored_members = [v for v in members if graph.score_of(v).scored]
        for label in EMOTION_LABELS:
            count = sum(1 for v in scored_members if graph.score_of(v).label is label)
            expected = 100.0 * count / len(scored_members) if scored_members else 0.0
            assert dist[label] == pytest.approx(expected, abs=1e-9)


# ── distribution shift ────────────────────────────────────────────────


def test_shift_identity_when_board_equals_raw():
    # Every scored node shares one label, so board == raw exactly.
    parents = {"a": "r", "b": "r", "c": "a"}
    scores = {v: scored(EmotionLabel.FEAR, 0.7) for v in ("a", "b", "c")}
    graph = graph_from_parents(parents, "r", scores)
    impacts = compute_impacts(graph)
    shift = distribution_shift(graph, impacts)
    assert all(v == pytest.approx(0.0, abs=1e-9) for v in shift.values())


def test_shift_positive_for_high_impact_anger_subtree():
    parents = {
        "A": "r",
        "a1": "A",
        "a2": "A",
        "a3": "A",
        "j": "r",
        "s": "r",
    }
    scores = {
        "A": scored(EmotionLabel.ANGER),
        "a1": scored(EmotionLabel.ANGER),
        "a2": scored(EmotionLabel.ANGER),
        "a3": scored(EmotionLabel.ANGER),
        "j": scored(EmotionLabel.JOY),
        "s": scored(EmotionLabel.SADNESS),
    }
    graph = graph_from_parents(parents, "r", scores)
    impacts = compute_impacts(graph)
    shift = distribution_shift(graph, impacts)
    board = emotion_board(graph, impacts).proportions
    # Direct subtraction oracle.
    raw = {label: 0 for label in EMOTION_LABELS}
    for v in impacts:
        s = graph.score_of(v)
        raw[s.label] += 1
    for label in EMOTION_LABELS:
        expected = 100.0 * (board[label] - raw[label] / len(impacts))
        assert shift[label] == pytest.approx(expected, abs=1e-9)
    assert shift[EmotionLabel.ANGER] > 0
    assert all(shift[label] <= 0 for label in EMOTION_LABELS if label != EmotionLabel.ANGER)
    assert sum(shift.values()) == pytest.approx(0.0, abs=1e-6)


def test_shift_sums_to_zero_on_random_graphs():
    rng = random.Random(77)
    for _ in range(20):
        graph = random_scored_graph(rng, rng.randrange(2, 40))
        impacts = compute_impacts(graph)
        shift = distribution_shift(graph, impacts)
        assert sum(shift.values()) == pytest.approx(0.0, abs=1e-6)


def test_shift_is_board_minus_initial():
    rng = random.Random(78)
    graph = random_scored_graph(rng, 35)
    impacts = compute_impacts(graph)
    board = emotion_board(graph, impacts).proportions
    initial = raw_label_distribution(graph, impacts)
    shift = distribution_shift(graph, impacts)
    for label in EMOTION_LABELS:
        assert shift[label] == pytest.approx(
            100.0 * (board[label] - initial[label]), abs=1e-9
        )


# ── whole-rule properties over randomized graphs ──────────────────────


def test_board_normalization_property():
    rng = random.Random(1)
    for _ in range(50):
        graph = random_scored_graph(rng, rng.randrange(1, 40))
        impacts = compute_impacts(graph)
        board = emotion_board(graph, impacts)
        total = sum(board.proportions.values())
        assert board.is_zero() or total == pytest.approx(1.0, abs=1e-9)


def test_root_perturbation_does_not_move_the_board():
    rng = random.Random(2)
    for _ in range(20):
        graph = random_scored_graph(rng, rng.randrange(2, 40))
        impacts = compute_impacts(graph)
        board = emotion_board(graph, impacts)
        perturbed_scores = dict(graph.scores)
        perturbed_scores[graph.root] = EmotionScore(EmotionLabel.ANGER, 1.0, True)
        perturbed = ConversationGraph(graph.root, graph.parent, perturbed_scores)
        impacts2 = compute_impacts(perturbed)
        board2 = emotion_board(perturbed, impacts2)
        assert board.proportions == board2.proportions


def test_impact_monotone_in_emotion_score():
    rng = random.Random(6)
    for _ in range(20):
        graph = random_scored_graph(rng, rng.randrange(2, 30))
        impacts = compute_impacts(graph)
        node = rng.choice([v for v in graph.nodes if v != graph.root])
        old_score = graph.score_of(node)
        bumped = min(1.0, old_score.score + 0.3)
        new_scores = dict(graph.scores)
        new_scores[node] = EmotionScore(old_score.label or EmotionLabel.JOY, bumped, True)
        bumped_graph = ConversationGraph(graph.root, graph.parent, new_scores)
        impacts2 = compute_impacts(bumped_graph)
        assert impacts2[node] >= impacts[node]
