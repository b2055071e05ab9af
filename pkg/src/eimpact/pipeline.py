"""End-to-end pipeline: ingest -> score -> analyze -> simulate -> report.

Outputs are deterministic: identical config and inputs produce
byte-identical report.json (modulo the ``generated_at`` field, which
:func:`canonicalize_report` strips), DOT, and CSV files.
"""

from __future__ import annotations

import csv
import io
import json
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import corpus
from .affect import (
    EMOTION_LABELS,
    EmotionLabel,
    EmotionScore,
    load_emoji_map,
    load_lexicon,
    load_precomputed_scores,
    make_lexicon_scorer,
    score_records,
    tokenize,
)
from .corpus import Conversation, group_by_conversation, link_conversation, parse_records
from .errors import EImpactError, PipelineStageError, UsageError
from .graph import ConversationGraph, build_graph, compute_metrics, wiener_index
from .impact import (
    EMPTY_INFLUENTIAL,
    EmotionBoard,
    ImpactWeights,
    InfluentialSet,
    compute_impacts,
    distribution_shift,
    drilldown,
    emotion_board,
    influential_nodes,
    raw_label_distribution,
    tree_emotion_distribution,
)
from .simulate import InterventionOutcome, PolicyKind, compare_policies
from .toxicity import (
    CombinedResult,
    RemoteToxicityScorer,
    ToxicityConfig,
    combined_influential,
    load_precomputed_toxicity,
    load_toxicity_lexicon,
    offline_toxicity_score,
    toxic_nodes,
    toxicity_concentration,
)

SCHEMA_VERSION = 1

EMOTION_COLORS = {
    EmotionLabel.ANGER: "red",
    EmotionLabel.FEAR: "purple",
    EmotionLabel.JOY: "yellow",
    EmotionLabel.LOVE: "pink",
    EmotionLabel.SADNESS: "blue",
    EmotionLabel.SURPRISE: "orange",
}
UNSCORED_COLOR = "gray"

REPORT_FILE = "report.json"
DOT_FILE = "graph.dot"
WIENER_FILE = "wiener_vs_emotion.csv"
DISTRIBUTION_FILE = "distribution.csv"
OUTCOMES_FILE = "outcomes.csv"
DROPPED_FILE = "dropped.csv"


@dataclass
class RunConfig:
    """Everything one pipeline run needs; paths validated up front."""

    input_path: Path
    out_dir: Path | None = None
    lexicon_path: Path | None = None
    emoji_map_path: Path | None = None
    scores_path: Path | None = None
    toxicity_path: Path | None = None
    toxicity_lexicon_path: Path | None = None
    toxicity: ToxicityConfig = ToxicityConfig()
    weights: ImpactWeights = ImpactWeights()
    evaluation_cadence: int = 25
    freeze_root_allowed: bool = False
    drilldown_depth: int = 2
    lang_allow: frozenset[str] = corpus.DEFAULT_LANG_ALLOW
    dot_policy: PolicyKind = PolicyKind.COMBINED

    def validate(self) -> None:
        for name in ("input", "lexicon", "emoji_map", "scores", "toxicity", "toxicity_lexicon"):
            path = getattr(self, f"{name}_path")
            if path is not None and not Path(path).is_file():
                raise UsageError(f"{name.replace('_', ' ')} file not found: {path}")
        if self.toxicity.provider == "precomputed" and self.toxicity_path is None:
            raise UsageError("--toxicity-provider precomputed requires --toxicity FILE")
        if self.toxicity.provider not in ("offline", "remote", "precomputed"):
            raise UsageError(f"unknown toxicity provider: {self.toxicity.provider}")


@dataclass
class InfluentialNodeReport:
    node: str
    impact: float
    subtree_size: int
    wiener_index: float
    dominant_emotion: str | None
    distribution: dict[EmotionLabel, float]


@dataclass
class AnalysisReport:
    """Serializable summary of one conversation analysis."""

    conversation_id: str
    root: str
    node_count: int
    edge_count: int
    dropped: list[tuple[str, str]]
    weights: ImpactWeights
    board: EmotionBoard
    initial: dict[EmotionLabel, float]
    shift: dict[EmotionLabel, float]
    influential_threshold: float
    influential: list[InfluentialNodeReport]
    drilldown: dict[str, InfluentialSet]
    toxicity_provider: str
    toxicity_threshold: float
    combined: CombinedResult
    concentration: float
    outcomes: list[InterventionOutcome]
    generated_at: str

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "generated_at": self.generated_at,
            "conversation_id": self.conversation_id,
            "root": self.root,
            "node_count": self.node_count,
            "edge_count": self.edge_count,
            "dropped": [[rid, reason] for rid, reason in self.dropped],
            "weights": {
                "alpha": self.weights.alpha,
                "beta": self.weights.beta,
                "gamma": self.weights.gamma,
                "decay": self.weights.decay,
                "include_root": self.weights.include_root,
            },
            "emotion_board": {label.value: v for label, v in self.board.proportions.items()},
            "initial_distribution_pct": {
                label.value: 100.0 * v for label, v in self.initial.items()
            },
            "distribution_shift": {label.value: v for label, v in self.shift.items()},
            "influential_threshold": self.influential_threshold,
            "influential": [
                {
                    "node": entry.node,
                    "impact": entry.impact,
                    "subtree_size": entry.subtree_size,
                    "wiener_index": entry.wiener_index,
                    "dominant_emotion": entry.dominant_emotion,
                    "emotion_distribution": {
                        label.value: v for label, v in entry.distribution.items()
                    },
                }
                for entry in self.influential
            ],
            "drilldown": {
                node: {"threshold": found.threshold, "members": sorted(found.members)}
                for node, found in self.drilldown.items()
            },
            "toxicity": {
                "provider": self.toxicity_provider,
                "threshold": self.toxicity_threshold,
                "toxic_nodes": sorted(self.combined.toxic_set),
            },
            "combined": {
                "eimpact_set": sorted(self.combined.eimpact_set),
                "toxic_set": sorted(self.combined.toxic_set),
                "combined": sorted(self.combined.combined),
                "containment": self.combined.overlap.containment,
                "jaccard": self.combined.overlap.jaccard,
            },
            "toxicity_concentration": self.concentration,
            "outcomes": [
                {
                    "policy": o.policy.value,
                    "baseline_toxic": o.baseline_toxic,
                    "retained_toxic": o.retained_toxic,
                    "suppressed": o.suppressed,
                    "frozen": sorted(o.frozen),
                    "flagged_pct": flagged_pct(o),
                    "reduction_percent": o.reduction_percent,
                }
                for o in self.outcomes
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


@dataclass
class PipelineResult:
    report: AnalysisReport
    conversation: Conversation
    graph: ConversationGraph
    board: EmotionBoard
    influential: InfluentialSet
    combined: CombinedResult
    outcomes: list[InterventionOutcome]
    scores: dict[str, EmotionScore] = field(default_factory=dict)
    toxicity_values: dict[str, float] = field(default_factory=dict)

    def frozen_for(self, policy: PolicyKind) -> frozenset[str]:
        for outcome in self.outcomes:
            if outcome.policy == policy:
                return outcome.frozen
        return frozenset()


def flagged_pct(outcome: InterventionOutcome) -> float:
    if outcome.n_arrivals == 0:
        return 0.0
    return 100.0 * len(outcome.frozen) / outcome.n_arrivals


@contextmanager
def _stage(name: str):
    try:
        yield
    except PipelineStageError:
        raise
    except Exception as exc:
        raise PipelineStageError(name, exc) from exc


def execute(config: RunConfig) -> PipelineResult:
    """Run every stage on one conversation; no files are written."""
    config.validate()

    with _stage("corpus"):
        records = parse_records(config.input_path)
        groups = group_by_conversation(records)
        if len(groups) != 1:
            raise EImpactError(
                f"input contains {len(groups)} conversations; analyze one at a time"
            )
        conversation, parents = link_conversation(records, config.lang_allow)

    with _stage("affect"):
        emoji_map = load_emoji_map(config.emoji_map_path) if config.emoji_map_path else {}
        scorer = None
        if config.lexicon_path:
            scorer = make_lexicon_scorer(load_lexicon(config.lexicon_path, emoji_map))
        precomputed = (
            load_precomputed_scores(config.scores_path) if config.scores_path else {}
        )
        scores = score_records(conversation.records, scorer, precomputed)

    with _stage("graph"):
        graph = build_graph(conversation, parents, scores)
        metrics = compute_metrics(graph)

    with _stage("impact"):
        impacts = compute_impacts(graph, config.weights, metrics)
        influential = influential_nodes(impacts) if impacts else EMPTY_INFLUENTIAL
        board = emotion_board(graph, impacts, config.weights)
        initial = raw_label_distribution(graph, impacts, config.weights)
        shift = distribution_shift(graph, impacts, config.weights)
        drill = drilldown(graph, influential, config.weights, config.drilldown_depth)
        influential_reports = []
        for node in sorted(influential.members):
            windex = wiener_index(graph, node)
            distribution = tree_emotion_distribution(graph, node)
            influential_reports.append(
                InfluentialNodeReport(
                    node=node,
                    impact=impacts[node],
                    subtree_size=windex.n,
                    wiener_index=windex.value,
                    dominant_emotion=_dominant(distribution),
                    distribution=distribution,
                )
            )

    with _stage("toxicity"):
        tox_values = _toxicity_values(config, conversation)
        toxic = toxic_nodes(tox_values, config.toxicity.threshold)
        combined = combined_influential(influential, toxic)
        concentration = toxicity_concentration(graph, toxic, influential)

    with _stage("simulate"):
        outcomes = compare_policies(
            conversation,
            scores,
            tox_values,
            config.weights,
            config.toxicity.threshold,
            config.evaluation_cadence,
            config.freeze_root_allowed,
            parents,
        )

    report = AnalysisReport(
        conversation_id=conversation.conversation_id,
        root=graph.root,
        node_count=len(graph),
        edge_count=graph.edge_count,
        dropped=list(conversation.dropped),
        weights=config.weights,
        board=board,
        initial=initial,
        shift=shift,
        influential_threshold=influential.threshold,
        influential=influential_reports,
        drilldown=drill,
        toxicity_provider=config.toxicity.provider,
        toxicity_threshold=config.toxicity.threshold,
        combined=combined,
        concentration=concentration,
        outcomes=outcomes,
        generated_at=datetime.now(timezone.utc).isoformat(),
    )
    return PipelineResult(
        report, conversation, graph, board, influential, combined, outcomes, scores, tox_values
    )


def _dominant(distribution: dict[EmotionLabel, float]) -> str | None:
    best = min(EMOTION_LABELS, key=lambda e: (-distribution[e], e.value))
    return best.value if distribution[best] > 0 else None


def _toxicity_values(config: RunConfig, conversation: Conversation) -> dict[str, float]:
    precomputed = (
        load_precomputed_toxicity(config.toxicity_path) if config.toxicity_path else {}
    )
    provider = config.toxicity.provider
    values: dict[str, float] = {}
    remote = None
    offline_lexicon: dict[str, float] | None = None
    for r in conversation.records:
        if r.id in precomputed:
            values[r.id] = precomputed[r.id].value
        elif provider == "offline":
            if offline_lexicon is None:
                offline_lexicon = (
                    load_toxicity_lexicon(config.toxicity_lexicon_path)
                    if config.toxicity_lexicon_path
                    else {}
                )
            values[r.id] = offline_toxicity_score(
                tokenize(r.text), offline_lexicon, config.toxicity.saturation, r.id
            ).value
        elif provider == "remote":
            if remote is None:
                remote = RemoteToxicityScorer(config.toxicity)
            values[r.id] = remote.score(r.text, r.id).value
        else:  # precomputed provider, id missing from the file
            values[r.id] = 0.0
    return values


def run_pipeline(config: RunConfig) -> AnalysisReport:
    """Execute all stages and, when an output directory is set, write
    report.json, graph.dot, the series CSVs, outcomes.csv, dropped.csv."""
    result = execute(config)
    if config.out_dir is not None:
        with _stage("report"):
            write_outputs(result, Path(config.out_dir), config.dot_policy)
    return result.report


def write_outputs(
    result: PipelineResult, out_dir: Path, dot_policy: PolicyKind = PolicyKind.COMBINED
) -> dict[str, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    frozen = result.frozen_for(dot_policy)
    files = {
        REPORT_FILE: result.report.to_json(),
        DOT_FILE: export_dot(result.graph, result.board, result.influential, frozen),
        OUTCOMES_FILE: outcomes_csv(result.report),
        DROPPED_FILE: corpus.write_dropped_report(result.report.dropped),
    }
    written = {}
    for name, text in files.items():
        path = out_dir / name
        path.write_text(text, encoding="utf-8")
        written[name] = path
    written.update(emit_series(result.report, out_dir))
    return written


def emit_series(report: AnalysisReport, out_dir: Path) -> dict[str, Path]:
    """Write the plotting-ready series CSVs for the report."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    for name, text in (
        (WIENER_FILE, wiener_series_csv(report)),
        (DISTRIBUTION_FILE, distribution_series_csv(report)),
    ):
        path = out_dir / name
        path.write_text(text, encoding="utf-8")
        written[name] = path
    return written


def canonicalize_report(text: str) -> str:
    """Normalize a report.json for comparison (drops generated_at)."""
    data = json.loads(text)
    data.pop("generated_at", None)
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


# ── DOT export ────────────────────────────────────────────────────────


def _dot_quote(node_id: str) -> str:
    return '"' + node_id.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(
    graph: ConversationGraph,
    board: EmotionBoard,
    influential: InfluentialSet,
    frozen: frozenset[str] | set[str] = frozenset(),
) -> str:
    """Render the conversation as a deterministic DOT digraph.

    Nodes are filled with their emotion's color (gray when unscored),
    influential nodes get a double periphery, frozen nodes a bold
    border plus a ``frozen=true`` attribute. Edges point child->parent
    and nodes are emitted in ascending id order.
    """
    summary = " ".join(
        f"{label.value}={board.proportions[label]:.4f}" for label in EMOTION_LABELS
    )
    lines = [
        "digraph conversation {",
        f'  graph [label="emotion board: {summary}"];',
        "  node [style=filled];",
    ]
    for v in sorted(graph.nodes):
        score = graph.score_of(v)
        color = (
            EMOTION_COLORS[score.label]
            if score.scored and score.label is not None
            else UNSCORED_COLOR
        )
        attrs = [f"fillcolor={color}"]
        if v in influential.members:
            attrs.append("peripheries=2")
        if v in frozen:
            attrs.append("penwidth=3")
            attrs.append("frozen=true")
        lines.append(f"  {_dot_quote(v)} [{', '.join(attrs)}];")
    for child in sorted(graph.parent):
        lines.append(f"  {_dot_quote(child)} -> {_dot_quote(graph.parent[child])};")
    lines.append("}")
    return "\n".join(lines) + "\n"


# ── CSV series (the data behind the plots) ────────────────────────────


def wiener_series_csv(report: AnalysisReport) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        ["influential_node_id", "dominant_emotion", "emotion", "pct_in_subtree", "wiener_index"]
    )
    for entry in report.influential:
        for label in EMOTION_LABELS:
            writer.writerow(
                [
                    entry.node,
                    entry.dominant_emotion or "",
                    label.value,
                    entry.distribution[label],
                    entry.wiener_index,
                ]
            )
    return out.getvalue()


def distribution_series_csv(report: AnalysisReport) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["influential_node_id", "emotion", "pct"])
    for entry in report.influential:
        for label in EMOTION_LABELS:
            writer.writerow([entry.node, label.value, entry.distribution[label]])
    return out.getvalue()


def outcomes_csv(report: AnalysisReport) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["policy", "flagged_pct", "reduction_pct"])
    for outcome in report.outcomes:
        writer.writerow([outcome.policy.value, flagged_pct(outcome), outcome.reduction_percent])
    return out.getvalue()
