"""Conversation-graph emotion propagation and toxicity intervention toolkit."""

from .affect import (
    EMOTION_LABELS,
    EmotionLabel,
    EmotionLexicon,
    EmotionScore,
    UNSCORED,
    lexicon_score,
    load_emoji_map,
    load_lexicon,
    load_precomputed_scores,
    make_lexicon_scorer,
    score_text,
    tokenize,
)
from .corpus import (
    Conversation,
    ConversationRecord,
    filter_records,
    group_by_conversation,
    link_conversation,
    parse_records,
    resolve_parents,
    serialize_records,
)
from .graph import (
    ConversationGraph,
    NodeMetrics,
    WienerIndex,
    build_graph,
    compute_metrics,
    pagerank,
    power_iteration,
    wiener_index,
)
from .impact import (
    EmotionBoard,
    ImpactWeights,
    InfluentialSet,
    NodeImpact,
    compute_impacts,
    distribution_shift,
    drilldown,
    emotion_board,
    influential_nodes,
    node_impact,
    raw_label_distribution,
    tree_emotion_distribution,
)
from .pipeline import (
    AnalysisReport,
    RunConfig,
    canonicalize_report,
    emit_series,
    execute,
    export_dot,
    run_pipeline,
)
from .simulate import (
    InterventionOutcome,
    Policy,
    PolicyKind,
    SynthParams,
    compare_policies,
    replay_with_policy,
    synthesize_conversation,
)
from .toxicity import (
    CombinedResult,
    RemoteToxicityScorer,
    ToxicityConfig,
    ToxicityScore,
    combined_influential,
    load_precomputed_toxicity,
    load_toxicity_lexicon,
    offline_toxicity_score,
    remote_toxicity_score,
    toxic_nodes,
    toxicity_concentration,
)

__version__ = "0.1.0"
