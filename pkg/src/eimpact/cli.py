"""Command-line driver: analyze, simulate, export-dot, synth.

Exit codes: 0 success, 1 stage failure (message names the stage),
2 usage or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .affect import EmotionLabel
from .corpus import serialize_records
from .errors import EImpactError, PipelineStageError, UsageError
from .impact import ImpactWeights
from .pipeline import (
    DOT_FILE,
    OUTCOMES_FILE,
    RunConfig,
    execute,
    export_dot,
    flagged_pct,
    outcomes_csv,
    run_pipeline,
)
from .simulate import PolicyKind, SynthParams, synthesize_conversation
from .toxicity import DEFAULT_API_KEY_ENV, DEFAULT_ENDPOINT, ToxicityConfig


def _add_pipeline_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--input", required=True, help="conversation CSV")
    sub.add_argument("--lexicon", help="emotion lexicon CSV (token,emotion,weight)")
    sub.add_argument("--emoji-map", help="emoji->keyword CSV (emoji,token)")
    sub.add_argument("--scores", help="precomputed emotion scores CSV (id,label,score)")
    sub.add_argument("--toxicity", help="precomputed toxicity CSV (id,value)")
    sub.add_argument("--toxicity-lexicon", help="toxicity lexicon CSV (token,weight)")
    sub.add_argument(
        "--toxicity-provider",
        choices=["offline", "remote", "precomputed"],
        default="offline",
    )
    sub.add_argument("--tox-threshold", type=float, default=0.9)
    sub.add_argument("--weights", help="impact weights as a,b,g,lambda")
    sub.add_argument("--include-root", action="store_true", help="aggregate over the root too")
    sub.add_argument(
        "--policy",
        choices=[k.value for k in PolicyKind],
        default=PolicyKind.COMBINED.value,
        help="policy whose frozen set annotates the DOT export",
    )
    sub.add_argument("--cadence", type=int, default=25, help="re-evaluate flags every k arrivals")
    sub.add_argument("--freeze-root-allowed", action="store_true")
    sub.add_argument("--drilldown-depth", type=int, default=2)
    sub.add_argument("--lang-allow", default="en", help="comma-separated language allow list")
    sub.add_argument("--api-key-env", default=DEFAULT_API_KEY_ENV)
    sub.add_argument("--endpoint", default=DEFAULT_ENDPOINT)
    sub.add_argument("--max-retries", type=int, default=3)
    sub.add_argument("--request-interval", type=float, default=1.0)
    sub.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eimpact",
        description="Conversation emotion propagation, influential nodes, and freeze simulation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="full pipeline: report, DOT, series CSVs")
    _add_pipeline_args(analyze)

    simulate = sub.add_parser("simulate", help="replay freeze policies, write outcomes only")
    _add_pipeline_args(simulate)

    dot = sub.add_parser("export-dot", help="write only the DOT rendering")
    _add_pipeline_args(dot)

    synth = sub.add_parser("synth", help="generate a synthetic conversation CSV trio")
    synth.add_argument("--out", required=True, help="output directory")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--max-nodes", type=int, default=100)
    synth.add_argument("--branching", type=float, default=1.0)
    synth.add_argument("--anger-multiplier", type=float, default=1.0)
    synth.add_argument("--toxic-given-anger", type=float, default=0.1)
    synth.add_argument("--toxic-given-other", type=float, default=0.02)
    synth.add_argument("--emotion-mix", help="label=weight pairs, e.g. anger=2,joy=1")
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    try:
        weights = (
            ImpactWeights.parse(args.weights, args.include_root)
            if args.weights
            else ImpactWeights(include_root=args.include_root)
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    try:
        toxicity = ToxicityConfig(
            threshold=args.tox_threshold,
            provider=args.toxicity_provider,
            endpoint=args.endpoint,
            api_key_env=args.api_key_env,
            max_retries=args.max_retries,
            request_interval=args.request_interval,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if toxicity.provider == "remote" and not os.environ.get(toxicity.api_key_env):
        raise UsageError(f"remote provider needs an API key in ${toxicity.api_key_env}")
    lang_allow = frozenset(
        part.strip() for part in args.lang_allow.split(",") if part.strip()
    )
    config = RunConfig(
        input_path=Path(args.input),
        out_dir=Path(args.out),
        lexicon_path=Path(args.lexicon) if args.lexicon else None,
        emoji_map_path=Path(args.emoji_map) if args.emoji_map else None,
        scores_path=Path(args.scores) if args.scores else None,
        toxicity_path=Path(args.toxicity) if args.toxicity else None,
        toxicity_lexicon_path=Path(args.toxicity_lexicon) if args.toxicity_lexicon else None,
        toxicity=toxicity,
        weights=weights,
        evaluation_cadence=args.cadence,
        freeze_root_allowed=args.freeze_root_allowed,
        drilldown_depth=args.drilldown_depth,
        lang_allow=lang_allow,
        dot_policy=PolicyKind(args.policy),
    )
    config.validate()
    return config


def _parse_emotion_mix(spec: str) -> dict[EmotionLabel, float]:
    mix: dict[EmotionLabel, float] = {}
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            name, value = part.split("=", 1)
            mix[EmotionLabel(name.strip().lower())] = float(value)
        except ValueError as exc:
            raise UsageError(f"bad emotion mix entry {part!r}") from exc
    return mix


def _cmd_analyze(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    run_pipeline(config)
    print(f"wrote analysis outputs to {config.out_dir}")
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    result = execute(config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / OUTCOMES_FILE).write_text(outcomes_csv(result.report), encoding="utf-8")
    payload = [
        {
            "policy": o.policy.value,
            "baseline_toxic": o.baseline_toxic,
            "retained_toxic": o.retained_toxic,
            "suppressed": o.suppressed,
            "frozen": sorted(o.frozen),
            "flagged_pct": flagged_pct(o),
            "reduction_percent": o.reduction_percent,
        }
        for o in result.outcomes
    ]
    (out_dir / "outcomes.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    print(f"wrote outcomes to {out_dir}")
    return 0


def _cmd_export_dot(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    result = execute(config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    frozen = result.frozen_for(config.dot_policy)
    text = export_dot(result.graph, result.board, result.influential, frozen)
    (out_dir / DOT_FILE).write_text(text, encoding="utf-8")
    print(f"wrote {out_dir / DOT_FILE}")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    try:
        params = SynthParams(
            seed=args.seed,
            max_nodes=args.max_nodes,
            base_branching=args.branching,
            emotion_mix=_parse_emotion_mix(args.emotion_mix) if args.emotion_mix else None,
            anger_multiplier=args.anger_multiplier,
            toxic_given_anger=args.toxic_given_anger,
            toxic_given_other=args.toxic_given_other,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    conversation, scores, toxicity = synthesize_conversation(params)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "conversation.csv").write_text(
        serialize_records(conversation.records), encoding="utf-8"
    )
    score_lines = ["id,label,score"]
    for r in conversation.records:
        s = scores[r.id]
        score_lines.append(f"{r.id},{s.label.value},{s.score}")
    (out_dir / "scores.csv").write_text("\n".join(score_lines) + "\n", encoding="utf-8")
    tox_lines = ["id,value"]
    for r in conversation.records:
        tox_lines.append(f"{r.id},{toxicity[r.id]}")
    (out_dir / "toxicity.csv").write_text("\n".join(tox_lines) + "\n", encoding="utf-8")
    print(f"wrote {len(conversation.records)} synthetic records to {out_dir}")
    return 0


_COMMANDS = {
    "analyze": _cmd_analyze,
    "simulate": _cmd_simulate,
    "export-dot": _cmd_export_dot,
    "synth": _cmd_synth,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PipelineStageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except EImpactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
