"""Six-class emotion scoring with a pluggable scorer contract.

A scorer is any deterministic ``text -> EmotionScore`` callable. The
package ships two: a lexicon baseline (weighted bag-of-words over a
token->emotion weight table, emoji mapped to keywords first) and a
loader for precomputed per-node labels. Nodes with no lexical evidence
stay unscored and contribute zero emotional mass downstream.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import IO, Callable, Iterable, Mapping

from .errors import MalformedRow, MissingColumn, UnknownLabel

logger = logging.getLogger(__name__)


class EmotionLabel(str, Enum):
    ANGER = "anger"
    FEAR = "fear"
    JOY = "joy"
    LOVE = "love"
    SADNESS = "sadness"
    SURPRISE = "surprise"


#: All six labels in ascending name order (argmax tie-break order).
EMOTION_LABELS: tuple[EmotionLabel, ...] = tuple(sorted(EmotionLabel, key=lambda e: e.value))


@dataclass(frozen=True)
class EmotionScore:
    """Label plus the probability it was assigned with.

    ``scored=False`` means no evidence: label is None and score is 0.
    """

    label: EmotionLabel | None
    score: float
    scored: bool

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score out of range: {self.score}")
        if not self.scored and self.score != 0.0:
            raise ValueError("unscored entries must carry score 0")


UNSCORED = EmotionScore(None, 0.0, False)

Scorer = Callable[[str], EmotionScore]


@dataclass
class EmotionLexicon:
    """Token->emotion weight table plus an emoji->keyword map."""

    entries: dict[str, dict[EmotionLabel, float]] = field(default_factory=dict)
    emoji_map: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for token, weights in self.entries.items():
            for label, w in weights.items():
                if not math.isfinite(w) or w < 0:
                    raise ValueError(f"bad weight for {token!r}/{label.value}: {w}")


# ── tokenizer ─────────────────────────────────────────────────────────

_EMOJI_CHAR = "[\U0001F000-\U0001FAFF☀-➿⬀-⯿←-⇿⌀-⏿]"
_EMOJI_MOD = "[️\U0001F3FB-\U0001F3FF]"
_TOKEN_RE = re.compile(
    r"(?P<url>https?://\S+|www\.\S+)"
    r"|(?P<mention>@\w+)"
    rf"|(?P<emoji>{_EMOJI_CHAR}{_EMOJI_MOD}?(?:‍{_EMOJI_CHAR}{_EMOJI_MOD}?)*)"
    r"|(?P<hashtag>#\w+)"
    r"|(?P<word>[^\W_]+(?:'[^\W_]+)*)"
)


def tokenize(text: str) -> list[str]:
    """Lowercase and split into word/hashtag/emoji tokens.

    URLs and @-mentions are stripped, hashtags keep their ``#`` prefix,
    intra-word apostrophes are preserved, and each emoji (including
    modifier/ZWJ sequences) becomes its own token.
    """
    lowered = text.lower().replace("’", "'")
    tokens = []
    for m in _TOKEN_RE.finditer(lowered):
        kind = m.lastgroup
        if kind in ("emoji", "hashtag", "word"):
            tokens.append(m.group())
    return tokens


# ── lexicon scoring ───────────────────────────────────────────────────


def lexicon_score(tokens: Iterable[str], lexicon: EmotionLexicon) -> EmotionScore:
    """Score a token bag against the lexicon.

    Emoji tokens are first mapped through the emoji map. The label is
    the argmax of per-emotion weight sums (ties broken by label name
    ascending) and the score is that sum's share of the total. With no
    matched tokens the result is unscored.
    """
    sums = {label: 0.0 for label in EMOTION_LABELS}
    for token in tokens:
        token = lexicon.emoji_map.get(token, token)
        weights = lexicon.entries.get(token)
        if weights:
            for label, w in weights.items():
                sums[label] += w
    total = sum(sums.values())
    if total == 0.0:
        return UNSCORED
    best = min(EMOTION_LABELS, key=lambda e: (-sums[e], e.value))
    return EmotionScore(best, sums[best] / total, True)


def score_text(text: str, lexicon: EmotionLexicon) -> EmotionScore:
    return lexicon_score(tokenize(text), lexicon)


def make_lexicon_scorer(lexicon: EmotionLexicon) -> Scorer:
    return lambda text: score_text(text, lexicon)


# ── file loaders ──────────────────────────────────────────────────────


def _reader(source: IO[str] | str | Path):
    if isinstance(source, (str, Path)):
        source = open(source, "r", encoding="utf-8", newline="")
    return csv.reader(source)


def _header_index(reader, required: tuple[str, ...]) -> dict[str, int]:
    try:
        header = next(reader)
    except StopIteration:
        raise MissingColumn(required[0]) from None
    index = {name.strip(): i for i, name in enumerate(header)}
    for name in required:
        if name not in index:
            raise MissingColumn(name)
    return index


def load_lexicon(
    source: IO[str] | str | Path,
    emoji_map: Mapping[str, str] | None = None,
) -> EmotionLexicon:
    """Load a lexicon CSV with columns ``token,emotion,weight``.

    Duplicate (token, emotion) rows accumulate additively.
    """
    reader = _reader(source)
    index = _header_index(reader, ("token", "emotion", "weight"))
    entries: dict[str, dict[EmotionLabel, float]] = {}
    for row in reader:
        if not row:
            continue
        line = reader.line_num
        if len(row) <= max(index.values()):
            raise MalformedRow(line, "too few fields")
        token = row[index["token"]].strip().lower()
        raw_label = row[index["emotion"]].strip().lower()
        try:
            label = EmotionLabel(raw_label)
        except ValueError:
            raise UnknownLabel(raw_label) from None
        try:
            weight = float(row[index["weight"]])
        except ValueError:
            raise MalformedRow(line, f"bad weight {row[index['weight']]!r}") from None
        if not math.isfinite(weight) or weight < 0:
            raise MalformedRow(line, f"weight out of range: {weight}")
        entries.setdefault(token, {}).setdefault(label, 0.0)
        entries[token][label] += weight
    return EmotionLexicon(entries, dict(emoji_map or {}))


def load_emoji_map(source: IO[str] | str | Path) -> dict[str, str]:
    """Load an emoji->keyword CSV with columns ``emoji,token``."""
    reader = _reader(source)
    index = _header_index(reader, ("emoji", "token"))
    mapping: dict[str, str] = {}
    for row in reader:
        if not row:
            continue
        if len(row) <= max(index.values()):
            raise MalformedRow(reader.line_num, "too few fields")
        emoji = row[index["emoji"]].strip()
        target = row[index["token"]].strip().lower()
        if not emoji or not target:
            raise MalformedRow(reader.line_num, "empty emoji or token")
        mapping[emoji] = target
    return mapping


def load_precomputed_scores(source: IO[str] | str | Path) -> dict[str, EmotionScore]:
    """Load precomputed per-node scores from a CSV ``id,label,score``.

    Labels must belong to the six-class set; out-of-range scores are
    clamped to [0, 1] with a logged warning.
    """
    reader = _reader(source)
    index = _header_index(reader, ("id", "label", "score"))
    scores: dict[str, EmotionScore] = {}
    for row in reader:
        if not row:
            continue
        line = reader.line_num
        if len(row) <= max(index.values()):
            raise MalformedRow(line, "too few fields")
        node_id = row[index["id"]].strip()
        raw_label = row[index["label"]].strip().lower()
        try:
            label = EmotionLabel(raw_label)
        except ValueError:
            raise UnknownLabel(raw_label) from None
        try:
            value = float(row[index["score"]])
        except ValueError:
            raise MalformedRow(line, f"bad score {row[index['score']]!r}") from None
        if not math.isfinite(value):
            raise MalformedRow(line, f"bad score {value!r}")
        if value < 0.0 or value > 1.0:
            clamped = min(1.0, max(0.0, value))
            logger.warning(
                "score %s for node %s outside [0,1]; clamped to %s", value, node_id, clamped
            )
            value = clamped
        scores[node_id] = EmotionScore(label, value, True)
    return scores


def score_records(
    records: Iterable,
    scorer: Scorer | None = None,
    precomputed: Mapping[str, EmotionScore] | None = None,
) -> dict[str, EmotionScore]:
    """Assign a score to every record.

    Precomputed entries win; remaining records go through the scorer,
    or stay unscored when no scorer is given.
    """
    precomputed = precomputed or {}
    out: dict[str, EmotionScore] = {}
    for r in records:
        if r.id in precomputed:
            out[r.id] = precomputed[r.id]
        elif scorer is not None:
            out[r.id] = scorer(r.text)
        else:
            out[r.id] = UNSCORED
    return out
