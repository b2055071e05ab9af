"""Parse, validate, and link raw conversation CSV exports.

A conversation file is a UTF-8 CSV (RFC 4180 quoting) with one row per
post. Required columns: ``author_id, conversation_id, created_at, id,
in_reply_to_user_id, lang, text``. Optional columns: ``parent_id`` (an
explicit reply link, authoritative when present) and ``entities``.
Unknown columns are ignored and column order is irrelevant.

Record text is kept raw here; tokenization and normalization belong to
the affect module.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Iterable

from .errors import DuplicateId, MalformedRow, MissingColumn, MultipleRoots, NoRoot

REQUIRED_COLUMNS = (
    "author_id",
    "conversation_id",
    "created_at",
    "id",
    "in_reply_to_user_id",
    "lang",
    "text",
)
OPTIONAL_COLUMNS = ("parent_id", "entities")

# Drop / link-discard reason codes (these appear in the dropped-record
# report CSV `id,reason`).
LANG_FILTERED = "LangFiltered"
EMPTY_TEXT = "EmptyText"
MEDIA_ONLY = "MediaOnly"
ORPHAN_PARENT = "OrphanParent"
SELF_LOOP_DROPPED = "SelfLoopDropped"

_URL_RE = re.compile(r"(?:https?://\S+|www\.\S+|\bpic\.twitter\.com/\S+|\bt\.co/\S+)")

DEFAULT_LANG_ALLOW = frozenset({"en"})


@dataclass(frozen=True)
class ConversationRecord:
    """One row of a conversation export."""

    id: str
    conversation_id: str
    author_id: str
    created_at: datetime
    in_reply_to_user_id: str | None
    lang: str
    text: str
    parent_id: str | None = None
    entities: str | None = None

    def sort_key(self) -> tuple[datetime, str]:
        return (self.created_at, self.id)


@dataclass
class Conversation:
    """A root post and its linked replies, in deterministic replay order.

    ``records`` are sorted by (created_at, id) ascending; ``dropped``
    lists every record drop and link discard as ``(record id, reason)``.
    ``SelfLoopDropped`` entries report a discarded self-referential
    parent link; the record itself is retained and re-linked.
    """

    conversation_id: str
    records: list[ConversationRecord]
    dropped: list[tuple[str, str]] = field(default_factory=list)


def parse_timestamp(value: str) -> datetime:
    """Parse an RFC 3339 timestamp; naive values are taken as UTC."""
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt


def _open_text(source: IO[bytes] | IO[str] | str | Path) -> IO[str]:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8", newline="")
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8", newline="")


def parse_records(source: IO[bytes] | IO[str] | str | Path) -> list[ConversationRecord]:
    """Parse conversation records from a CSV path or open stream.

    Raises MissingColumn if a required header is absent, MalformedRow on
    wrong arity, an unparseable timestamp, or an empty id, and
    DuplicateId if two rows share an id.
    """
    stream = _open_text(source)
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise MissingColumn(REQUIRED_COLUMNS[0]) from None

    index = {name.strip(): i for i, name in enumerate(header)}
    for name in REQUIRED_COLUMNS:
        if name not in index:
            raise MissingColumn(name)

    records: list[ConversationRecord] = []
    seen: set[str] = set()
    for row in reader:
        if not row:
            continue
        line = reader.line_num
        if len(row) != len(header):
            raise MalformedRow(line, f"expected {len(header)} fields, got {len(row)}")

        def cell(name: str) -> str:
            i = index.get(name)
            return row[i] if i is not None else ""

        record_id = cell("id").strip()
        if not record_id:
            raise MalformedRow(line, "empty id")
        if record_id in seen:
            raise DuplicateId(record_id)
        seen.add(record_id)

        try:
            created_at = parse_timestamp(cell("created_at"))
        except ValueError:
            raise MalformedRow(line, f"bad timestamp {cell('created_at')!r}") from None

        records.append(
            ConversationRecord(
                id=record_id,
                conversation_id=cell("conversation_id").strip(),
                author_id=cell("author_id").strip(),
                created_at=created_at,
                in_reply_to_user_id=cell("in_reply_to_user_id").strip() or None,
                lang=cell("lang").strip(),
                text=cell("text"),
                parent_id=cell("parent_id").strip() or None,
                entities=cell("entities") or None,
            )
        )
    return records


def serialize_records(records: Iterable[ConversationRecord]) -> str:
    """Write records back to CSV text; inverse of parse_records."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(REQUIRED_COLUMNS + OPTIONAL_COLUMNS)
    for r in records:
        writer.writerow(
            [
                r.author_id,
                r.conversation_id,
                r.created_at.isoformat(),
                r.id,
                r.in_reply_to_user_id or "",
                r.lang,
                r.text,
                r.parent_id or "",
                r.entities or "",
            ]
        )
    return out.getvalue()


def _strip_urls(text: str) -> str:
    return _URL_RE.sub(" ", text)


def filter_records(
    records: Iterable[ConversationRecord],
    lang_allow: frozenset[str] | set[str] = DEFAULT_LANG_ALLOW,
) -> tuple[list[ConversationRecord], list[tuple[str, str]]]:
    """Drop non-allowed-language, empty, and media-only records.

    Returns (kept, dropped); dropped entries are (id, reason) and the
    two lists always partition the input. Filtering never raises.
    """
    kept: list[ConversationRecord] = []
    dropped: list[tuple[str, str]] = []
    for r in records:
        if r.lang not in lang_allow:
            dropped.append((r.id, LANG_FILTERED))
        elif not r.text.strip():
            dropped.append((r.id, EMPTY_TEXT))
        elif not _strip_urls(r.text).strip():
            dropped.append((r.id, MEDIA_ONLY))
        else:
            kept.append(r)
    return kept, dropped


def resolve_parents(
    records: list[ConversationRecord],
) -> tuple[dict[str, str], list[tuple[str, str]]]:
    """Map every non-root record to its parent id.

    Precedence: (1) the explicit parent_id column when it names a kept
    record; (2) the most recent earlier record authored by
    in_reply_to_user_id; (3) the root. Records whose explicit parent_id
    names a missing record are dropped as orphans (cascading). A
    parent_id equal to the record's own id is discarded (reported as
    SelfLoopDropped) and the record falls through to the fallbacks.

    Returns (parents, dropped). Raises NoRoot / MultipleRoots when root
    identification fails.
    """
    ordered = sorted(records, key=ConversationRecord.sort_key)
    if not ordered:
        raise NoRoot()
    conversation_id = ordered[0].conversation_id

    dropped: list[tuple[str, str]] = []
    explicit: dict[str, str] = {}
    for r in ordered:
        if r.parent_id is None:
            continue
        if r.parent_id == r.id:
            dropped.append((r.id, SELF_LOOP_DROPPED))
        else:
            explicit[r.id] = r.parent_id

    root_id = _find_root(ordered, explicit, conversation_id)

    # Orphan fixpoint: an explicit parent link must land on a kept record.
    kept_ids = {r.id for r in ordered}
    changed = True
    while changed:
        changed = False
        for rid, pid in list(explicit.items()):
            if rid == root_id:
                continue
            if pid not in kept_ids:
                kept_ids.discard(rid)
                del explicit[rid]
                dropped.append((rid, ORPHAN_PARENT))
                changed = True

    by_author: dict[str, list[ConversationRecord]] = {}
    parents: dict[str, str] = {}
    for r in ordered:
        if r.id in kept_ids and r.id != root_id:
            if r.id in explicit:
                parents[r.id] = explicit[r.id]
            else:
                parent = None
                if r.in_reply_to_user_id:
                    candidates = by_author.get(r.in_reply_to_user_id, [])
                    if candidates:
                        parent = candidates[-1].id
                parents[r.id] = parent if parent is not None else root_id
        # Earlier-record index is built in sorted order, so lookups above
        # only ever see strictly earlier kept records.
        if r.id in kept_ids:
            by_author.setdefault(r.author_id, []).append(r)

    return parents, dropped


def _find_root(
    ordered: list[ConversationRecord],
    explicit: dict[str, str],
    conversation_id: str,
) -> str:
    for r in ordered:
        if r.id == conversation_id:
            return r.id
    # No record carries the conversation id: the root is the unique record
    # with no reply indicia at all (no parent link, no replied-to user).
    candidates = [
        r.id for r in ordered if r.id not in explicit and not r.in_reply_to_user_id
    ]
    if not candidates:
        raise NoRoot(conversation_id)
    if len(candidates) > 1:
        raise MultipleRoots(candidates)
    return candidates[0]


def link_conversation(
    records: list[ConversationRecord],
    lang_allow: frozenset[str] | set[str] = DEFAULT_LANG_ALLOW,
) -> tuple[Conversation, dict[str, str]]:
    """Filter, resolve, and assemble one conversation.

    Returns the Conversation (records sorted, drops recorded) together
    with the resolved child->parent map.
    """
    kept, dropped = filter_records(records, lang_allow)
    parents, link_dropped = resolve_parents(kept)
    dropped = dropped + link_dropped
    removed = {rid for rid, reason in link_dropped if reason == ORPHAN_PARENT}
    surviving = [r for r in kept if r.id not in removed]
    surviving.sort(key=ConversationRecord.sort_key)
    conversation_id = surviving[0].conversation_id if surviving else ""
    return Conversation(conversation_id, surviving, dropped), parents


def group_by_conversation(
    records: Iterable[ConversationRecord],
) -> dict[str, list[ConversationRecord]]:
    groups: dict[str, list[ConversationRecord]] = {}
    for r in records:
        groups.setdefault(r.conversation_id, []).append(r)
    return groups


def write_dropped_report(dropped: Iterable[tuple[str, str]]) -> str:
    """Dropped-record report CSV: columns id,reason."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["id", "reason"])
    for rid, reason in dropped:
        writer.writerow([rid, reason])
    return out.getvalue()
