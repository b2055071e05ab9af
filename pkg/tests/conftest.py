from __future__ import annotations

import json
import random
import threading
import time
from datetime import datetime, timedelta, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from eimpact.affect import EmotionLabel, EmotionScore
from eimpact.corpus import Conversation, ConversationRecord
from eimpact.graph import ConversationGraph

EPOCH = datetime(2024, 1, 1, tzinfo=timezone.utc)


def make_record(
    rid: str,
    conversation_id: str = "c1",
    offset: int = 0,
    author: str | None = None,
    reply_to_user: str | None = None,
    parent: str | None = None,
    lang: str = "en",
    text: str = "hello world",
    entities: str | None = None,
) -> ConversationRecord:
    return ConversationRecord(
        id=rid,
        conversation_id=conversation_id,
        author_id=author or f"author-{rid}",
        created_at=EPOCH + timedelta(seconds=offset),
        in_reply_to_user_id=reply_to_user,
        lang=lang,
        text=text,
        parent_id=parent,
        entities=entities,
    )


def graph_from_parents(
    parents: dict[str, str],
    root: str,
    scores: dict[str, EmotionScore] | None = None,
) -> ConversationGraph:
    return ConversationGraph.from_parent_map([root, *parents.keys()], parents, scores)


def scored(label: EmotionLabel, value: float = 0.9) -> EmotionScore:
    return EmotionScore(label, value, True)


def conversation_from_parents(
    parents: dict[str, str], root: str, conversation_id: str | None = None
) -> Conversation:
    """Records in arrival order: root first, then children sorted by id."""
    cid = conversation_id or root
    order = [root] + sorted(parents)
    records = [
        make_record(rid, conversation_id=cid, offset=i, parent=parents.get(rid))
        for i, rid in enumerate(order)
    ]
    return Conversation(cid, records, [])


def random_tree_parents(rng: random.Random, n: int, prefix: str = "v") -> dict[str, str]:
    """Random recursive tree: node i attaches to a uniform earlier node."""
    ids = [f"{prefix}{i:03d}" for i in range(n)]
    return {ids[i]: ids[rng.randrange(i)] for i in range(1, n)}


@pytest.fixture
def worked_example_graph() -> ConversationGraph:
    """Root 1 with direct replies 2 and 3; node 3 carries a 5-node reply
    tree with three direct responses; node 7 is the deepest node."""
    parents = {
        "2": "1",
        "3": "1",
        "4": "3",
        "5": "3",
        "6": "3",
        "8": "6",
        "7": "8",
    }
    return graph_from_parents(parents, "1")


# ── local HTTP stub for the remote toxicity scorer ────────────────────


class StubHandler(BaseHTTPRequestHandler):
    """Scripted responses; records request timestamps, bodies, queries."""

    def do_POST(self):
        server = self.server
        server.timestamps.append(time.monotonic())
        length = int(self.headers.get("Content-Length", 0))
        server.bodies.append(json.loads(self.rfile.read(length) or b"{}"))
        server.queries.append(self.path)
        step = server.script[min(len(server.timestamps) - 1, len(server.script) - 1)]
        kind = step[0]
        if kind == "ok":
            payload = json.dumps(
                {"attributeScores": {"TOXICITY": {"summaryScore": {"value": step[1]}}}}
            ).encode()
            self.send_response(200)
        elif kind == "status":
            self.send_response(step[1])
            payload = b"{}"
        elif kind == "badjson":
            self.send_response(200)
            payload = b"this is not json"
        elif kind == "missing":
            self.send_response(200)
            payload = json.dumps({"attributeScores": {}}).encode()
        elif kind == "slow":
            time.sleep(step[1])
            self.send_response(200)
            payload = json.dumps(
                {"attributeScores": {"TOXICITY": {"summaryScore": {"value": 0.5}}}}
            ).encode()
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), StubHandler)
    server.script = [("ok", 0.73)]
    server.timestamps = []
    server.bodies = []
    server.queries = []
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield server
    finally:
        server.shutdown()
        server.server_close()
