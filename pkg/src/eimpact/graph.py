"""Conversation graph: reply structure, node attributes, Wiener index.

Edges point child -> parent, so a comment with n direct responses has
in-degree n. The graph is immutable after construction; every metric
here is a read-only pass over it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .affect import UNSCORED, EmotionScore
from .corpus import Conversation, ConversationRecord
from .errors import CycleDetected, MultipleRoots, NodeNotFound, NoRoot

logger = logging.getLogger(__name__)

PAGERANK_DAMPING = 0.85
PAGERANK_EPS = 1e-8
PAGERANK_MAX_ITER = 100


@dataclass(frozen=True)
class NodeMetrics:
    """Structural attributes of one node plus its emotion probability."""

    direct_responses: int
    engagement: int
    depth: int
    pagerank: float
    emotion_score: float


@dataclass(frozen=True)
class WienerIndex:
    """Average pairwise shortest-path distance of a reply tree."""

    value: float
    n: int


class ConversationGraph:
    """Reply tree G = (V, E, A): nodes, child->parent edges, root.

    Use :func:`build_graph` or :meth:`from_parent_map` to construct;
    the initializer trusts its inputs.
    """

    def __init__(
        self,
        root: str,
        parent: dict[str, str],
        scores: dict[str, EmotionScore],
        records: dict[str, ConversationRecord] | None = None,
    ):
        self.root = root
        self.parent = parent
        self.scores = scores
        self.records = records or {}
        self.nodes: tuple[str, ...] = tuple(sorted([root, *parent.keys()]))
        children: dict[str, list[str]] = {v: [] for v in self.nodes}
        for child in self.nodes:
            p = parent.get(child)
            if p is not None:
                children[p].append(child)
        for v in children:
            children[v].sort()
        self.children = children

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, node_id: str) -> bool:
        return node_id in self.children

    @property
    def edge_count(self) -> int:
        return len(self.parent)

    def score_of(self, node_id: str) -> EmotionScore:
        return self.scores.get(node_id, UNSCORED)

    def bfs_order(self, start: str | None = None) -> list[str]:
        """Nodes of the subtree under ``start`` in breadth-first order."""
        start = self.root if start is None else start
        if start not in self:
            raise NodeNotFound(start)
        order = [start]
        i = 0
        while i < len(order):
            order.extend(self.children[order[i]])
            i += 1
        return order

    def subtree_nodes(self, node_id: str) -> list[str]:
        return self.bfs_order(node_id)

    def subgraph(self, node_id: str) -> "ConversationGraph":
        """The reply subtree rooted at ``node_id``, as its own graph."""
        members = set(self.bfs_order(node_id))
        parent = {v: p for v, p in self.parent.items() if v in members and p in members}
        scores = {v: self.scores[v] for v in members if v in self.scores}
        records = {v: self.records[v] for v in members if v in self.records}
        return ConversationGraph(node_id, parent, scores, records)

    @classmethod
    def from_parent_map(
        cls,
        node_ids: Iterable[str],
        parents: Mapping[str, str],
        scores: Mapping[str, EmotionScore] | None = None,
        records: Mapping[str, ConversationRecord] | None = None,
    ) -> "ConversationGraph":
        """Validate a parent relation and build the graph.

        Self-loop entries are discarded. A cyclic relation raises
        CycleDetected; zero or multiple parentless nodes raise NoRoot /
        MultipleRoots. Nodes whose parent chain leaves the node set are
        excluded (unresolved orphans).
        """
        ids = set(node_ids)
        parent = {
            v: p for v, p in parents.items() if v in ids and v != p
        }
        _check_acyclic(ids, parent)

        roots = sorted(v for v in ids if v not in parent)
        if not roots:
            raise NoRoot()
        if len(roots) > 1:
            raise MultipleRoots(roots)
        root = roots[0]

        # Keep only nodes whose chain actually reaches the root.
        reachable = {root}
        pending = sorted(ids - reachable)
        children: dict[str, list[str]] = {}
        for v, p in parent.items():
            children.setdefault(p, []).append(v)
        frontier = [root]
        while frontier:
            nxt = []
            for v in frontier:
                for c in children.get(v, ()):
                    if c not in reachable:
                        reachable.add(c)
                        nxt.append(c)
            frontier = nxt
        parent = {v: p for v, p in parent.items() if v in reachable}
        scores = scores or {}
        records = records or {}
        return cls(
            root,
            parent,
            {v: scores[v] for v in reachable if v in scores},
            {v: records[v] for v in reachable if v in records},
        )


def _check_acyclic(ids: set[str], parent: Mapping[str, str]) -> None:
    state: dict[str, int] = {}
    for start in ids:
        if state.get(start) == 2:
            continue
        path: list[str] = []
        cur = start
        while cur in ids:
            s = state.get(cur)
            if s == 2:
                break
            if s == 1:
                raise CycleDetected(path[path.index(cur):])
            state[cur] = 1
            path.append(cur)
            if cur not in parent:
                break
            cur = parent[cur]
        for v in path:
            state[v] = 2


def build_graph(
    conversation: Conversation,
    parents: Mapping[str, str],
    scores: Mapping[str, EmotionScore] | None = None,
) -> ConversationGraph:
    """Assemble the conversation graph from linked records.

    Records without a score entry default to unscored.
    """
    records = {r.id: r for r in conversation.records}
    return ConversationGraph.from_parent_map(records.keys(), parents, scores, records)


# ── structural metrics ────────────────────────────────────────────────


def compute_metrics(
    graph: ConversationGraph,
    damping: float = PAGERANK_DAMPING,
    eps: float = PAGERANK_EPS,
    max_iter: int = PAGERANK_MAX_ITER,
) -> dict[str, NodeMetrics]:
    """In-degree, reply-subtree size, depth, PageRank, emotion score."""
    order = graph.bfs_order()
    depth = {graph.root: 0}
    for v in order[1:]:
        depth[v] = depth[graph.parent[v]] + 1

    subtree = {v: 1 for v in order}
    for v in reversed(order):
        p = graph.parent.get(v)
        if p is not None:
            subtree[p] += subtree[v]

    ranks = pagerank(graph, damping, eps, max_iter)
    return {
        v: NodeMetrics(
            direct_responses=len(graph.children[v]),
            engagement=subtree[v] - 1,
            depth=depth[v],
            pagerank=ranks[v],
            emotion_score=graph.score_of(v).score,
        )
        for v in graph.nodes
    }


# ── PageRank ──────────────────────────────────────────────────────────


def power_iteration(
    nodes: Sequence[str],
    edges: Iterable[tuple[str, str]],
    damping: float = PAGERANK_DAMPING,
    eps: float = PAGERANK_EPS,
    max_iter: int = PAGERANK_MAX_ITER,
) -> dict[str, float]:
    """PageRank over an arbitrary edge list.

    Dangling nodes redistribute their mass uniformly over all nodes;
    iteration stops when the L1 change drops below ``eps``. On
    non-convergence the last iterate is returned with a logged warning.
    """
    if not 0.0 < damping < 1.0:
        raise ValueError(f"damping must be in (0, 1): {damping}")
    n = len(nodes)
    if n == 0:
        return {}
    index = {v: i for i, v in enumerate(nodes)}
    src = []
    dst = []
    out_deg = np.zeros(n)
    for s, d in edges:
        src.append(index[s])
        dst.append(index[d])
        out_deg[index[s]] += 1
    src_idx = np.asarray(src, dtype=np.intp)
    dst_idx = np.asarray(dst, dtype=np.intp)
    dangling = out_deg == 0
    safe_deg = np.where(dangling, 1.0, out_deg)

    rank = np.full(n, 1.0 / n)
    converged = False
    for _ in range(max_iter):
        contrib = rank / safe_deg
        nxt = np.full(n, (1.0 - damping) / n)
        if len(src_idx):
            np.add.at(nxt, dst_idx, damping * contrib[src_idx])
        nxt += damping * rank[dangling].sum() / n
        delta = np.abs(nxt - rank).sum()
        rank = nxt
        if delta < eps:
            converged = True
            break
    if not converged:
        logger.warning("pagerank did not converge within %d iterations", max_iter)
    return {v: float(rank[index[v]]) for v in nodes}


def pagerank(
    graph: ConversationGraph,
    damping: float = PAGERANK_DAMPING,
    eps: float = PAGERANK_EPS,
    max_iter: int = PAGERANK_MAX_ITER,
) -> dict[str, float]:
    """PageRank on the child->parent edge direction; sums to 1."""
    edges = [(v, p) for v, p in sorted(graph.parent.items())]
    return power_iteration(graph.nodes, edges, damping, eps, max_iter)


# ── Wiener index ──────────────────────────────────────────────────────


def wiener_index(graph: ConversationGraph, subtree_root: str | None = None) -> WienerIndex:
    """Average pairwise distance over the undirected reply subtree.

    Computed exactly from per-edge contributions: an edge splitting the
    tree into parts of size s and N-s lies on s*(N-s) unordered paths.
    Returns 0 for trees with a single node.
    """
    subtree_root = graph.root if subtree_root is None else subtree_root
    order = graph.bfs_order(subtree_root)
    n = len(order)
    if n <= 1:
        return WienerIndex(0.0, n)
    members = set(order)
    size = {v: 1 for v in order}
    total = 0
    for v in reversed(order):
        p = graph.parent.get(v)
        if p is not None and p in members and v != subtree_root:
            total += size[v] * (n - size[v])
            size[p] += size[v]
    return WienerIndex(2.0 * total / (n * (n - 1)), n)
