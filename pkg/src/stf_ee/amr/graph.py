"""AMR graph structures and queries: alignment, shortest paths, path serialization.

Graphs are directed and labeled, but path search treats edges as undirected
because a trigger may sit above or below its argument in the tree. All
functions here are pure; nothing mutates a graph in place except the
explicitly-named noise injector in the corpus module, which copies first.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from ..errors import UnknownNode
from .relations import RelationGroup, group_relation

FALLBACK_EDGE_ID = "~fallback"


@dataclass(frozen=True)
class AmrNode:
    """A graph node: concept label plus optional half-open token interval."""

    id: str
    concept: str
    token_span: tuple[int, int] | None = None

    def __post_init__(self):
        if self.token_span is not None:
            start, end = self.token_span
            if not 0 <= start < end:
                raise ValueError(f"bad token span {self.token_span} on node {self.id}")


@dataclass(frozen=True)
class AmrEdge:
    """A directed edge. Inverse '-of' relations are normalized at parse time,
    so raw_relation always names the base relation and group matches it."""

    src: str
    dst: str
    raw_relation: str
    group: RelationGroup = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "group", group_relation(self.raw_relation))


@dataclass(frozen=True)
class AmrGraph:
    nodes: tuple[AmrNode, ...]
    edges: tuple[AmrEdge, ...]
    root: str

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate node ids")
        known = set(ids)
        for e in self.edges:
            if e.src not in known or e.dst not in known:
                raise ValueError(f"edge {e.raw_relation} references unknown node")
        if self.root not in known:
            raise ValueError(f"root {self.root} not among nodes")

    def node(self, node_id: str) -> AmrNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise UnknownNode(node_id)

    def has_node(self, node_id: str) -> bool:
        return any(n.id == node_id for n in self.nodes)

    def with_spans(self, spans: dict[str, tuple[int, int]]) -> "AmrGraph":
        """Return a copy with token spans attached to the named nodes."""
        new_nodes = tuple(
            replace(n, token_span=spans.get(n.id, n.token_span)) for n in self.nodes
        )
        return AmrGraph(nodes=new_nodes, edges=self.edges, root=self.root)


@dataclass(frozen=True)
class AmrPath:
    """Alternating node/edge sequence with at least one edge.

    When the endpoints are disconnected a single synthetic OTHERS edge joins
    them and synthetic_fallback is set.
    """

    nodes: tuple[str, ...]
    edges: tuple[AmrEdge, ...]
    synthetic_fallback: bool = False

    def __post_init__(self):
        if len(self.nodes) < 2 or len(self.edges) != len(self.nodes) - 1:
            raise ValueError("path must alternate nodes and edges with >= 1 edge")

    def elements(self) -> list[tuple[str, str]]:
        """Flatten to [(kind, id), ...] with kind in {node, edge}."""
        out: list[tuple[str, str]] = [("node", self.nodes[0])]
        for edge, node in zip(self.edges, self.nodes[1:]):
            out.append(("edge", edge.group.value))
            out.append(("node", node))
        return out

    def __len__(self) -> int:
        return len(self.nodes) + len(self.edges)


@dataclass(frozen=True)
class ScoringSequence:
    """Scorer input: event type, flattened path elements, argument role."""

    event_type: str
    elements: tuple[tuple[str, str], ...]
    role: str

    def __post_init__(self):
        if not self.elements:
            raise ValueError("empty path elements")
        if self.elements[0][0] != "node" or self.elements[-1][0] != "node":
            raise ValueError("path elements must start and end with a node")

    def __len__(self) -> int:
        return len(self.elements) + 2


def align_nodes(
    graph: AmrGraph,
    tokens: list[str],
    spans: list[tuple[int, int]],
) -> list[str | None]:
    """Map each query span to the overlapping node, or None.

    Ties go to the node with the largest overlap, then the leftmost node
    span, then the smallest node id.
    """
    n_tokens = len(tokens)
    for start, end in spans:
        if not 0 <= start < end <= n_tokens:
            raise ValueError(f"span ({start}, {end}) outside sentence of {n_tokens} tokens")
    result: list[str | None] = []
    for start, end in spans:
        best: tuple[int, int, str] | None = None  # (-overlap, node_start, id)
        for node in graph.nodes:
            if node.token_span is None:
                continue
            ns, ne = node.token_span
            overlap = min(end, ne) - max(start, ns)
            if overlap <= 0:
                continue
            key = (-overlap, ns, node.id)
            if best is None or key < best:
                best = key
        result.append(best[2] if best else None)
    return result


def _adjacency(graph: AmrGraph) -> dict[str, dict[str, AmrEdge]]:
    """Undirected adjacency; parallel edges collapse to the one with the
    smallest (relation, direction) key so traversal is deterministic."""
    adj: dict[str, dict[str, AmrEdge]] = {n.id: {} for n in graph.nodes}
    for edge in sorted(graph.edges, key=lambda e: (e.raw_relation, e.src, e.dst)):
        for a, b in ((edge.src, edge.dst), (edge.dst, edge.src)):
            if b not in adj[a]:
                adj[a][b] = edge
    return adj


def shortest_path(graph: AmrGraph, src: str, dst: str) -> AmrPath:
    """Minimum-hop undirected path from src to dst, endpoints included.

    Among equal-length paths the lexicographically smallest node-id sequence
    is returned. Disconnected (or identical) endpoints yield the synthetic
    OTHERS fallback edge.
    """
    if not graph.has_node(src):
        raise UnknownNode(src)
    if not graph.has_node(dst):
        raise UnknownNode(dst)
    fallback = AmrPath(
        nodes=(src, dst),
        edges=(AmrEdge(src=src, dst=dst, raw_relation=FALLBACK_EDGE_ID),),
        synthetic_fallback=True,
    )
    if src == dst:
        return fallback

    adj = _adjacency(graph)
    # BFS from dst gives distance-to-target; then walk greedily from src,
    # always stepping to the smallest-id neighbor one hop closer to dst.
    dist = {dst: 0}
    frontier = [dst]
    while frontier:
        nxt = []
        for u in frontier:
            for v in adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    nxt.append(v)
        frontier = nxt
    if src not in dist:
        return fallback

    nodes = [src]
    edges = []
    current = src
    while current != dst:
        step = min(
            v for v in adj[current] if dist.get(v, -1) == dist[current] - 1
        )
        edges.append(adj[current][step])
        nodes.append(step)
        current = step
    return AmrPath(nodes=tuple(nodes), edges=tuple(edges))


def serialize_path(event_type: str, path: AmrPath, role: str) -> ScoringSequence:
    """Flatten a path between a trigger and an argument into scorer input.

    Edges are rendered by their coarse relation group; node order runs from
    the trigger end to the argument end.
    """
    return ScoringSequence(
        event_type=event_type,
        elements=tuple(path.elements()),
        role=role,
    )


def fallback_group() -> RelationGroup:
    """Group label carried by the synthetic no-path edge."""
    return group_relation(FALLBACK_EDGE_ID)
