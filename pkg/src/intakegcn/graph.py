"""Skeleton graph for hand-to-mouth gesture detection.

Builds the 23-node upper-body topology (face, arms, mouth, hands) used by
every graph convolution in the network, and turns it into the 3-partition
normalized adjacency stack: for each node the neighborhood is split into
the node's own distance ring, neighbors closer to the root (centripetal)
and neighbors farther from it (centrifugal), with the lower lip as root.

Node subsets can be selected per body part to study reduced skeletons;
edges are restricted to the selected nodes, so some subsets (e.g. hands
alone) are legitimately disconnected.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

PARTS = ("face", "arm", "mouth", "hand")

#: Hop distance assigned to nodes the root cannot reach.
UNREACHABLE = np.iinfo(np.int64).max

# Canonical node table: (source keypoint id, body part, name). The local
# index of a node is its position in this table filtered by part selection,
# which keeps renumbering deterministic across runs.
_CANONICAL_NODES = (
    (1, "face", "nose"),
    (2, "face", "left_eye"),
    (3, "face", "right_eye"),
    (4, "face", "left_ear"),
    (5, "face", "right_ear"),
    (6, "arm", "left_shoulder"),
    (7, "arm", "right_shoulder"),
    (8, "arm", "left_elbow"),
    (9, "arm", "right_elbow"),
    (72, "mouth", "mouth_right"),
    (78, "mouth", "mouth_left"),
    (86, "mouth", "upper_lip"),
    (90, "mouth", "lower_lip"),
    (92, "hand", "left_wrist"),
    (94, "hand", "left_thumb_mid"),
    (96, "hand", "left_thumb_tip"),
    (101, "hand", "left_index_mid"),
    (104, "hand", "left_index_tip"),
    (113, "hand", "right_wrist"),
    (115, "hand", "right_thumb_mid"),
    (117, "hand", "right_thumb_tip"),
    (122, "hand", "right_index_mid"),
    (125, "hand", "right_index_tip"),
)

# Fixed 25-edge list on canonical indices: shortest natural chains linking
# fingertips through elbows/shoulders to ears/nose to the mouth ring.
_CANONICAL_EDGES = (
    # face
    (0, 1), (0, 2), (1, 3), (2, 4),
    # face -> mouth
    (0, 11),
    # mouth ring
    (11, 9), (11, 10), (12, 9), (12, 10), (11, 12),
    # face -> arm bridges
    (3, 5), (4, 6),
    # arms
    (5, 6), (5, 7), (6, 8),
    # arm -> hand bridges
    (7, 13), (8, 18),
    # left hand
    (13, 14), (14, 15), (13, 16), (16, 17),
    # right hand
    (18, 19), (19, 20), (18, 21), (21, 22),
)

_ROOT_SOURCE = 90          # lower lip
_FALLBACK_ROOT_SOURCE = 1  # nose, when the mouth is excluded


@dataclass(frozen=True)
class SkeletonNode:
    local_index: int
    source_index: int
    part: str
    name: str


@dataclass(frozen=True)
class SkeletonTopology:
    """A selected skeleton subgraph with dense local indices.

    ``connected`` is a warning flag, not a validity condition: part subsets
    without bridge nodes (hands alone, for example) split into components
    and the network is still run on them.
    """

    nodes: tuple[SkeletonNode, ...]
    edges: tuple[tuple[int, int], ...]
    root: int
    parts: frozenset[str]
    connected: bool

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    def to_dict(self) -> dict:
        return {
            "parts": sorted(self.parts),
            "root": self.root,
            "root_source": self.nodes[self.root].source_index,
            "connected": self.connected,
            "nodes": [
                {
                    "local_index": n.local_index,
                    "source_index": n.source_index,
                    "part": n.part,
                    "name": n.name,
                }
                for n in self.nodes
            ],
            "edges": [list(e) for e in self.edges],
        }


@dataclass(frozen=True)
class PartitionedAdjacency:
    """Normalized 3-partition adjacency stack of shape (3, V, V).

    Partition order: 0 = same-distance ring (includes self-loops),
    1 = centripetal (neighbor closer to the root), 2 = centrifugal
    (neighbor farther from it). Entry (i, j) of partition p is the weight
    with which neighbor j contributes to node i, row-normalized as
    a_ij / (row_degree_p(i) + epsilon).
    """

    stacks: np.ndarray
    normalization_epsilon: float

    @property
    def node_count(self) -> int:
        return self.stacks.shape[1]

    def binary(self) -> np.ndarray:
        """Unnormalized 0/1 partitions, same shape as ``stacks``."""
        return (self.stacks > 0).astype(np.float64)


@dataclass
class TopologyReport:
    ok: bool
    connected: bool
    issues: list[str] = field(default_factory=list)


def build_topology(parts, root_source: int | None = None) -> SkeletonTopology:
    """Build the skeleton graph restricted to the given body parts.

    Nodes keep canonical order and are renumbered densely from 0. Edges
    (including cross-part bridges) are kept when both endpoints survive
    the selection. The root is the lower lip when the mouth is selected,
    else the nose, else the first selected node; ``root_source`` overrides
    that chain with an explicit source keypoint id.
    """
    parts = frozenset(parts)
    if not parts:
        raise ValueError("part selection must be non-empty")
    unknown = parts - set(PARTS)
    if unknown:
        raise ValueError(f"unknown parts: {sorted(unknown)}")

    selected = [
        (canon_idx, src, part, name)
        for canon_idx, (src, part, name) in enumerate(_CANONICAL_NODES)
        if part in parts
    ]
    local_of_canon = {canon: local for local, (canon, _, _, _) in enumerate(selected)}
    nodes = tuple(
        SkeletonNode(local, src, part, name)
        for local, (_, src, part, name) in enumerate(selected)
    )
    edges = tuple(
        (local_of_canon[a], local_of_canon[b])
        for a, b in _CANONICAL_EDGES
        if a in local_of_canon and b in local_of_canon
    )

    source_to_local = {n.source_index: n.local_index for n in nodes}
    if root_source is not None:
        if root_source not in source_to_local:
            raise ValueError(f"root source index {root_source} not in selection")
        root = source_to_local[root_source]
    elif _ROOT_SOURCE in source_to_local:
        root = source_to_local[_ROOT_SOURCE]
    elif _FALLBACK_ROOT_SOURCE in source_to_local:
        root = source_to_local[_FALLBACK_ROOT_SOURCE]
    else:
        root = 0

    connected = _is_connected(len(nodes), edges)
    return SkeletonTopology(nodes, edges, root, parts, connected)


def adjacency_matrix(topology: SkeletonTopology) -> np.ndarray:
    """Symmetric binary adjacency (V, V), no self-loops."""
    v = topology.node_count
    a = np.zeros((v, v), dtype=np.float64)
    for i, j in topology.edges:
        a[i, j] = 1.0
        a[j, i] = 1.0
    return a


def hop_distances(topology: SkeletonTopology, root: int | None = None) -> np.ndarray:
    """BFS hop count from the root; unreachable nodes get UNREACHABLE."""
    v = topology.node_count
    if root is None:
        root = topology.root
    if not 0 <= root < v:
        raise ValueError(f"root {root} out of range for {v} nodes")

    neighbors: list[list[int]] = [[] for _ in range(v)]
    for i, j in topology.edges:
        neighbors[i].append(j)
        neighbors[j].append(i)

    dist = np.full(v, UNREACHABLE, dtype=np.int64)
    dist[root] = 0
    queue = deque([root])
    while queue:
        i = queue.popleft()
        for j in neighbors[i]:
            if dist[j] == UNREACHABLE:
                dist[j] = dist[i] + 1
                queue.append(j)
    return dist


def partition_adjacency(
    topology: SkeletonTopology, epsilon: float = 0.001
) -> PartitionedAdjacency:
    """Spatial-configuration partitioning of A + I into three stacks.

    For every ordered pair (i, j) with j a neighbor of i or j = i, the pair
    goes to partition 0 when d(j) = d(i), partition 1 when d(j) < d(i) and
    partition 2 when d(j) > d(i), where d is the hop distance to the root.
    Each partition is then row-degree normalized with ``epsilon`` guarding
    empty rows.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")

    v = topology.node_count
    a = adjacency_matrix(topology)
    d = hop_distances(topology)

    stacks = np.zeros((3, v, v), dtype=np.float64)
    stacks[0][np.arange(v), np.arange(v)] = 1.0  # self-loops
    for i in range(v):
        for j in range(v):
            if a[i, j] == 0:
                continue
            if d[j] == d[i]:
                stacks[0, i, j] = 1.0
            elif d[j] < d[i]:
                stacks[1, i, j] = 1.0
            else:
                stacks[2, i, j] = 1.0

    row_deg = stacks.sum(axis=2, keepdims=True)
    stacks = stacks / (row_deg + epsilon)
    return PartitionedAdjacency(stacks, epsilon)


def validate_topology(topology: SkeletonTopology) -> TopologyReport:
    """Check structural invariants; disconnection is reported, not fatal."""
    issues: list[str] = []
    v = topology.node_count
    if v != len(topology.nodes):
        issues.append("node_count mismatch")
    seen: set[tuple[int, int]] = set()
    for i, j in topology.edges:
        if not (0 <= i < v and 0 <= j < v):
            issues.append(f"edge ({i}, {j}) endpoint out of range")
        if i == j:
            issues.append(f"self-loop ({i}, {j})")
        key = (min(i, j), max(i, j))
        if key in seen:
            issues.append(f"duplicate edge ({i}, {j})")
        seen.add(key)
    if not 0 <= topology.root < v:
        issues.append(f"root {topology.root} not in node set")
    connected = _is_connected(v, topology.edges)
    return TopologyReport(ok=not issues, connected=connected, issues=issues)


def _is_connected(node_count: int, edges) -> bool:
    if node_count == 0:
        return False
    neighbors: list[list[int]] = [[] for _ in range(node_count)]
    for i, j in edges:
        neighbors[i].append(j)
        neighbors[j].append(i)
    seen = {0}
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in neighbors[i]:
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return len(seen) == node_count
