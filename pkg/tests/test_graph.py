import numpy as np
import pytest

from intakegcn.graph import (
    UNREACHABLE,
    PartitionedAdjacency,
    SkeletonNode,
    SkeletonTopology,
    adjacency_matrix,
    build_topology,
    hop_distances,
    partition_adjacency,
    validate_topology,
)

ALL_PARTS = {"face", "arm", "mouth", "hand"}
# the six part combinations exercised by the reduced-skeleton experiments
PART_COMBOS = [
    {"mouth", "hand"},
    {"arm", "face"},
    {"mouth", "hand", "face"},
    {"mouth", "hand", "arm"},
    {"mouth", "arm", "face"},
    ALL_PARTS,
]


def test_full_topology_counts():
    top = build_topology(ALL_PARTS)
    assert top.node_count == 23
    assert len(top.edges) == 25
    assert top.connected
    assert top.nodes[top.root].source_index == 90
    assert top.nodes[top.root].name == "lower_lip"


def test_mouth_only_is_the_five_edge_ring():
    top = build_topology({"mouth"})
    assert top.node_count == 4
    # sources renumbered densely in canonical order
    assert [n.source_index for n in top.nodes] == [72, 78, 86, 90]
    ring = {frozenset(e) for e in top.edges}
    # upper lip (2) joins both corners and the lower lip (3) both corners,
    # plus the upper-lower link
    expected = {
        frozenset({2, 0}),
        frozenset({2, 1}),
        frozenset({3, 0}),
        frozenset({3, 1}),
        frozenset({2, 3}),
    }
    assert ring == expected
    assert top.connected


def test_face_only_connected_star_chain():
    top = build_topology({"face"})
    assert top.node_count == 5
    assert len(top.edges) == 4
    assert top.connected
    # root falls back to the nose when the mouth is excluded
    assert top.nodes[top.root].source_index == 1


def test_empty_parts_rejected():
    with pytest.raises(ValueError):
        build_topology(set())
    with pytest.raises(ValueError):
        build_topology({"legs"})


def test_hop_distances_by_hand():
    top = build_topology(ALL_PARTS)
    d = hop_distances(top)
    assert d[12] == 0  # lower lip is the root
    assert d[11] == 1  # upper lip via the (upper, lower) edge
    assert d[9] == 1 and d[10] == 1  # mouth corners
    assert d[0] == 2  # nose via upper lip
    assert d[3] == 4 and d[4] == 4  # ears
    assert d[7] == 6 and d[8] == 6  # elbows
    assert d[17] == 9 and d[22] == 9  # index fingertips
    assert (d != UNREACHABLE).all()


def test_hands_only_disconnected_with_sentinel():
    top = build_topology({"hand"})
    assert not top.connected
    d = hop_distances(top)
    # root falls back to the first selected node; the other hand is unreachable
    assert (d == UNREACHABLE).sum() == 5
    report = validate_topology(top)
    assert report.ok and not report.connected


def test_two_node_path_partitions():
    top = SkeletonTopology(
        nodes=(
            SkeletonNode(0, 100, "face", "a"),
            SkeletonNode(1, 101, "face", "b"),
        ),
        edges=((0, 1),),
        root=0,
        parts=frozenset({"face"}),
        connected=True,
    )
    adj = partition_adjacency(top, epsilon=0.001)
    binary = adj.binary()
    assert binary[0, 0, 0] == 1 and binary[0, 1, 1] == 1  # self-loops
    assert binary[2, 0, 1] == 1  # neighbor farther from root: centrifugal
    assert binary[1, 1, 0] == 1  # neighbor closer to root: centripetal
    assert binary.sum() == 4


@pytest.mark.parametrize("parts", PART_COMBOS, ids=lambda p: "+".join(sorted(p)))
def test_partition_completeness_and_disjointness(parts):
    top = build_topology(parts)
    adj = partition_adjacency(top)
    binary = adj.binary()
    a_plus_i = adjacency_matrix(top) + np.eye(top.node_count)
    # every (edge, direction) and self-loop in exactly one partition
    assert np.array_equal(binary.sum(axis=0), a_plus_i)


@pytest.mark.parametrize("parts", PART_COMBOS, ids=lambda p: "+".join(sorted(p)))
def test_partition_symmetry_properties(parts):
    top = build_topology(parts)
    a = adjacency_matrix(top)
    assert np.array_equal(a, a.T)
    binary = partition_adjacency(top).binary()
    d = hop_distances(top)
    for i in range(top.node_count):
        for j in range(top.node_count):
            if i != j and a[i, j] and d[i] != d[j]:
                assert binary[1, i, j] == binary[2, j, i]


def test_partition_row_sums_bounded():
    adj = partition_adjacency(build_topology(ALL_PARTS), epsilon=0.001)
    sums = adj.stacks.sum(axis=2)
    assert (sums >= 0).all()
    assert (sums <= 1.0).all()  # deg / (deg + eps) < 1
    assert sums.max() > 0.99


def test_partition_rejects_bad_epsilon():
    top = build_topology(ALL_PARTS)
    with pytest.raises(ValueError):
        partition_adjacency(top, epsilon=0.0)


def test_renumbering_deterministic():
    a = build_topology({"mouth", "hand"})
    b = build_topology({"hand", "mouth"})
    assert a == b
    assert [n.source_index for n in a.nodes] == [
        72, 78, 86, 90, 92, 94, 96, 101, 104, 113, 115, 117, 122, 125,
    ]


def test_validate_reports_duplicate_edge():
    top = build_topology({"mouth"})
    broken = SkeletonTopology(
        nodes=top.nodes,
        edges=top.edges + (top.edges[0],),
        root=top.root,
        parts=top.parts,
        connected=True,
    )
    report = validate_topology(broken)
    assert not report.ok
    assert any("duplicate" in issue for issue in report.issues)


def test_validate_reports_self_loop_and_range():
    top = build_topology({"mouth"})
    broken = SkeletonTopology(
        nodes=top.nodes,
        edges=((0, 0), (0, 9)),
        root=top.root,
        parts=top.parts,
        connected=True,
    )
    report = validate_topology(broken)
    assert not report.ok
    assert any("self-loop" in issue for issue in report.issues)
    assert any("out of range" in issue for issue in report.issues)


def test_root_override_by_source_index():
    top = build_topology(ALL_PARTS, root_source=1)
    assert top.nodes[top.root].name == "nose"
    with pytest.raises(ValueError):
        build_topology({"hand"}, root_source=90)
