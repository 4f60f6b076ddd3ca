import itertools

import pytest

from conftest import oracle_reachable
from minewatch.topology import (BASE_ID, Disconnected, InvalidSpec, Network,
                                Node, NodeRole, Position, RangeProfile,
                                RangeViolation, TopologyKind, TopologySpec,
                                UnknownNode, build_topology, failure_impact,
                                max_hops, validate)


def all_small_specs():
    """Every spec of every kind with <= 12 nodes (base + heads + subs)."""
    specs = []
    for kind in TopologyKind:
        for clusters in range(1, 6):
            for subs in range(0, 6):
                if 1 + clusters * (1 + subs) <= 12:
                    specs.append(TopologySpec.uniform(kind, clusters, subs))
    return specs


class TestBuild:
    def test_reference_tree_counts(self):
        net = build_topology(TopologySpec.uniform(TopologyKind.TREE, 2, 2))
        assert len(net.sensor_nodes()) == 6
        assert len(net.nodes) == 7
        assert len(net.heads()) == 2
        assert len(net.leaves()) == 4

    def test_minimal_star_on_star(self):
        net = build_topology(TopologySpec.uniform(TopologyKind.STAR_ON_STAR, 1, 0))
        assert len(net.nodes) == 2
        assert net.links == {(1, 0)}

    def test_star_on_ring_structure(self):
        net = build_topology(TopologySpec.uniform(TopologyKind.STAR_ON_RING, 4, 1))
        heads = set(net.heads())
        ring_edges = {(s, d) for s, d in net.links
                      if s in heads and d in heads}
        star_edges = {(s, d) for s, d in net.links
                      if net.nodes[s].role is NodeRole.LEAF}
        base_edges = {(s, d) for s, d in net.links if d == BASE_ID}
        assert len(ring_edges) == 4  # single directed cycle over 4 heads
        assert len(star_edges) == 4
        assert len(base_edges) == 1
        # the ring edges form one cycle covering every head
        succ = dict(ring_edges)
        cur, seen = next(iter(heads)), set()
        for _ in heads:
            seen.add(cur)
            cur = succ[cur]
        assert seen == heads

    def test_zero_clusters_rejected(self):
        with pytest.raises(InvalidSpec):
            build_topology(TopologySpec.uniform(TopologyKind.TREE, 0, 2))

    def test_duplicate_positions_rejected(self):
        geom = {0: Position(0, 0), 1: Position(5, 5), 2: Position(5, 5)}
        spec = TopologySpec(TopologyKind.TREE, 1, (1,), geometry=geom)
        with pytest.raises(InvalidSpec):
            build_topology(spec)

    def test_out_of_range_geometry_rejected(self):
        geom = {0: Position(0, 0), 1: Position(50, 0)}  # > 30 m indoor
        spec = TopologySpec(TopologyKind.STAR_ON_STAR, 1, (0,), geometry=geom)
        with pytest.raises(RangeViolation):
            build_topology(spec)

    @pytest.mark.parametrize("spec", all_small_specs())
    def test_every_generated_network_validates(self, spec):
        assert validate(build_topology(spec)) == []


class TestValidate:
    def test_leaf_out_of_range_flagged(self):
        net = build_topology(TopologySpec.uniform(TopologyKind.TREE, 2, 2))
        leaf = net.leaves()[0]
        head = net.head_of(leaf)
        hp = net.nodes[head].position
        moved = Node(leaf, NodeRole.LEAF, Position(hp.x + 40.0, hp.y),
                     net.nodes[leaf].cluster)
        net.nodes[leaf] = moved
        violations = validate(net)
        assert len(violations) == 1
        assert "RangeViolation" in violations[0]
        assert f"{leaf}->{head}" in violations[0]

    def test_two_base_stations_flagged(self):
        net = build_topology(TopologySpec.uniform(TopologyKind.TREE, 2, 1))
        head = net.heads()[0]
        net.nodes[head] = Node(head, NodeRole.BASE_STATION,
                               net.nodes[head].position, None)
        assert any("MultipleBaseStations" in v for v in validate(net))


class TestFailureImpact:
    def test_star_on_star_loses_exactly_the_cluster(self):
        net = build_topology(TopologySpec.uniform(TopologyKind.STAR_ON_STAR, 3, 2))
        for head in net.heads():
            report = failure_impact(net, {head})
            assert set(report.unreachable) == {head, *net.subs_of(head)}

    def test_tree_head_loses_its_leaflets(self):
        net = build_topology(TopologySpec.uniform(TopologyKind.TREE, 2, 2))
        head = net.heads()[0]
        report = failure_impact(net, {head})
        assert set(report.unreachable) == {head, *net.subs_of(head)}

    def test_ring_head_failure_cascades(self):
        for clusters in (2, 3, 4):
            net = build_topology(
                TopologySpec.uniform(TopologyKind.STAR_ON_RING, clusters, 1))
            for head in net.heads():
                report = failure_impact(net, {head})
                own_star = {head, *net.subs_of(head)}
                assert own_star < set(report.unreachable)

    def test_leaf_failure_loses_only_the_leaf(self):
        for kind in TopologyKind:
            net = build_topology(TopologySpec.uniform(kind, 2, 2))
            leaf = net.leaves()[0]
            report = failure_impact(net, {leaf})
            assert set(report.unreachable) == {leaf}

    def test_unknown_node_rejected(self):
        net = build_topology(TopologySpec.uniform(TopologyKind.TREE, 2, 2))
        with pytest.raises(UnknownNode):
            failure_impact(net, {99})
        with pytest.raises(UnknownNode):
            failure_impact(net, {BASE_ID})

    @pytest.mark.parametrize("spec", all_small_specs())
    def test_matches_bfs_oracle_exhaustively(self, spec):
        net = build_topology(spec)
        sensors = net.sensor_nodes()
        fail_sets = [set(c) for r in (1, 2)
                     for c in itertools.combinations(sensors, r)]
        for failed in [set()] + fail_sets:
            got = set(failure_impact(net, failed).reachable)
            assert got == oracle_reachable(net, failed), (spec, failed)


class TestMaxHops:
    @pytest.mark.parametrize("clusters,subs", [(1, 1), (2, 2), (3, 4), (5, 1)])
    def test_star_and_tree_are_depth_two(self, clusters, subs):
        for kind in (TopologyKind.STAR_ON_STAR, TopologyKind.TREE):
            net = build_topology(TopologySpec.uniform(kind, clusters, subs))
            assert max_hops(net) == 2

    def test_ring_hops_follow_relay_chain(self):
        # 4 heads: a leaf behind the head farthest from the attach point
        # crosses the remaining relays, then the attach hop, then the base
        net = build_topology(TopologySpec.uniform(TopologyKind.STAR_ON_RING, 4, 1))
        attach = net.attach_head()
        first = net.ring_successor(attach)
        leaf = net.subs_of(first)[0]
        # leaf -> head, 3 relay hops to the attach head, then base
        assert len(net.flow_path(leaf)) == 5
        # the attach head's own data relays the entire ring before delivery
        assert len(net.flow_path(attach)) == 5

    def test_disconnected_raises(self):
        net = build_topology(TopologySpec.uniform(TopologyKind.TREE, 1, 1))
        leaf = net.leaves()[0]
        net.links = {l for l in net.links if l[0] != leaf}
        with pytest.raises(Disconnected):
            max_hops(net)
