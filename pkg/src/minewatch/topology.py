"""Network topology builders, validation, and failure analysis.

Three shapes are supported: a ring of cluster heads with star sub-nodes
(star-on-ring), a star of cluster heads each with star sub-nodes
(star-on-star), and a depth-2 tree (heads under the base, sub-nodes under
heads). Links are stored in the data-flow direction, i.e. pointing toward
the base station; polls travel the reverse direction over the same link.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

BASE_ID = 0

RANGE_INDOOR_M = 30.0
RANGE_OUTDOOR_M = 100.0


class TopologyError(Exception):
    pass


class InvalidSpec(TopologyError):
    pass


class RangeViolation(TopologyError):
    pass


class UnknownNode(TopologyError):
    pass


class Disconnected(TopologyError):
    pass


class TopologyKind(Enum):
    STAR_ON_RING = "star_on_ring"
    STAR_ON_STAR = "star_on_star"
    TREE = "tree"


class NodeRole(Enum):
    BASE_STATION = "base"
    CLUSTER_HEAD = "head"
    LEAF = "leaf"


class RangeProfile(Enum):
    INDOOR = "indoor"
    OUTDOOR = "outdoor"

    @property
    def range_m(self) -> float:
        return RANGE_INDOOR_M if self is RangeProfile.INDOOR else RANGE_OUTDOOR_M


@dataclass(frozen=True)
class Position:
    x: float
    y: float

    def distance_to(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class TopologySpec:
    kind: TopologyKind
    cluster_count: int
    subs_per_cluster: tuple[int, ...]
    range_profile: RangeProfile = RangeProfile.INDOOR
    # ring only: index of the head the base station attaches to
    base_attach: int = 0
    # explicit geometry, node id -> Position; None = auto layout
    geometry: dict[int, Position] | None = None

    @staticmethod
    def uniform(kind: TopologyKind, cluster_count: int, subs: int,
                range_profile: RangeProfile = RangeProfile.INDOOR,
                base_attach: int = 0) -> "TopologySpec":
        return TopologySpec(kind, cluster_count, (subs,) * cluster_count,
                            range_profile, base_attach)


@dataclass(frozen=True)
class Node:
    id: int
    role: NodeRole
    position: Position
    cluster: int | None  # None for the base station


@dataclass
class Network:
    spec: TopologySpec
    nodes: dict[int, Node]
    # directed data-flow links: src -> dest (toward the base)
    links: set[tuple[int, int]] = field(default_factory=set)

    @property
    def range_m(self) -> float:
        return self.spec.range_profile.range_m

    def heads(self) -> list[int]:
        return sorted(n.id for n in self.nodes.values()
                      if n.role is NodeRole.CLUSTER_HEAD)

    def leaves(self) -> list[int]:
        return sorted(n.id for n in self.nodes.values()
                      if n.role is NodeRole.LEAF)

    def sensor_nodes(self) -> list[int]:
        return sorted(n.id for n in self.nodes.values()
                      if n.role is not NodeRole.BASE_STATION)

    def subs_of(self, head: int) -> list[int]:
        return sorted(src for src, dst in self.links
                      if dst == head and self.nodes[src].role is NodeRole.LEAF)

    def head_of(self, leaf: int) -> int:
        for src, dst in self.links:
            if src == leaf and self.nodes[dst].role is NodeRole.CLUSTER_HEAD:
                return dst
        raise UnknownNode(f"node {leaf} has no cluster head parent")

    def attach_head(self) -> int | None:
        """The ring head holding the base link (None off-ring)."""
        if self.spec.kind is not TopologyKind.STAR_ON_RING:
            return None
        return next(s for s, d in self.links if d == BASE_ID)

    def ring_successor(self, head: int) -> int | None:
        for src, dst in self.links:
            if src == head and dst != BASE_ID \
                    and self.nodes[dst].role is NodeRole.CLUSTER_HEAD:
                return dst
        return None

    def next_hop(self, node: int, origin: int | None = None) -> int | None:
        """Data-flow successor of a node.

        On a ring the attach head forwards received traffic to the base,
        but its own data first relays all the way around the ring, so the
        ring's unidirectional fragility applies to every cluster head.
        """
        outs = [dst for src, dst in self.links if src == node]
        if not outs:
            return None
        if BASE_ID in outs:
            if origin == node:
                ring_next = self.ring_successor(node)
                if ring_next is not None:
                    return ring_next
            return BASE_ID
        if len(outs) == 1:
            return outs[0]
        raise TopologyError(f"node {node} has {len(outs)} outgoing links")

    def flow_path(self, node: int) -> list[int]:
        """Data-flow hop sequence from a node to the base station,
        exclusive of the node itself, ending with the base."""
        if node not in self.nodes:
            raise UnknownNode(f"unknown node {node}")
        path = []
        cur = node
        first = True
        while cur != BASE_ID:
            nxt = self.next_hop(cur, origin=node if first else None)
            first = False
            if nxt is None or len(path) > len(self.nodes) + 1:
                raise Disconnected(f"node {node} has no path to base")
            path.append(nxt)
            cur = nxt
        return path

    def cluster_members(self) -> dict[int, list[int]]:
        """ClusterId -> member node ids (head first)."""
        out: dict[int, list[int]] = {}
        for head in self.heads():
            cid = self.nodes[head].cluster
            out[cid] = [head] + self.subs_of(head)
        return out


@dataclass(frozen=True)
class ReachabilityReport:
    reachable: frozenset[int]
    unreachable: frozenset[int]
    max_hops: int | None = None


def _check_spec(spec: TopologySpec) -> None:
    if spec.cluster_count < 1:
        raise InvalidSpec("cluster_count must be >= 1")
    if len(spec.subs_per_cluster) != spec.cluster_count:
        raise InvalidSpec("subs_per_cluster must have one entry per cluster")
    if any(s < 0 for s in spec.subs_per_cluster):
        raise InvalidSpec("subs_per_cluster entries must be >= 0")
    if not 0 <= spec.base_attach < spec.cluster_count:
        raise InvalidSpec(f"base_attach {spec.base_attach} out of range")


def _auto_layout(spec: TopologySpec, head_ids: list[int],
                 subs_by_head: dict[int, list[int]]) -> dict[int, Position]:
    """Place heads 0.9*range apart from their neighbor and subs 0.5*range
    from their head, leaving slack for perturbation."""
    r = spec.range_profile.range_m
    head_gap = 0.9 * r
    sub_dist = 0.5 * r
    pos: dict[int, Position] = {}
    n = len(head_ids)

    if spec.kind is TopologyKind.STAR_ON_RING:
        if n == 1:
            ring_r = 0.0
        else:
            # adjacent heads are chords of head_gap on a circle
            ring_r = head_gap / (2.0 * math.sin(math.pi / n))
        for i, h in enumerate(head_ids):
            a = 2.0 * math.pi * i / max(n, 1)
            pos[h] = Position(ring_r * math.cos(a), ring_r * math.sin(a))
        # base sits just outside the attach head, radially outward
        attach = head_ids[spec.base_attach]
        ap = pos[attach]
        norm = math.hypot(ap.x, ap.y)
        if norm == 0.0:
            pos[BASE_ID] = Position(sub_dist, 0.0)
        else:
            scale = (norm + sub_dist) / norm
            pos[BASE_ID] = Position(ap.x * scale, ap.y * scale)
    else:
        pos[BASE_ID] = Position(0.0, 0.0)
        for i, h in enumerate(head_ids):
            a = 2.0 * math.pi * i / n
            pos[h] = Position(head_gap * math.cos(a), head_gap * math.sin(a))

    for h in head_ids:
        hp = pos[h]
        subs = subs_by_head[h]
        for j, s in enumerate(subs):
            # offset angles per head so positions never collide
            a = 2.0 * math.pi * j / max(len(subs), 1) + 0.37 * h
            pos[s] = Position(hp.x + sub_dist * math.cos(a),
                              hp.y + sub_dist * math.sin(a))
    return pos


def build_topology(spec: TopologySpec) -> Network:
    """Build a Network of the requested kind; raises InvalidSpec or
    RangeViolation instead of returning a broken graph."""
    _check_spec(spec)

    head_ids = []
    subs_by_head: dict[int, list[int]] = {}
    next_id = 1
    for c in range(spec.cluster_count):
        head = next_id
        next_id += 1
        head_ids.append(head)
        subs = list(range(next_id, next_id + spec.subs_per_cluster[c]))
        next_id += spec.subs_per_cluster[c]
        subs_by_head[head] = subs

    if spec.geometry is not None:
        all_ids = [BASE_ID] + head_ids + [s for h in head_ids for s in subs_by_head[h]]
        missing = [i for i in all_ids if i not in spec.geometry]
        if missing:
            raise InvalidSpec(f"geometry missing positions for nodes {missing}")
        pos = dict(spec.geometry)
    else:
        pos = _auto_layout(spec, head_ids, subs_by_head)

    seen_pos: dict[tuple[float, float], int] = {}
    for nid, p in pos.items():
        key = (p.x, p.y)
        if key in seen_pos:
            raise InvalidSpec(f"duplicate position for nodes {seen_pos[key]} and {nid}")
        seen_pos[key] = nid

    nodes = {BASE_ID: Node(BASE_ID, NodeRole.BASE_STATION, pos[BASE_ID], None)}
    links: set[tuple[int, int]] = set()
    for c, head in enumerate(head_ids):
        cid = c + 1
        nodes[head] = Node(head, NodeRole.CLUSTER_HEAD, pos[head], cid)
        for s in subs_by_head[head]:
            nodes[s] = Node(s, NodeRole.LEAF, pos[s], cid)
            links.add((s, head))

    if spec.kind is TopologyKind.STAR_ON_RING:
        n = len(head_ids)
        if n > 1:
            # unidirectional relay cycle; the attach head hands off to base
            for i, h in enumerate(head_ids):
                links.add((h, head_ids[(i + 1) % n]))
        attach = head_ids[spec.base_attach]
        links.add((attach, BASE_ID))
    else:
        for head in head_ids:
            links.add((head, BASE_ID))

    net = Network(spec=spec, nodes=nodes, links=links)
    for src, dst in links:
        d = nodes[src].position.distance_to(nodes[dst].position)
        if d > net.range_m:
            raise RangeViolation(
                f"link {src}->{dst} is {d:.1f} m, exceeds range {net.range_m:.0f} m")
    return net


def validate(network: Network) -> list[str]:
    """Structural/range check; violations returned as data, never raised."""
    v: list[str] = []
    nodes = network.nodes
    bases = [n.id for n in nodes.values() if n.role is NodeRole.BASE_STATION]
    if len(bases) > 1:
        v.append(f"MultipleBaseStations: {sorted(bases)}")
    if BASE_ID not in nodes or nodes[BASE_ID].role is not NodeRole.BASE_STATION:
        v.append("MissingBaseStation: node 0 must be the base station")

    rng = network.range_m
    for src, dst in sorted(network.links):
        if src not in nodes or dst not in nodes:
            v.append(f"DanglingLink: {src}->{dst}")
            continue
        d = nodes[src].position.distance_to(nodes[dst].position)
        if d > rng:
            v.append(f"RangeViolation: link {src}->{dst} is {d:.1f} m > {rng:.0f} m")

    for n in nodes.values():
        if n.role is NodeRole.LEAF:
            parents = [dst for src, dst in network.links
                       if src == n.id and nodes.get(dst)
                       and nodes[dst].role is NodeRole.CLUSTER_HEAD]
            if len(parents) != 1:
                v.append(f"BadLeafParent: leaf {n.id} has {len(parents)} head parents")
            elif nodes[parents[0]].cluster != n.cluster:
                v.append(f"ClusterMismatch: leaf {n.id} not in its head's cluster")

    if network.spec.kind is TopologyKind.STAR_ON_RING:
        heads = network.heads()
        if len(heads) > 1:
            ring = {(s, d) for s, d in network.links
                    if nodes[s].role is NodeRole.CLUSTER_HEAD
                    and nodes[d].role is NodeRole.CLUSTER_HEAD}
            succ = {}
            ok = True
            for s, d in ring:
                if s in succ:
                    ok = False
                succ[s] = d
            if not ok or set(succ) != set(heads) or set(succ.values()) != set(heads):
                v.append("BadRing: ring links do not form a single directed cycle")
            else:
                cur, count = heads[0], 0
                while count < len(heads):
                    cur = succ[cur]
                    count += 1
                if cur != heads[0]:
                    v.append("BadRing: ring links do not form a single directed cycle")
    return v


def failure_impact(network: Network, failed: set[int]) -> ReachabilityReport:
    """Which sensor nodes still have a live data-flow path to the base after
    the given nodes fail. Failed nodes themselves count as unreachable."""
    for f in failed:
        if f not in network.nodes:
            raise UnknownNode(f"unknown node {f}")
        if f == BASE_ID:
            raise UnknownNode("base station cannot be in the failed set")

    reachable: set[int] = set()
    for node in network.sensor_nodes():
        if node in failed:
            continue
        try:
            path = network.flow_path(node)
        except Disconnected:
            continue
        if not any(hop in failed for hop in path):
            reachable.add(node)

    unreachable = set(network.sensor_nodes()) - reachable
    return ReachabilityReport(frozenset(reachable), frozenset(unreachable))


def max_hops(network: Network) -> int:
    """Longest data-flow path (in hops) from any sensor node to the base."""
    best = 0
    for node in network.sensor_nodes():
        best = max(best, len(network.flow_path(node)))
    return best
