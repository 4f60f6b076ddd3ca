import sys
from collections import deque
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from minewatch.topology import BASE_ID, Network

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "scenarios"


@pytest.fixture
def reference_tree_path() -> Path:
    return SCENARIO_DIR / "reference_tree.scn"


@pytest.fixture
def reference_tree_text(reference_tree_path) -> str:
    return reference_tree_path.read_text()


def oracle_reachable(net: Network, failed: set[int]) -> set[int]:
    """Independent prune-and-BFS reachability check.

    Builds an explicit vertex graph of the data flow. The ring attach head
    is split into an origin vertex (its own samples, which relay the full
    ring) and a relay vertex (received traffic, which exits to the base),
    then runs plain BFS from each sensor node's origin.
    """
    attach = net.attach_head()

    def vertex(node, role):
        return (role, node)

    edges: dict[tuple, list[tuple]] = {}

    def add(a, b):
        edges.setdefault(a, []).append(b)

    for s, d in net.links:
        if attach is not None and s == attach and d == BASE_ID:
            add(vertex(attach, "relay"), vertex(BASE_ID, "n"))
        elif attach is not None and d == attach:
            add(vertex(s, "n"), vertex(attach, "relay"))
        elif attach is not None and s == attach:
            add(vertex(attach, "origin"), vertex(d, "n"))
        else:
            add(vertex(s, "n"), vertex(d, "n"))

    if attach is not None and vertex(attach, "origin") not in edges:
        # degenerate one-head ring: own data exits directly
        add(vertex(attach, "origin"), vertex(attach, "relay"))

    reachable = set()
    for node in net.sensor_nodes():
        if node in failed:
            continue
        start = vertex(node, "origin" if node == attach else "n")
        seen = {start}
        q = deque([start])
        hit = False
        while q:
            v = q.popleft()
            if v == vertex(BASE_ID, "n"):
                hit = True
                break
            for w in edges.get(v, ()):
                if w[1] in failed or w in seen:
                    continue
                seen.add(w)
                q.append(w)
        if hit:
            reachable.add(node)
    return reachable
