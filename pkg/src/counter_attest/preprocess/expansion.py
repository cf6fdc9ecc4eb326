from __future__ import annotations

from collections import deque
from typing import NamedTuple

import networkx as nx

from counter_attest.cfg.model import AnnotatedCfg
from counter_attest.cfg.stacks import EMPTY_STACK, CallStack, follow_edge
from counter_attest.preprocess.exceptions import ExpansionBudgetError

DEFAULT_NODE_BUDGET = 1_000_000


class ExpandedNode(NamedTuple):
    block: str
    stack: CallStack


def successors(cfg: AnnotatedCfg, node: ExpandedNode) -> list[ExpandedNode]:
    """Expanded successors in a stable order, without duplicates."""
    result: dict[ExpandedNode, None] = {}
    for edge in sorted(cfg.out_edges(node.block), key=lambda e: (e.target, e.kind.value)):
        stack = follow_edge(cfg, node.stack, edge)
        if stack is not None:
            result[ExpandedNode(edge.target, stack)] = None
    return list(result)


def expand(cfg: AnnotatedCfg, node_budget: int = DEFAULT_NODE_BUDGET) -> nx.DiGraph:
    """
    Call-string expansion: one node per (block, call stack) pair reachable
    from the program entry. Finite because recursion is rejected on load.
    """
    root = ExpandedNode(cfg.entry, EMPTY_STACK)
    graph = nx.DiGraph()
    graph.add_node(root)
    queue = deque([root])
    while queue:
        node = queue.popleft()
        for succ in successors(cfg, node):
            if succ not in graph:
                if graph.number_of_nodes() >= node_budget:
                    raise ExpansionBudgetError(node_budget, graph.number_of_nodes() + 1)
                queue.append(succ)
            graph.add_edge(node, succ)
    return graph
