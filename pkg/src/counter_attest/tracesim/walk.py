from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass
from functools import cached_property

import networkx as nx

from counter_attest.cfg.model import AnnotatedCfg
from counter_attest.cfg.stacks import EMPTY_STACK
from counter_attest.cfg.trace import BlockTrace
from counter_attest.preprocess.expansion import ExpandedNode, expand, successors
from counter_attest.tracesim.exceptions import WalkError

STOP_PROBABILITY = 0.3


@dataclass(frozen=True)
class WalkConstraints:
    min_segments: int = 1
    max_segments: int = 10
    # Upper bound of the iteration count sampled per looping node and segment;
    # also caps the visits of one (block, call stack) node within a segment
    max_loop_iterations: int = 5
    step_budget: int = 1_000_000
    restarts: int = 20

    def __post_init__(self) -> None:
        if not 0 <= self.min_segments <= self.max_segments:
            raise WalkError(
                f"min_segments {self.min_segments} and max_segments "
                f"{self.max_segments} are inconsistent"
            )
        if self.max_loop_iterations < 0:
            raise WalkError("max_loop_iterations must not be negative")


class _Walker:
    def __init__(self, cfg: AnnotatedCfg, rng: random.Random, constraints: WalkConstraints):
        self.cfg = cfg
        self.rng = rng
        self.constraints = constraints
        self.steps_left = constraints.step_budget

    @cached_property
    def graph(self) -> nx.DiGraph:
        return expand(self.cfg)

    @cached_property
    def components(self) -> dict[ExpandedNode, int]:
        """Component index of every node that lies on a cycle."""
        result: dict[ExpandedNode, int] = {}
        for index, component in enumerate(nx.strongly_connected_components(self.graph)):
            node = next(iter(component))
            if len(component) > 1 or self.graph.has_edge(node, node):
                result.update(dict.fromkeys(component, index))
        return result

    @cached_property
    def distances(self) -> dict[ExpandedNode, int]:
        """Edges to the nearest measurement point."""
        points = [n for n in self.graph if self.cfg.is_measurement_point(n.block)]
        if not points:
            return {}
        return nx.multi_source_dijkstra_path_length(self.graph.reverse(copy=False), points)

    def ordered_successors(
        self, node: ExpandedNode, visits: int, quotas: dict[ExpandedNode, int]
    ) -> list[ExpandedNode]:
        """
        Successors in the order they are tried, last one first. A node on a
        cycle keeps to its cycle until its sampled quota of iterations is
        used up, then heads for the nearest measurement point.
        """
        result = successors(self.cfg, node)
        self.rng.shuffle(result)
        component = self.components.get(node)
        if component is None:
            return result
        if node not in quotas:
            quotas[node] = self.rng.randint(0, self.constraints.max_loop_iterations)
        if visits <= quotas[node]:
            result.sort(key=lambda s: self.components.get(s) == component)
        else:
            unreachable = len(self.graph) + 1
            result.sort(key=lambda s: -self.distances.get(s, unreachable))
        return result

    def segment(self, start: ExpandedNode) -> list[ExpandedNode] | None:
        """
        Randomized depth-first search for the next measurement point. Each
        node may be revisited max_loop_iterations times, dead ends backtrack.
        """
        limit = 1 + self.constraints.max_loop_iterations
        path = [start]
        visits: Counter[ExpandedNode] = Counter()
        quotas: dict[ExpandedNode, int] = {}
        pending = [self.ordered_successors(start, 0, quotas)]
        while pending:
            self.steps_left -= 1
            if self.steps_left < 0:
                raise WalkError(f"step budget of {self.constraints.step_budget} exhausted")
            if not pending[-1]:
                pending.pop()
                visits[path.pop()] -= 1
                continue
            succ = pending[-1].pop()
            if self.cfg.is_measurement_point(succ.block):
                return path + [succ]
            if visits[succ] >= limit:
                continue
            visits[succ] += 1
            path.append(succ)
            pending.append(self.ordered_successors(succ, visits[succ], quotas))
        return None

    def walk(self) -> list[str] | None:
        node = ExpandedNode(self.cfg.entry, EMPTY_STACK)
        steps = [node.block]
        segments = 0
        while segments < self.constraints.max_segments:
            if (
                segments >= self.constraints.min_segments
                and self.rng.random() < STOP_PROBABILITY
            ):
                break
            found = self.segment(node)
            if found is None:
                if segments >= self.constraints.min_segments:
                    break
                return None
            steps.extend(n.block for n in found[1:])
            node = found[-1]
            segments += 1
        return steps


def random_valid_walk(
    cfg: AnnotatedCfg, seed: int, constraints: WalkConstraints = WalkConstraints()
) -> BlockTrace:
    """A random trace from the program entry that obeys call/return matching."""
    rng = random.Random(seed)
    walker = _Walker(cfg, rng, constraints)
    for _ in range(constraints.restarts):
        steps = walker.walk()
        if steps is not None:
            return BlockTrace(tuple(steps))
    raise WalkError(
        f"no walk with at least {constraints.min_segments} segments "
        f"after {constraints.restarts} attempts"
    )
