from __future__ import annotations

from typing import NamedTuple, Sequence

from counter_attest.cfg.enums import EdgeKind
from counter_attest.cfg.model import AnnotatedCfg, Edge


class Frame(NamedTuple):
    call_site: str
    callee: str


# Bottom to top; the empty stack is top-level code of the entry function
CallStack = tuple[Frame, ...]

EMPTY_STACK: CallStack = ()


def current_function(cfg: AnnotatedCfg, stack: CallStack) -> str:
    if stack:
        return stack[-1].callee
    return cfg.blocks[cfg.entry].function


def follow_edge(cfg: AnnotatedCfg, stack: CallStack, edge: Edge) -> CallStack | None:
    """
    Returns the call stack after taking the edge, or None if the call/return
    discipline forbids the edge under the given stack.
    """
    if cfg.is_call(edge):
        return stack + (Frame(edge.source, cfg.blocks[edge.target].function),)
    if edge.kind != EdgeKind.RETURN:
        return stack
    if not stack:
        return None
    call_site, _ = stack[-1]
    caller_function = cfg.blocks[call_site].function
    if cfg.blocks[edge.target].function != caller_function:
        return None
    return_sites = {
        e.return_to
        for e in cfg.out_edges(call_site)
        if cfg.is_call(e) and e.return_to is not None
    }
    if return_sites and edge.target not in return_sites:
        return None
    return stack[:-1]


def replay_stack(
    cfg: AnnotatedCfg, steps: Sequence[str], stack: CallStack
) -> CallStack | None:
    """
    Replays the call discipline along the steps; None if some transition is
    not an edge or violates call/return matching.
    """
    for source, target in zip(steps, steps[1:]):
        next_stack = None
        for edge in cfg.out_edges(source):
            if edge.target == target:
                next_stack = follow_edge(cfg, stack, edge)
                if next_stack is not None:
                    break
        if next_stack is None:
            return None
        stack = next_stack
    return stack


def stack_to_json(stack: CallStack) -> list[list[str]]:
    return [[frame.call_site, frame.callee] for frame in stack]


def stack_from_json(value: Sequence[Sequence[str]]) -> CallStack:
    return tuple(Frame(call_site, callee) for call_site, callee in value)
