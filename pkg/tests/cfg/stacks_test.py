from __future__ import annotations

import pytest

from counter_attest.cfg.enums import EdgeKind
from counter_attest.cfg.loader import load_cfg
from counter_attest.cfg.model import AnnotatedCfg, Edge
from counter_attest.cfg.stacks import (
    EMPTY_STACK,
    Frame,
    current_function,
    follow_edge,
    replay_stack,
    stack_from_json,
    stack_to_json,
)
from counter_attest.demos.programs import crypto, dyndispatch, hello


@pytest.fixture(name="cfg")
def hello_cfg() -> AnnotatedCfg:
    return load_cfg(hello().document)


class TestStacks:
    def test_call_pushes_frame(self, cfg: AnnotatedCfg) -> None:
        (call,) = cfg.out_edges("main_setup")
        assert follow_edge(cfg, EMPTY_STACK, call) == (Frame("main_setup", "puts"),)

    def test_return_pops_frame(self, cfg: AnnotatedCfg) -> None:
        (ret,) = cfg.out_edges("puts_ret")
        stack = (Frame("main_setup", "puts"),)
        assert follow_edge(cfg, stack, ret) == EMPTY_STACK

    def test_return_without_caller(self, cfg: AnnotatedCfg) -> None:
        (ret,) = cfg.out_edges("puts_ret")
        assert follow_edge(cfg, EMPTY_STACK, ret) is None

    def test_return_to_wrong_site(self, cfg: AnnotatedCfg) -> None:
        stray = Edge("puts_ret", "main_exit", EdgeKind.RETURN)
        assert follow_edge(cfg, (Frame("main_setup", "puts"),), stray) is None

    def test_intraprocedural_edge_keeps_stack(self, cfg: AnnotatedCfg) -> None:
        stack = (Frame("main_setup", "puts"),)
        for edge in cfg.out_edges("puts_char"):
            assert follow_edge(cfg, stack, edge) == stack

    def test_current_function(self, cfg: AnnotatedCfg) -> None:
        assert current_function(cfg, EMPTY_STACK) == "main"
        assert current_function(cfg, (Frame("main_setup", "puts"),)) == "puts"

    def test_replay_canonical_traces(self) -> None:
        for demo in (hello(), crypto(outer_iterations=2), dyndispatch()):
            cfg = load_cfg(demo.document)
            assert replay_stack(cfg, demo.trace, EMPTY_STACK) == EMPTY_STACK, demo.name

    def test_replay_rejects_unmatched_return(self, cfg: AnnotatedCfg) -> None:
        steps = ["puts_entry", "puts_ret", "main_write"]
        assert replay_stack(cfg, steps, EMPTY_STACK) is None
        assert replay_stack(cfg, steps, (Frame("main_setup", "puts"),)) == EMPTY_STACK

    def test_indirect_call(self) -> None:
        cfg = load_cfg(dyndispatch().document)
        stack = replay_stack(cfg, ["main_entry", "dispatch", "on_stat"], EMPTY_STACK)
        assert stack == (Frame("dispatch", "on_stat"),)
        jump = replay_stack(cfg, ["after_dispatch", "table_jump", "case_small"], EMPTY_STACK)
        assert jump == EMPTY_STACK

    def test_json(self) -> None:
        stack = (Frame("a", "f"), Frame("b", "g"))
        assert stack_to_json(stack) == [["a", "f"], ["b", "g"]]
        assert stack_from_json(stack_to_json(stack)) == stack
