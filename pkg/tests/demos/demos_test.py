from __future__ import annotations

import random

import pytest

from counter_attest.cfg.loader import load_cfg
from counter_attest.cfg.trace import BlockTrace, validate_trace
from counter_attest.demos.exceptions import DemoParameterError, UnknownDemoError
from counter_attest.demos.programs import DEMOS, build_demo, random_program
from counter_attest.hpc.events import default_event_table
from counter_attest.preprocess.segments import enumerate_segments


class TestDemos:
    @pytest.mark.parametrize("name", sorted(DEMOS))
    def test_trace_is_valid(self, name: str) -> None:
        demo = build_demo(name)
        cfg = load_cfg(demo.document, f"<demo {name}>", default_event_table())
        assert demo.trace[0] == cfg.entry
        assert validate_trace(cfg, BlockTrace(demo.trace), check_calls=True)

    def test_parameters(self) -> None:
        demo = build_demo("loop-ecall", {"iterations": 3})
        assert demo.trace.count("loop_body") == 3
        crypto = build_demo("crypto", {"outer_iterations": 2, "inner_iterations": 2})
        assert len(crypto.trace) < len(build_demo("crypto").trace)

    def test_unknown(self) -> None:
        with pytest.raises(UnknownDemoError, match="Known demos: crypto"):
            build_demo("teleport")

    def test_bad_parameter(self) -> None:
        with pytest.raises(DemoParameterError, match="loop-ecall"):
            build_demo("loop-ecall", {"loops": 3})

    def test_split_variants_bind_their_own_arguments(self) -> None:
        with pytest.raises(DemoParameterError):
            build_demo("fig2", {"iterations": 1})
        assert build_demo("explosion-split", {"diamonds": 6}).trace[-1] == "main_exit"

    @pytest.mark.parametrize("seed", range(10))
    def test_random_program_loads(self, seed: int) -> None:
        demo = random_program(random.Random(seed))
        cfg = load_cfg(demo.document, demo.name, default_event_table())
        assert cfg.is_measurement_point(cfg.entry)
        assert demo.trace == (cfg.entry,)

    def test_random_programs_have_loops(self) -> None:
        table = default_event_table()
        with_loops = 0
        for seed in range(20):
            demo = random_program(random.Random(seed))
            db = enumerate_segments(load_cfg(demo.document, demo.name, table), table)
            with_loops += bool(db.loop_vectors)
        assert with_loops >= 12
