from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from counter_attest.cfg.vectors import add_vectors
from counter_attest.hpc.counters import BOARD3, CounterConfig, project
from counter_attest.hpc.events import default_event_table
from counter_attest.hpc.exceptions import CounterConfigError, NondeterministicCounterError

COUNTERS = ("branches", "jal", "jalr", "loads")

vectors = st.lists(st.integers(0, 1000), min_size=4, max_size=4).map(tuple)


class TestParse:
    def test_identity(self) -> None:
        config = CounterConfig.identity(COUNTERS)
        assert project(config, (5, 2, 1, 9)) == (5, 2, 1, 9)
        assert config.labels == COUNTERS

    def test_composite(self) -> None:
        config = CounterConfig.parse("branches+jal+jalr", COUNTERS)
        assert config.dimension == 1
        assert config.composites == ((0, 1, 2),)
        assert project(config, (5, 2, 1, 0)) == (8,)

    def test_board3_preset(self) -> None:
        table = default_event_table()
        config = CounterConfig.parse("board3", table.counter_names, table.deterministic)
        assert config == CounterConfig.parse(BOARD3, table.counter_names)
        assert config.labels == (
            "instructions_retired",
            "cond_branches_retired+jal_retired+jalr_retired",
            "int_loads_retired",
        )
        # add, beq, lw
        assert config.project(table.block_vector(["add", "beq", "lw"])) == (3, 1, 1)

    def test_all_keeps_deterministic_counters(self) -> None:
        table = default_event_table()
        config = CounterConfig.parse("all", table.counter_names, table.deterministic)
        assert config.dimension == 17
        assert "pipeline_stalls" not in config.labels

    def test_nondeterministic_refused(self) -> None:
        table = default_event_table()
        with pytest.raises(NondeterministicCounterError, match="l1d_cache_misses"):
            CounterConfig.parse(
                "instructions_retired,l1d_cache_misses",
                table.counter_names,
                table.deterministic,
            )

    def test_unknown_counter(self) -> None:
        with pytest.raises(CounterConfigError, match="Unknown counter cycles"):
            CounterConfig.parse("branches,cycles", COUNTERS)

    def test_labels_parse_back(self) -> None:
        config = CounterConfig.parse("loads, branches+jalr", COUNTERS)
        assert CounterConfig.parse(",".join(config.labels), COUNTERS) == config


class TestProjection:
    @given(vectors, vectors)
    @settings(deadline=None)
    def test_commutes_with_addition(self, a: tuple[int, ...], b: tuple[int, ...]) -> None:
        config = CounterConfig.parse("branches+jal,loads", COUNTERS)
        assert config.project(add_vectors(a, b)) == add_vectors(
            config.project(a), config.project(b)
        )

    @given(vectors)
    @settings(deadline=None)
    def test_composition(self, v: tuple[int, ...]) -> None:
        inner = CounterConfig.parse("branches,jal+jalr,loads", COUNTERS)
        outer = CounterConfig(inner.labels, ((0, 1),))
        composed = inner.compose(outer)
        assert outer.project(inner.project(v)) == composed.project(v)
        assert composed.labels == ("branches+jal+jalr",)

    def test_compose_mismatch(self) -> None:
        inner = CounterConfig.parse("branches,loads", COUNTERS)
        with pytest.raises(CounterConfigError):
            inner.compose(CounterConfig.identity(COUNTERS))
