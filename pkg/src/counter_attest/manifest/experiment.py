from __future__ import annotations

from functools import cached_property

from counter_attest.attacks.evaluation import EvaluationReport, evaluate
from counter_attest.cfg.exceptions import InvalidTraceError
from counter_attest.cfg.loader import cfg_digest, load_cfg, load_cfg_file
from counter_attest.cfg.model import AnnotatedCfg
from counter_attest.cfg.trace import BlockTrace, Measurement, load_trace_file, validate_trace
from counter_attest.demos.builder import Demo
from counter_attest.demos.programs import build_demo
from counter_attest.hpc.counters import CounterConfig
from counter_attest.hpc.events import EventTable, get_event_table
from counter_attest.manifest.run_manifest import RunManifest
from counter_attest.preprocess.database import SegmentDatabase
from counter_attest.preprocess.segments import enumerate_segments
from counter_attest.tracesim.simulate import measure
from counter_attest.tracesim.walk import random_valid_walk
from counter_attest.verifier.exceptions import DigestMismatchError


class ManifestRun:
    """Everything a manifest describes, materialized lazily."""

    def __init__(self, manifest: RunManifest) -> None:
        self.manifest = manifest

    @cached_property
    def table(self) -> EventTable:
        return get_event_table(self.manifest.hpc.table_path)

    @cached_property
    def demo(self) -> Demo | None:
        program = self.manifest.program
        if program.demo is None:
            return None
        return build_demo(program.demo, program.demo_params)

    @cached_property
    def cfg(self) -> AnnotatedCfg:
        if self.demo is not None:
            return load_cfg(self.demo.document, f"<demo {self.demo.name}>", self.table)
        assert self.manifest.program.cfg_path is not None
        return load_cfg_file(self.manifest.program.cfg_path, self.table)

    @cached_property
    def counter_config(self) -> CounterConfig:
        return CounterConfig.parse(
            self.manifest.hpc.counters, self.cfg.counters, self.table.deterministic
        )

    @cached_property
    def trace(self) -> BlockTrace:
        trace_path = self.manifest.program.trace_path
        if trace_path is not None:
            cfg_ref, trace = load_trace_file(trace_path)
            if cfg_ref != cfg_digest(self.cfg):
                raise DigestMismatchError(f"trace {trace_path}", cfg_digest(self.cfg), cfg_ref)
            source = str(trace_path)
        elif self.demo is not None:
            trace, source = BlockTrace(self.demo.trace), f"<demo {self.demo.name}>"
        else:
            walk = self.manifest.walk
            trace = random_valid_walk(self.cfg, walk.seed, walk.constraints)
            source = f"<walk seed {walk.seed}>"
        if not validate_trace(self.cfg, trace, check_calls=True):
            raise InvalidTraceError(source)
        return trace

    @cached_property
    def database(self) -> SegmentDatabase:
        return enumerate_segments(self.cfg, self.table, self.manifest.budgets)

    @property
    def measurements(self) -> list[Measurement]:
        return measure(
            self.cfg, self.table, self.counter_config, self.trace, self.manifest.hpc.offset
        )

    def evaluate(self) -> EvaluationReport:
        return evaluate(
            self.cfg,
            self.database,
            self.table,
            self.trace,
            self.manifest.attack.specs,
            self.counter_config,
            offset=self.manifest.hpc.offset,
            experiment=self.manifest.name,
        )
