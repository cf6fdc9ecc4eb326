from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from counter_attest.attacks.enums import MutationKind
from counter_attest.attacks.mutations import MutationSpec
from counter_attest.cfg.vectors import CounterVector
from counter_attest.manifest.exceptions import InvalidManifestException
from counter_attest.preprocess.segments import PreprocessBudgets
from counter_attest.tracesim.walk import WalkConstraints
from counter_attest.utils.hashing import get_file_blake2b, get_object_blake2b


@dataclass(frozen=True)
class ProgramConfig:
    cfg_path: Path | None
    demo: str | None
    demo_params: Mapping[str, Any] = field(default_factory=dict)
    trace_path: Path | None = None


@dataclass(frozen=True)
class HpcConfig:
    # None selects the bundled event table
    table_path: Path | None
    counters: str
    offset: CounterVector | None = None


@dataclass(frozen=True)
class WalkConfig:
    seed: int
    constraints: WalkConstraints


@dataclass(frozen=True)
class AttackConfig:
    kinds: tuple[MutationKind, ...]
    # 0 keeps each kind's default
    repetitions: int
    seed: int

    @property
    def specs(self) -> list[MutationSpec]:
        return [MutationSpec(kind, self.repetitions, self.seed) for kind in self.kinds]


@dataclass(frozen=True)
class RunManifest:
    name: str
    program: ProgramConfig
    hpc: HpcConfig
    walk: WalkConfig
    budgets: PreprocessBudgets
    attack: AttackConfig
    _toml_path: Path

    @property
    def toml_path(self) -> Path:
        return self._toml_path

    @property
    def data_hash(self) -> str:
        """Digest of the manifest's meaning, including the content of referenced files."""

        def file_hash(path: Path | None) -> str | None:
            return None if path is None else get_file_blake2b(path)

        jsonable_object = {
            "program": {
                "cfg": file_hash(self.program.cfg_path),
                "demo": self.program.demo,
                "demo_params": dict(self.program.demo_params),
                "trace": file_hash(self.program.trace_path),
            },
            "hpc": {
                "table": file_hash(self.hpc.table_path),
                "counters": self.hpc.counters,
                "offset": None if self.hpc.offset is None else list(self.hpc.offset),
            },
            "walk": {
                "seed": self.walk.seed,
                "min_segments": self.walk.constraints.min_segments,
                "max_segments": self.walk.constraints.max_segments,
                "max_loop_iterations": self.walk.constraints.max_loop_iterations,
            },
            "budgets": {
                "paths": self.budgets.paths,
                "cycles": self.budgets.cycles,
                "nodes": self.budgets.nodes,
            },
            "attack": {
                "kinds": [k.value for k in self.attack.kinds],
                "repetitions": self.attack.repetitions,
                "seed": self.attack.seed,
            },
        }
        return get_object_blake2b(jsonable_object)

    def _validate_program_source(self) -> None:
        if (self.program.cfg_path is None) == (self.program.demo is None):
            raise InvalidManifestException(
                self._toml_path, "Exactly one of program.cfg and program.demo is required"
            )
        if self.program.cfg_path is not None and self.program.demo_params:
            raise InvalidManifestException(
                self._toml_path, "Demo parameters given without program.demo"
            )

    def _validate_no_duplicate_kinds(self) -> None:
        seen: set[MutationKind] = set()
        for kind in self.attack.kinds:
            if kind in seen:
                raise InvalidManifestException(
                    self._toml_path, f"Mutation kind {kind.value} listed twice"
                )
            seen.add(kind)

    def validate(self) -> None:
        self._validate_program_source()
        self._validate_no_duplicate_kinds()
