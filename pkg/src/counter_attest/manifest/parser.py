from __future__ import annotations

import re
import tomllib
from functools import cached_property
from pathlib import Path
from typing import Any, Iterator, Mapping

from counter_attest.attacks.enums import MutationKind
from counter_attest.cfg.vectors import CounterVector
from counter_attest.manifest.exceptions import InvalidManifestException
from counter_attest.manifest.file_matching import name_from_file_name
from counter_attest.manifest.run_manifest import (
    AttackConfig,
    HpcConfig,
    ProgramConfig,
    RunManifest,
    WalkConfig,
)
from counter_attest.preprocess.segments import PreprocessBudgets
from counter_attest.tracesim.exceptions import WalkError
from counter_attest.tracesim.walk import WalkConstraints

DEFAULT_COUNTERS = "board3"


class FormattingMapping(Mapping[str, str]):
    def __init__(self, parser: RunManifestParser, field: str) -> None:
        super().__init__()
        self.parser = parser
        self.field = field

    def __getitem__(self, name: str) -> str:
        if name == "name":
            return self.parser.name
        raise InvalidManifestException(
            self.parser.toml_path,
            f"Unknown placeholder {name} in {self.field} field",
        )

    def __iter__(self) -> Iterator[str]:
        return iter(["name"])

    def __len__(self) -> int:
        return 1


class RunManifestParser:
    def __init__(self, toml_path: Path) -> None:
        self.toml_path = toml_path

    @cached_property
    def toml_object(self) -> dict:
        try:
            return tomllib.loads(self.toml_path.read_text())
        except tomllib.TOMLDecodeError as ex:
            raise InvalidManifestException(
                self.toml_path, f"Failed to parse TOML: {ex}"
            ) from ex

    @cached_property
    def parsed(self) -> RunManifest:
        result = RunManifest(
            name=self.name,
            program=self.program,
            hpc=self.hpc,
            walk=self.walk,
            budgets=self.budgets,
            attack=self.attack,
            _toml_path=self.toml_path,
        )
        result.validate()
        return result

    def get_name(self) -> str:
        if (explicit_name := self.get_toml_string("general", "name")) is not None:
            return explicit_name
        if (manifest_name := name_from_file_name(self.toml_path)) is not None:
            return manifest_name
        return self.toml_path.parent.name

    @cached_property
    def name(self) -> str:
        result = self.get_name()
        if not re.match(r"^[a-zA-Z0-9_\.-]+$", result):
            raise InvalidManifestException(
                self.toml_path,
                f"Invalid manifest name {result}. Must consist of english alphanumeric "
                f"characters, underscores, hyphens and dots",
            )
        return result

    # Program

    @property
    def program(self) -> ProgramConfig:
        return ProgramConfig(
            cfg_path=self.get_toml_path("program", "cfg", must_exist=True),
            demo=self.get_toml_string("program", "demo"),
            demo_params=self.demo_params,
            trace_path=self.get_toml_path("program", "trace", must_exist=True),
        )

    @property
    def demo_params(self) -> dict[str, Any]:
        params = self.get_toml_value("program", "params")
        if params is None:
            return {}
        if not isinstance(params, dict):
            raise InvalidManifestException(self.toml_path, "Invalid program.params section")
        for key, value in params.items():
            if not isinstance(value, (bool, int)):
                raise InvalidManifestException(
                    self.toml_path, f"Demo parameter {key} must be an integer or a boolean"
                )
        return dict(params)

    # Counters

    @property
    def hpc(self) -> HpcConfig:
        return HpcConfig(
            table_path=self.table_path,
            counters=self.get_toml_string("hpc", "counters") or DEFAULT_COUNTERS,
            offset=self.offset,
        )

    @property
    def table_path(self) -> Path | None:
        table = self.get_toml_string("hpc", "table")
        if table is None or table == "default":
            return None
        return self.get_toml_path("hpc", "table", must_exist=True)

    @property
    def offset(self) -> CounterVector | None:
        value = self.get_toml_value("hpc", "offset")
        if value is None:
            return None
        if not isinstance(value, list) or not all(
            isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in value
        ):
            raise InvalidManifestException(
                self.toml_path, "Expected list of nonnegative integers at hpc.offset"
            )
        return tuple(value)

    # Walks and budgets

    @property
    def walk(self) -> WalkConfig:
        defaults = WalkConstraints()
        try:
            constraints = WalkConstraints(
                min_segments=self.get_int_or("walk", "min_segments", defaults.min_segments),
                max_segments=self.get_int_or("walk", "max_segments", defaults.max_segments),
                max_loop_iterations=self.get_int_or(
                    "walk", "max_loop_iterations", defaults.max_loop_iterations
                ),
            )
        except WalkError as ex:
            raise InvalidManifestException(self.toml_path, str(ex)) from ex
        return WalkConfig(seed=self.get_int_or("walk", "seed", 0), constraints=constraints)

    @property
    def budgets(self) -> PreprocessBudgets:
        defaults = PreprocessBudgets()
        return PreprocessBudgets(
            paths=self.get_int_or("budgets", "paths", defaults.paths, minimum=1),
            cycles=self.get_int_or("budgets", "cycles", defaults.cycles, minimum=1),
            nodes=self.get_int_or("budgets", "nodes", defaults.nodes, minimum=1),
        )

    # Attacks

    @property
    def attack(self) -> AttackConfig:
        return AttackConfig(
            kinds=self.mutation_kinds,
            repetitions=self.get_int_or("attack", "reps", 0),
            seed=self.get_int_or("attack", "seed", 0),
        )

    @property
    def mutation_kinds(self) -> tuple[MutationKind, ...]:
        names = self.get_toml_list_of_strings("attack", "kinds")
        if names is None:
            return tuple(MutationKind)
        if not names:
            raise InvalidManifestException(self.toml_path, "attack.kinds can't be empty")
        try:
            return tuple(MutationKind(n) for n in names)
        except ValueError as ex:
            raise InvalidManifestException(
                self.toml_path, f"Unknown mutation kind in attack.kinds: {ex}"
            ) from ex

    # TOML extraction helpers

    def augment_value(self, value: str, field: str) -> str:
        return value.format_map(FormattingMapping(self, field))

    def resolve_path(self, value: str, *, field: str) -> Path:
        return self.toml_path.parent / self.augment_value(value, field)

    def get_toml_value(self, *path: str) -> Any | None:
        try:
            value = self.toml_object
            for key in path:
                if not isinstance(value, dict):
                    raise InvalidManifestException(
                        self.toml_path,
                        f"Unexpected file structure. Failed to obtain {'.'.join(path)}",
                    )
                value = value[key]
            return value
        except KeyError:
            return None

    def get_toml_string(self, *path: str) -> str | None:
        value = self.get_toml_value(*path)
        if value is None:
            return None
        if not isinstance(value, str):
            raise InvalidManifestException(
                self.toml_path, f"Expected string at {'.'.join(path)}"
            )
        return value

    def get_toml_int(self, *path: str, minimum: int = 0) -> int | None:
        value = self.get_toml_value(*path)
        if value is None:
            return None
        # TOML booleans are not integers here
        if not isinstance(value, int) or isinstance(value, bool):
            raise InvalidManifestException(
                self.toml_path, f"Expected integer at {'.'.join(path)}"
            )
        if value < minimum:
            raise InvalidManifestException(
                self.toml_path, f"Expected integer >= {minimum} at {'.'.join(path)}"
            )
        return value

    def get_int_or(self, section: str, key: str, default: int, *, minimum: int = 0) -> int:
        value = self.get_toml_int(section, key, minimum=minimum)
        return default if value is None else value

    def get_toml_path(self, *path_parts: str, must_exist: bool = False) -> Path | None:
        value = self.get_toml_string(*path_parts)
        if value is None:
            return None
        path = self.resolve_path(value, field=".".join(path_parts))
        if must_exist and not path.exists():
            raise InvalidManifestException(self.toml_path, f"Path {path} does not exist")
        return path

    def get_toml_list_of_strings(self, *path: str) -> list[str] | None:
        value = self.get_toml_value(*path)
        if value is None:
            return None
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise InvalidManifestException(
                self.toml_path, f"Expected list of strings at {'.'.join(path)}"
            )
        return value
