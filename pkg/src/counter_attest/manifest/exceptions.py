from __future__ import annotations

from pathlib import Path
from typing import Sequence

from counter_attest.exceptions import UserError


class ManifestException(UserError): ...


class InvalidManifestException(ManifestException):
    def __init__(self, toml_path: Path, message: str) -> None:
        super().__init__(f"Invalid manifest at {toml_path}: {message}")


class NameCollisionException(ManifestException):
    def __init__(self, name: str, paths: Sequence[Path]) -> None:
        listed = ", ".join(str(p) for p in paths)
        super().__init__(f"Experiment name {name} is claimed by several manifests: {listed}")
        self.name = name
        self.paths = tuple(paths)


class UnknownManifestException(ManifestException, KeyError):
    def __init__(self, name: str, known: Sequence[str]) -> None:
        available = ", ".join(known) if known else "none"
        super().__init__(f"No manifest named {name}. Available: {available}")
        self.name = name

    def __str__(self) -> str:
        return str(self.args[0])
