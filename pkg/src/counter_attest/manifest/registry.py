from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterator

from counter_attest.manifest.exceptions import (
    NameCollisionException,
    UnknownManifestException,
)
from counter_attest.manifest.file_matching import is_manifest_file
from counter_attest.manifest.parser import RunManifestParser
from counter_attest.manifest.run_manifest import RunManifest


@dataclass(frozen=True)
class ManifestEntry:
    name: str
    toml_path: Path
    parser: RunManifestParser

    @property
    def manifest(self) -> RunManifest:
        return self.parser.parsed


class ManifestRegistry:
    """
    Experiment manifests found anywhere below a root directory, keyed by
    name. Manifests are only parsed in full when requested.
    """

    def __init__(self, root_path: Path) -> None:
        self.root_path = root_path

    @cached_property
    def entries(self) -> dict[str, ManifestEntry]:
        by_name: defaultdict[str, list[ManifestEntry]] = defaultdict(list)
        for path in sorted(p for p in self.root_path.rglob("*.toml") if is_manifest_file(p)):
            parser = RunManifestParser(path)
            by_name[parser.name].append(ManifestEntry(parser.name, path, parser))
        for name, found in by_name.items():
            if len(found) > 1:
                raise NameCollisionException(name, [e.toml_path for e in found])
        return {name: found[0] for name, found in sorted(by_name.items())}

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, name: object) -> bool:
        return name in self.entries

    @property
    def names(self) -> Iterator[str]:
        yield from self.entries

    def get(self, name: str) -> RunManifest:
        try:
            entry = self.entries[name]
        except KeyError:
            raise UnknownManifestException(name, list(self.entries)) from None
        return entry.manifest
