from __future__ import annotations

import re
from pathlib import Path

MANIFEST_FILE_RE = re.compile(r"counter-attest(?:-(?P<suffix>.+))?\.toml$")


def is_manifest_file(path: Path) -> bool:
    return path.is_file() and MANIFEST_FILE_RE.match(path.name) is not None


def name_from_file_name(path: Path) -> str | None:
    """The <name> of counter-attest-<name>.toml; None for a bare counter-attest.toml."""
    match = MANIFEST_FILE_RE.match(path.name)
    return None if match is None else match.group("suffix")
