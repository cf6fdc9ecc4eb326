from __future__ import annotations

import base64
import hashlib
import json
from pathlib import Path
from typing import Any

CHUNK_SIZE = 32 * 2**10


def _encode(hasher: hashlib.blake2b) -> str:
    # Digest length is constant, so the padding carries no information
    return base64.urlsafe_b64encode(hasher.digest()).decode().rstrip("=")


def get_file_blake2b(path: Path) -> str:
    hasher = hashlib.blake2b()
    with path.open("rb") as f:
        while chunk := f.read(CHUNK_SIZE):
            hasher.update(chunk)
    return _encode(hasher)


def get_string_blake2b(s: str) -> str:
    return _encode(hashlib.blake2b(s.encode("utf-8")))


def canonical_json(value: Any) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"))


def get_object_blake2b(value: Any) -> str:
    """
    Digest of a JSON-compatible object; independent of key order and whitespace.
    """
    return get_string_blake2b(canonical_json(value))
