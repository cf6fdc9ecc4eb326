from __future__ import annotations

from enum import Enum


class EdgeKind(Enum):
    FALLTHROUGH = "fallthrough"
    BRANCH = "branch"
    CALL = "call"
    RETURN = "return"
    INDIRECT = "indirect"
