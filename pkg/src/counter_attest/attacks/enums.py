from __future__ import annotations

from enum import Enum


class MutationKind(Enum):
    REPLACE_BLOCK = "replace_block"
    REPLACE_UNIQUE = "replace_unique"
    INSERT_UNIQUE = "insert_unique"
    REMOVE_BLOCK = "remove_block"
    RANDOM_CHANGE = "random_change"

    @property
    def is_block_level(self) -> bool:
        return self != MutationKind.RANDOM_CHANGE

    @property
    def default_repetitions(self) -> int:
        if self in (MutationKind.REPLACE_BLOCK, MutationKind.REPLACE_UNIQUE):
            return 1000
        return 100
