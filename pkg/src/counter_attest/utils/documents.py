from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Callable, Collection, NoReturn

from counter_attest.exceptions import UserError

ErrorFactory = Callable[[str, str], UserError]


def read_json_file(path: Path, error: ErrorFactory) -> Any:
    try:
        return json.loads(path.read_text())
    except FileNotFoundError as ex:
        raise error(str(path), "File does not exist") from ex
    except json.JSONDecodeError as ex:
        raise error(str(path), f"Failed to parse JSON: {ex}") from ex


class DocumentReader:
    """
    Typed accessors over one JSON object of a structured document.
    Every violation is raised through the supplied error factory so that
    each document kind reports its own exception type.
    """

    def __init__(
        self, value: Any, *, source: str, error: ErrorFactory, where: str = "$"
    ) -> None:
        self.source = source
        self.error = error
        self.where = where
        if not isinstance(value, dict):
            self.fail(f"Expected an object at {where}")
        self.value: dict[str, Any] = value

    def fail(self, message: str) -> NoReturn:
        raise self.error(self.source, message)

    def expect_keys(
        self, required: Collection[str], optional: Collection[str] = ()
    ) -> None:
        missing = sorted(set(required) - self.value.keys())
        if missing:
            self.fail(f"Missing {', '.join(missing)} at {self.where}")
        unknown = sorted(self.value.keys() - set(required) - set(optional))
        if unknown:
            self.fail(f"Unknown key {', '.join(unknown)} at {self.where}")

    def _path(self, key: str) -> str:
        return f"{self.where}.{key}"

    def has(self, key: str) -> bool:
        return key in self.value

    def get_string(self, key: str) -> str:
        value = self.value.get(key)
        if not isinstance(value, str):
            self.fail(f"Expected string at {self._path(key)}")
        return value

    def get_optional_string(self, key: str) -> str | None:
        if self.value.get(key) is None:
            return None
        return self.get_string(key)

    def get_bool(self, key: str, default: bool | None = None) -> bool:
        if key not in self.value and default is not None:
            return default
        value = self.value.get(key)
        if not isinstance(value, bool):
            self.fail(f"Expected boolean at {self._path(key)}")
        return value

    def get_int(self, key: str, *, minimum: int | None = None) -> int:
        return self._check_int(self.value.get(key), self._path(key), minimum)

    def _check_int(self, value: Any, path: str, minimum: int | None) -> int:
        if not isinstance(value, int) or isinstance(value, bool):
            self.fail(f"Expected integer at {path}")
        if minimum is not None and value < minimum:
            self.fail(f"Expected integer >= {minimum} at {path}, got {value}")
        return value

    def get_list(self, key: str) -> list[Any]:
        value = self.value.get(key)
        if not isinstance(value, list):
            self.fail(f"Expected array at {self._path(key)}")
        return value

    def get_string_list(self, key: str) -> list[str]:
        values = self.get_list(key)
        if not all(isinstance(v, str) for v in values):
            self.fail(f"Expected array of strings at {self._path(key)}")
        return values

    def get_int_list(self, key: str, *, minimum: int | None = None) -> list[int]:
        return [
            self._check_int(v, f"{self._path(key)}[{i}]", minimum)
            for i, v in enumerate(self.get_list(key))
        ]

    def get_mapping(self, key: str) -> dict[str, Any]:
        value = self.value.get(key)
        if not isinstance(value, dict):
            self.fail(f"Expected object at {self._path(key)}")
        return value

    def children(self, key: str) -> list[DocumentReader]:
        return [
            DocumentReader(
                item,
                source=self.source,
                error=self.error,
                where=f"{self._path(key)}[{i}]",
            )
            for i, item in enumerate(self.get_list(key))
        ]
