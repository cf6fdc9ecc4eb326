from __future__ import annotations

import io
import json
from functools import cache
from typing import Any

from rich.console import Console, RenderableType


@cache
def get_console() -> Console:
    # stdout is reserved for reports so that they stay byte-identical
    return Console(stderr=True)


def rich_print(value: str) -> None:
    get_console().print(value, highlight=False)


def render_plain(renderable: RenderableType, width: int = 160) -> str:
    buffer = io.StringIO()
    console = Console(
        file=buffer,
        width=width,
        color_system=None,
        force_terminal=False,
        highlight=False,
    )
    console.print(renderable)
    return buffer.getvalue()


def dump_json(value: Any) -> str:
    return json.dumps(value, sort_keys=True, indent=2) + "\n"
