from __future__ import annotations


class UserError(Exception): ...
