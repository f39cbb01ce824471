"""Shared sentinels, falsification records, and digest helpers."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any


class BudgetExhausted:
    """Marker for searches stopped by a node budget (unknown outcome).

    Distinct from None, which callers reserve for exhaustive refutation.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "BUDGET_EXHAUSTED"

    def __bool__(self):
        return False


BUDGET_EXHAUSTED = BudgetExhausted()


@dataclass(frozen=True)
class FalsificationEvent:
    """A runtime check failure with enough data to re-verify the violation.

    kind names the check that failed (role names, stable across versions);
    details holds JSON-serializable witness data.
    """

    kind: str
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"kind": self.kind, "details": _jsonable(self.details)}


class FalsificationError(Exception):
    """Raised when an internal claim check fails; carries the event."""

    def __init__(self, event: FalsificationEvent):
        super().__init__(event.kind)
        self.event = event


def _jsonable(value: Any):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, set, frozenset)):
        items = list(value)
        if isinstance(value, (set, frozenset)):
            items = sorted(items, key=repr)
        return [_jsonable(v) for v in items]
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    return repr(value)


def stable_json(payload) -> str:
    """Canonical JSON used everywhere a byte-stable artifact is required."""
    return json.dumps(_jsonable(payload), sort_keys=True, separators=(",", ":"))


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def digest_of(payload) -> str:
    return sha256_hex(stable_json(payload).encode("utf-8"))
