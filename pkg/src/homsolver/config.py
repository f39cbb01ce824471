"""Run configuration: a frozen dataclass plus file loading and overrides."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class SolveConfig:
    """Everything that can change a run's behaviour, in one place.

    k: arity of the table layer (3 covers every bundled target graph).
    pick_order: scan order of the elimination loop, "lex" or "revlex".
    wnu_node_budget: search nodes for the table-finding backtracker.
    oracle_node_budget: None means unbounded exact search.
    validator_frequency: "boundary" validates at phase entry/exit and after
        every removal; "off" disables in-run validation.
    seed: base seed for anything randomized downstream.
    inject_fault: test hook; "retarget-corrupt" spoils the first table
        retarget so the validators must catch it.
    """

    k: int = 3
    pick_order: str = "lex"
    wnu_node_budget: int = 200_000
    oracle_node_budget: Optional[int] = None
    validator_frequency: str = "boundary"
    seed: int = 0
    inject_fault: Optional[str] = None

    def __post_init__(self):
        if self.k < 2 or self.k > 4:
            raise ValueError("k must be 2, 3 or 4")
        if self.pick_order not in ("lex", "revlex"):
            raise ValueError("pick_order must be lex or revlex")
        if self.validator_frequency not in ("boundary", "off"):
            raise ValueError("validator_frequency must be boundary or off")
        if self.inject_fault not in (None, "retarget-corrupt"):
            raise ValueError("unknown inject_fault value")

    def to_json(self) -> str:
        return json.dumps(
            dataclasses.asdict(self), sort_keys=True, separators=(",", ":")
        )

    def replace(self, **changes) -> "SolveConfig":
        return dataclasses.replace(self, **changes)


def load_config(path: Optional[str] = None, **overrides) -> SolveConfig:
    """Config from a JSON file (all keys optional) plus keyword overrides;
    overrides win.  Unknown keys are rejected."""
    known = {f.name for f in dataclasses.fields(SolveConfig)}
    merged = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError("config file must hold a JSON object")
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        merged.update(data)
    for key, value in overrides.items():
        if key not in known:
            raise ValueError(f"unknown config key: {key}")
        if value is not None:
            merged[key] = value
    return SolveConfig(**merged)
