"""The evolving k-ary homomorphism tables kept consistent with image lists.

Per vertex x the table stores a value for every k-tuple over the current
list of x, densely over all of V(H)^k with -1 marking out-of-list tuples.
Lists only shrink, so masking never has to be undone.  Every mutation that
retargets values goes through bulk_retarget and lands in an append-only
change log, which is what makes later falsification replay possible.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .common import sha256_hex
from .consistency import ListAssignment, arc_matrix
from .digraph import Digraph
from .polymorphism import (
    PolymorphismTable,
    coordinate_matrix,
    pattern_indices,
    tuple_index,
)

SENTINEL = -1


class NotClosedError(ValueError):
    """Restriction target list is not closed under the table (or not a subset)."""

    def __init__(self, witness):
        super().__init__(f"restriction violation at {witness}")
        self.witness = witness


@dataclass(frozen=True)
class ValidationReport:
    list_ok: bool
    adjacency_ok: bool
    weak_nu_ok: bool
    witnesses: tuple = ()

    @property
    def passed(self) -> bool:
        return self.list_ok and self.adjacency_ok and self.weak_nu_ok


@dataclass(frozen=True)
class ClosureResult:
    """Least superset of the seed closed under the table at one vertex.

    order lists the non-seed elements in insertion order; trace maps each of
    them to one generating k-tuple whose components all precede it.
    """

    closed: frozenset
    order: tuple
    trace: dict


class ConsistentHom:
    """Dense tables f_x over V(H)^k with sentinel masking, one per vertex."""

    __slots__ = ("k", "g_size", "h_size", "tables", "change_log")

    def __init__(self, k: int, g_size: int, h_size: int, tables):
        self.k = k
        self.g_size = g_size
        self.h_size = h_size
        self.tables = tables
        self.change_log = []

    @classmethod
    def blank(cls, k: int, g_size: int, h_size: int) -> "ConsistentHom":
        tables = [
            np.full(h_size**k, SENTINEL, dtype=np.int16) for _ in range(g_size)
        ]
        return cls(k, g_size, h_size, tables)

    def copy(self) -> "ConsistentHom":
        dup = ConsistentHom(
            self.k, self.g_size, self.h_size, [t.copy() for t in self.tables]
        )
        return dup

    def apply(self, x: int, args: Sequence[int]) -> int:
        value = int(self.tables[x][tuple_index(self.h_size, args)])
        if value == SENTINEL:
            raise ValueError(f"tuple {tuple(args)} is outside the list of {x}")
        return value

    def valid_mask(self, x: int) -> np.ndarray:
        return self.tables[x] != SENTINEL

    def masked_values(self, x: int) -> set:
        """Current list of x as recorded by the mask (diagonal tuples)."""
        hs = self.h_size
        out = set()
        for a in range(hs):
            if self.tables[x][tuple_index(hs, (a,) * self.k)] != SENTINEL:
                out.add(a)
        return out

    def value_exists(self, x: int, value: int) -> bool:
        return bool((self.tables[x] == value).any())

    def remask(self, lists: ListAssignment) -> None:
        """Push list shrinkage into the tables; never unmasks."""
        coords = coordinate_matrix(self.h_size, self.k)
        for x in range(self.g_size):
            member = np.zeros(self.h_size, dtype=bool)
            member[sorted(lists.get(x))] = True
            valid = member[coords].all(axis=0)
            self.tables[x][~valid] = SENTINEL

    def bulk_retarget(self, x: int, old: int, new: int) -> int:
        """Move every valid tuple of x with value old to new; returns count."""
        if old == new:
            raise ValueError("retarget requires old != new")
        hits = np.nonzero(self.tables[x] == old)[0]
        for idx in hits:
            self.change_log.append((x, int(idx), old, new))
        self.tables[x][hits] = new
        return len(hits)

    def closure(self, x: int, seed) -> ClosureResult:
        """Close a seed set under the table at x, recording generator tuples."""
        closed = set(seed)
        order = []
        trace = {}
        frontier = True
        while frontier:
            frontier = False
            for tup in itertools.product(sorted(closed), repeat=self.k):
                value = int(self.tables[x][tuple_index(self.h_size, tup)])
                if value == SENTINEL:
                    raise ValueError(
                        f"closure left the valid region at {x}: {tup}"
                    )
                if value not in closed:
                    closed.add(value)
                    order.append(value)
                    trace[value] = tup
                    frontier = True
        return ClosureResult(frozenset(closed), tuple(order), trace)

    def digest(self) -> str:
        body = b"".join(t.tobytes() for t in self.tables)
        return sha256_hex(bytes([self.k]) + body)

    def dump_text(self) -> str:
        lines = []
        for x in range(self.g_size):
            for idx in np.nonzero(self.valid_mask(x))[0]:
                tup = _decode(self.h_size, self.k, int(idx))
                lines.append(f"{x} {','.join(map(str, tup))} {self.tables[x][idx]}")
        return "\n".join(lines) + "\n"


def _decode(h_size: int, k: int, idx: int) -> tuple:
    out = []
    for _ in range(k):
        out.append(idx % h_size)
        idx //= h_size
    return tuple(reversed(out))


def init_from_phi(
    g: Digraph, h: Digraph, phi: PolymorphismTable, lists: ListAssignment
) -> ConsistentHom:
    """Start every vertex table as phi restricted to the current lists."""
    hom = ConsistentHom.blank(phi.k, g.n, h.n)
    base = np.array(phi.table, dtype=np.int16)
    for x in range(g.n):
        hom.tables[x] = base.copy()
    hom.remask(lists)
    report = validate_all(hom, g, h, lists)
    if not report.passed:
        raise ValueError(f"phi is not consistent at init: {report.witnesses[:1]}")
    return hom


def restrict(
    hom: ConsistentHom,
    sub_lists: Sequence,
    old_ids: Optional[Sequence[int]] = None,
) -> ConsistentHom:
    """Fresh hom over sub_lists (reindexed via old_ids when given).

    Raises NotClosedError unless every target list is a subset of the source
    mask and closed under the table.
    """
    if old_ids is None:
        old_ids = list(range(len(sub_lists)))
    hs = hom.h_size
    tables = []
    coords = coordinate_matrix(hs, hom.k)
    for new_y, old_y in enumerate(old_ids):
        allowed = set(sub_lists[new_y])
        source_values = hom.masked_values(old_y)
        if not allowed <= source_values:
            raise NotClosedError((old_y, tuple(sorted(allowed - source_values))))
        for tup in itertools.product(sorted(allowed), repeat=hom.k):
            value = int(hom.tables[old_y][tuple_index(hs, tup)])
            if value not in allowed:
                raise NotClosedError((old_y, tup, value))
        member = np.zeros(hs, dtype=bool)
        member[sorted(allowed)] = True
        valid = member[coords].all(axis=0)
        table = hom.tables[old_y].copy()
        table[~valid] = SENTINEL
        tables.append(table)
    return ConsistentHom(hom.k, len(old_ids), hs, tables)


def validate_all(
    hom: ConsistentHom, g: Digraph, h: Digraph, lists: ListAssignment,
    witness_cap: int = 8,
) -> ValidationReport:
    """Check the list, adjacency, and pattern-agreement properties over the
    current lists (the lists are authoritative, not the mask)."""
    hs, k = hom.h_size, hom.k
    coords = coordinate_matrix(hs, k)
    members = []
    valids = []
    for x in range(g.n):
        member = np.zeros(hs, dtype=bool)
        member[sorted(lists.get(x))] = True
        members.append(member)
        valids.append(member[coords].all(axis=0))
    witnesses = []

    list_ok = True
    for x in range(g.n):
        vals = hom.tables[x][valids[x]]
        if vals.size == 0:
            continue
        bad = (vals < 0) | ~members[x][np.clip(vals, 0, hs - 1)]
        if bad.any():
            list_ok = False
            idxs = np.nonzero(valids[x])[0][bad]
            for idx in idxs[:2]:
                witnesses.append(
                    ("list", x, _decode(hs, k, int(idx)), int(hom.tables[x][idx]))
                )
            if len(witnesses) >= witness_cap:
                break

    arc_h = arc_matrix(h)
    tuple_adj = arc_h
    for _ in range(k - 1):
        tuple_adj = np.kron(tuple_adj, arc_h)
    adjacency_ok = True
    for u, v in g.sorted_arcs():
        fu = np.clip(hom.tables[u], 0, hs - 1)
        fv = np.clip(hom.tables[v], 0, hs - 1)
        image_arc = arc_h[fu[:, None], fv[None, :]]
        bad = tuple_adj & valids[u][:, None] & valids[v][None, :] & ~image_arc
        if bad.any():
            adjacency_ok = False
            for i, j in np.argwhere(bad)[:2]:
                witnesses.append(
                    (
                        "adjacency",
                        u,
                        v,
                        _decode(hs, k, int(i)),
                        _decode(hs, k, int(j)),
                        int(hom.tables[u][i]),
                        int(hom.tables[v][j]),
                    )
                )
            if len(witnesses) >= witness_cap:
                break

    pats = pattern_indices(hs, k)
    weak_nu_ok = True
    for x in range(g.n):
        values = hom.tables[x][pats]
        agree = (values == values[:, :, :1]).all(axis=2)
        in_list = members[x][:, None] & members[x][None, :]
        bad = ~agree & in_list
        np.fill_diagonal(bad, False)
        if bad.any():
            weak_nu_ok = False
            for base, odd in np.argwhere(bad)[:2]:
                witnesses.append(
                    (
                        "weak-nu",
                        x,
                        int(base),
                        int(odd),
                        tuple(int(v) for v in values[base, odd]),
                    )
                )
            if len(witnesses) >= witness_cap:
                break

    return ValidationReport(
        list_ok=list_ok,
        adjacency_ok=adjacency_ok,
        weak_nu_ok=weak_nu_ok,
        witnesses=tuple(witnesses),
    )
