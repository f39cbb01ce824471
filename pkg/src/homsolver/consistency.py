"""Unary and binary image lists plus the arc/pair consistency fixpoints.

Lists only ever shrink.  Binary lists live in one boolean tensor of shape
(n, n, h, h) kept transpose-symmetric: (a, b) allowed for (x, y) iff (b, a)
is allowed for (y, x).  The diagonal (x, x) holds only equal pairs, so unary
lists can always be recovered as diagonal projections.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .common import sha256_hex
from .digraph import Digraph


@dataclass(frozen=True)
class EmptyListSignal:
    """Some list emptied; witness is (x,) for a unary list, (x, y) for a pair."""

    witness: tuple


class ListAssignment:
    """Per-vertex image lists with optional pair tracking."""

    __slots__ = ("g_size", "h_size", "pair_tracking_enabled", "_unary", "_pairs")

    def __init__(
        self,
        g_size: int,
        h_size: int,
        lists: Optional[Iterable[Iterable[int]]] = None,
        pair_tracking: bool = True,
    ):
        self.g_size = g_size
        self.h_size = h_size
        self.pair_tracking_enabled = pair_tracking
        if lists is None:
            self._unary = [set(range(h_size)) for _ in range(g_size)]
        else:
            self._unary = [set(values) for values in lists]
            if len(self._unary) != g_size:
                raise ValueError("need one list per vertex")
            for x, values in enumerate(self._unary):
                if any(not (0 <= a < h_size) for a in values):
                    raise ValueError(f"list of {x} has out-of-range values")
        self._pairs = None

    @classmethod
    def full(cls, g: Digraph, h: Digraph, pair_tracking: bool = True):
        return cls(g.n, h.n, pair_tracking=pair_tracking)

    # -- unary access ------------------------------------------------------

    def get(self, x: int) -> set:
        """Live set of allowed images; callers must not mutate it."""
        return self._unary[x]

    def sorted_list(self, x: int) -> tuple:
        return tuple(sorted(self._unary[x]))

    def contains(self, x: int, a: int) -> bool:
        return a in self._unary[x]

    def remove_unary(self, x: int, a: int) -> None:
        self._unary[x].discard(a)
        if self._pairs is not None:
            self._pairs[x, :, a, :] = False
            self._pairs[:, x, :, a] = False

    def total_size(self) -> int:
        return sum(len(s) for s in self._unary)

    def empty_vertex(self) -> Optional[int]:
        for x in range(self.g_size):
            if not self._unary[x]:
                return x
        return None

    # -- pair access -------------------------------------------------------

    @property
    def pairs_allocated(self) -> bool:
        return self._pairs is not None

    def ensure_pairs(self, g: Digraph, h: Digraph) -> None:
        """Allocate pair lists on first use: unary products, arc-filtered,
        equal pairs only on the diagonal.  A later call is a no-op, so pair
        knowledge never regrows."""
        if not self.pair_tracking_enabled or self._pairs is not None:
            return
        n, hs = self.g_size, self.h_size
        member = np.zeros((n, hs), dtype=bool)
        for x in range(n):
            member[x, sorted(self._unary[x])] = True
        pairs = member[:, None, :, None] & member[None, :, None, :]
        for x in range(n):
            pairs[x, x] &= np.eye(hs, dtype=bool)
        arc_h = arc_matrix(h)
        for u, v in g.sorted_arcs():
            pairs[u, v] &= arc_h
        # mirror every orientation constraint
        pairs &= pairs.transpose(1, 0, 3, 2)
        self._pairs = pairs

    def pair_allowed(self, x: int, y: int, a: int, b: int) -> bool:
        if self._pairs is None:
            return a in self._unary[x] and b in self._unary[y]
        return bool(self._pairs[x, y, a, b])

    def pair_matrix(self, x: int, y: int) -> np.ndarray:
        return self._pairs[x, y]

    @property
    def pair_tensor(self) -> Optional[np.ndarray]:
        return self._pairs

    def pair_true_count(self) -> int:
        return 0 if self._pairs is None else int(self._pairs.sum())

    # -- bookkeeping -------------------------------------------------------

    def copy(self) -> "ListAssignment":
        dup = ListAssignment(
            self.g_size,
            self.h_size,
            lists=[set(s) for s in self._unary],
            pair_tracking=self.pair_tracking_enabled,
        )
        if self._pairs is not None:
            dup._pairs = self._pairs.copy()
        return dup

    def digest(self) -> str:
        body = ";".join(
            ",".join(map(str, sorted(s))) for s in self._unary
        ).encode("utf-8")
        if self._pairs is not None:
            body += self._pairs.tobytes()
        return sha256_hex(body)

    def to_json(self, include_pairs: bool = False) -> dict:
        doc = {
            "version": 1,
            "h_size": self.h_size,
            "unary": [sorted(s) for s in self._unary],
        }
        if include_pairs and self._pairs is not None:
            pair_doc = {}
            for x in range(self.g_size):
                for y in range(self.g_size):
                    entries = np.argwhere(self._pairs[x, y])
                    pair_doc[f"{x},{y}"] = [[int(a), int(b)] for a, b in entries]
            doc["pairs"] = pair_doc
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "ListAssignment":
        if doc.get("version") != 1:
            raise ValueError("unsupported list document version")
        return cls(len(doc["unary"]), doc["h_size"], lists=doc["unary"])

    def __repr__(self):
        return f"ListAssignment(g={self.g_size}, h={self.h_size}, size={self.total_size()})"


def arc_matrix(h: Digraph) -> np.ndarray:
    m = np.zeros((h.n, h.n), dtype=bool)
    for u, v in h.arcs:
        m[u, v] = True
    return m


def arc_consistency(g: Digraph, h: Digraph, lists: ListAssignment):
    """Worklist arc consistency; mutates lists, returns EmptyListSignal or None.

    The fixpoint is order-independent, so the worklist order only affects
    which witness an infeasible instance reports first.
    """
    x0 = lists.empty_vertex()
    if x0 is not None:
        return EmptyListSignal((x0,))
    out_sets = [h.out_neighbors(a) for a in range(h.n)]
    in_sets = [h.in_neighbors(a) for a in range(h.n)]

    queue = deque()
    seen = set()

    def push(kind, target, support):
        item = (kind, target, support)
        if item not in seen:
            seen.add(item)
            queue.append(item)

    for u, v in g.sorted_arcs():
        push("out", u, v)
        push("in", v, u)

    while queue:
        kind, target, support = queue.popleft()
        seen.discard((kind, target, support))
        dom = lists.get(target)
        sup = lists.get(support)
        if kind == "out":
            doomed = [a for a in sorted(dom) if not (out_sets[a] & sup)]
        else:
            doomed = [a for a in sorted(dom) if not (in_sets[a] & sup)]
        if not doomed:
            continue
        for a in doomed:
            lists.remove_unary(target, a)
        if not lists.get(target):
            return EmptyListSignal((target,))
        for z in g.out_sorted(target):
            push("in", z, target)
        for z in g.in_sorted(target):
            push("out", z, target)
    return None


def pair_consistency(g: Digraph, h: Digraph, lists: ListAssignment):
    """Pair consistency to fixpoint over every composition vertex z.

    Requires allocated pair lists.  Afterwards unary lists equal their
    diagonal projections.  Mutates lists, returns EmptyListSignal or None.
    """
    if not lists.pairs_allocated:
        raise ValueError("pair lists must be allocated before pair consistency")
    pairs = lists.pair_tensor
    n = lists.g_size
    while True:
        # composition sweeps until no pair dies
        while True:
            before = int(pairs.sum())
            for z in range(n):
                left = pairs[:, z].astype(np.uint8)[:, None, :, :]
                right = pairs[z, :].astype(np.uint8)[None, :, :, :]
                pairs &= np.matmul(left, right) > 0
            if int(pairs.sum()) == before:
                break
        alive = pairs.any(axis=(2, 3))
        if not alive.all():
            x, y = map(int, np.argwhere(~alive)[0])
            return EmptyListSignal((x, y))
        # unary lists re-projected from pair diagonals
        removed = False
        for x in range(n):
            diag = pairs[x, x]
            for a in lists.sorted_list(x):
                if not diag[a, a]:
                    lists.remove_unary(x, a)
                    removed = True
            if not lists.get(x):
                return EmptyListSignal((x,))
        if not removed:
            return None


def preprocess(g: Digraph, h: Digraph, lists: ListAssignment):
    """Arc consistency and pair consistency iterated to their joint fixpoint."""
    while True:
        unary_before = lists.total_size()
        pairs_before = lists.pair_true_count()
        signal = arc_consistency(g, h, lists)
        if signal is not None:
            return signal
        if not lists.pair_tracking_enabled:
            if lists.total_size() == unary_before:
                return None
            continue
        lists.ensure_pairs(g, h)
        signal = pair_consistency(g, h, lists)
        if signal is not None:
            return signal
        if (
            lists.total_size() == unary_before
            and lists.pair_true_count() == pairs_before
        ):
            return None
