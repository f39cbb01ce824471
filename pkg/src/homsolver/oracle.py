"""Exact list-homomorphism solvers used as ground truth.

Nothing here shares code with the main pipeline: the solver is a plain
backtracking search over plain sets, the enumerator is even simpler, and
verify just walks the arc set.  Keep it that way; every other module is
judged against this one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .common import BUDGET_EXHAUSTED
from .digraph import Digraph


class CapExceededError(RuntimeError):
    """Enumeration would exceed the requested cap or the safety guard."""


@dataclass(frozen=True)
class Homomorphism:
    assignment: tuple

    def __call__(self, x: int) -> int:
        return self.assignment[x]


def _domains(g: Digraph, h: Digraph, lists) -> list:
    if lists is None:
        return [set(range(h.n)) for _ in range(g.n)]
    doms = [set(values) for values in lists]
    if len(doms) != g.n:
        raise ValueError("need one list per vertex of g")
    for x, dom in enumerate(doms):
        for a in dom:
            if not (0 <= a < h.n):
                raise ValueError(f"list of {x} has out-of-range value {a}")
    return doms


def _arc_reduce(g: Digraph, h: Digraph, doms: list) -> bool:
    """Arc-consistency fixpoint on plain sets; False on wipeout."""
    arcs = g.sorted_arcs()
    changed = True
    while changed:
        changed = False
        for u, v in arcs:
            dead = {a for a in doms[u] if not (h.out_neighbors(a) & doms[v])}
            if dead:
                doms[u] -= dead
                changed = True
                if not doms[u]:
                    return False
            dead = {b for b in doms[v] if not (h.in_neighbors(b) & doms[u])}
            if dead:
                doms[v] -= dead
                changed = True
                if not doms[v]:
                    return False
    return True


def solve_exact(
    g: Digraph,
    h: Digraph,
    lists: Optional[Sequence] = None,
    node_budget: Optional[int] = None,
):
    """Deterministic backtracking with arc consistency at every node.

    Returns a verified Homomorphism, None when none exists, or
    BUDGET_EXHAUSTED when node_budget ran out.  Variable order is smallest
    domain first (ties by vertex id), value order is numeric.
    """
    doms = _domains(g, h, lists)
    if any(not dom for dom in doms):
        return None
    nodes = 0

    class _Budget(Exception):
        pass

    def backtrack(doms):
        nonlocal nodes
        open_vertices = [x for x in range(g.n) if len(doms[x]) > 1]
        if not open_vertices:
            return Homomorphism(tuple(min(doms[x]) for x in range(g.n)))
        x = min(open_vertices, key=lambda v: (len(doms[v]), v))
        for a in sorted(doms[x]):
            nodes += 1
            if node_budget is not None and nodes > node_budget:
                raise _Budget()
            trial = [set(d) for d in doms]
            trial[x] = {a}
            if _arc_reduce(g, h, trial):
                found = backtrack(trial)
                if found is not None:
                    return found
        return None

    work = [set(d) for d in doms]
    if not _arc_reduce(g, h, work):
        return None
    try:
        found = backtrack(work)
    except _Budget:
        return BUDGET_EXHAUSTED
    if found is not None:
        ok, _ = verify(g, h, found.assignment, lists)
        assert ok, "internal: solver produced an invalid homomorphism"
    return found


def enumerate_all(
    g: Digraph,
    h: Digraph,
    lists: Optional[Sequence] = None,
    cap: Optional[int] = None,
    guard: int = 10**6,
) -> list:
    """Complete enumeration, kept deliberately naive.

    Assigns vertices in id order and checks each choice only against already
    assigned neighbors.  Raises CapExceededError when the raw product space
    exceeds guard (and no cap was given) or more than cap results exist.
    """
    doms = [sorted(d) for d in _domains(g, h, lists)]
    space = math.prod(len(d) for d in doms) if g.n else 1
    if cap is None and space > guard:
        raise CapExceededError(f"product space {space} exceeds guard {guard}")
    found = []
    assignment = [None] * g.n

    def extend(x):
        if x == g.n:
            found.append(Homomorphism(tuple(assignment)))
            if cap is not None and len(found) > cap:
                raise CapExceededError(f"more than cap={cap} homomorphisms")
            return
        for a in doms[x]:
            ok = True
            for y in g.out_neighbors(x):
                if y < x or y == x:
                    b = a if y == x else assignment[y]
                    if not h.has_arc(a, b):
                        ok = False
                        break
            if ok:
                for y in g.in_neighbors(x):
                    if y < x:
                        if not h.has_arc(assignment[y], a):
                            ok = False
                            break
            if ok:
                assignment[x] = a
                extend(x + 1)
                assignment[x] = None

    extend(0)
    return found


def verify(
    g: Digraph, h: Digraph, assignment: Sequence[int], lists=None
):
    """Check a full assignment; returns (ok, witness) with the first failure."""
    if len(assignment) != g.n:
        return False, ("length", len(assignment), g.n)
    for x, a in enumerate(assignment):
        if not (0 <= a < h.n):
            return False, ("range", x)
        if lists is not None and a not in set(lists[x]):
            return False, ("list", x)
    for u, v in g.sorted_arcs():
        if not h.has_arc(assignment[u], assignment[v]):
            return False, ("arc", u, v)
    return True, None
