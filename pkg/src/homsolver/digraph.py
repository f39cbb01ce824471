"""Immutable digraphs, level assignments, oriented walks, and instance generators.

Vertices are dense ints 0..n-1.  Loops are allowed, parallel arcs are not
(arc storage is a set).  Everything downstream assumes Digraph values never
mutate after construction.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .common import sha256_hex


class NotBalancedError(ValueError):
    """The digraph admits no level assignment (a cycle has nonzero net-length)."""


class LevelMismatchError(ValueError):
    """Joined components disagree on level count."""


class FormatError(ValueError):
    """Malformed text input; carries the offending 1-based line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class Direction(Enum):
    FORWARD = 1
    BACKWARD = -1


class Digraph:
    """Directed graph with O(1) arc membership and per-vertex adjacency sets."""

    __slots__ = ("n", "arcs", "_out", "_in", "_out_sorted", "_in_sorted")

    def __init__(self, n: int, arcs: Iterable[tuple[int, int]] = ()):
        if n < 0:
            raise ValueError("vertex count must be nonnegative")
        self.n = n
        arc_set = set()
        out = [set() for _ in range(n)]
        inc = [set() for _ in range(n)]
        for u, v in arcs:
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"arc ({u}, {v}) out of range for n={n}")
            arc_set.add((u, v))
            out[u].add(v)
            inc[v].add(u)
        self.arcs = frozenset(arc_set)
        self._out = tuple(frozenset(s) for s in out)
        self._in = tuple(frozenset(s) for s in inc)
        self._out_sorted = tuple(tuple(sorted(s)) for s in out)
        self._in_sorted = tuple(tuple(sorted(s)) for s in inc)

    def has_arc(self, u: int, v: int) -> bool:
        return (u, v) in self.arcs

    def out_neighbors(self, u: int) -> frozenset:
        return self._out[u]

    def in_neighbors(self, u: int) -> frozenset:
        return self._in[u]

    def out_sorted(self, u: int) -> tuple:
        return self._out_sorted[u]

    def in_sorted(self, u: int) -> tuple:
        return self._in_sorted[u]

    @property
    def arc_count(self) -> int:
        return len(self.arcs)

    def sorted_arcs(self) -> tuple:
        return tuple(sorted(self.arcs))

    def adjacency_mirror_ok(self) -> bool:
        """Full re-scan: adjacency sets exactly mirror the arc set."""
        rebuilt = {(u, v) for u in range(self.n) for v in self._out[u]}
        rebuilt_in = {(u, v) for v in range(self.n) for u in self._in[v]}
        return rebuilt == self.arcs == rebuilt_in

    def induced(self, vertices: Iterable[int]) -> tuple["Digraph", list]:
        """Induced subgraph reindexed to 0..m-1; returns (graph, old_ids).

        old_ids[new] = old; vertices are taken in sorted order so the
        reindexing is deterministic.
        """
        old_ids = sorted(set(vertices))
        index = {old: new for new, old in enumerate(old_ids)}
        arcs = [
            (index[u], index[v])
            for (u, v) in self.arcs
            if u in index and v in index
        ]
        return Digraph(len(old_ids), arcs), old_ids

    def digest(self) -> str:
        body = f"{self.n};" + ",".join(f"{u}-{v}" for u, v in self.sorted_arcs())
        return sha256_hex(body.encode("utf-8"))

    def __eq__(self, other):
        return (
            isinstance(other, Digraph)
            and self.n == other.n
            and self.arcs == other.arcs
        )

    def __hash__(self):
        return hash((self.n, self.arcs))

    def __repr__(self):
        return f"Digraph(n={self.n}, m={self.arc_count})"


@dataclass(frozen=True)
class OrientedWalk:
    """A walk u0, u1, ... with an explicit direction for every step.

    FORWARD at step i means the host arc (u_i, u_{i+1}), BACKWARD means
    (u_{i+1}, u_i).
    """

    vertices: tuple
    directions: tuple

    def __post_init__(self):
        if len(self.vertices) == 0:
            raise ValueError("walk needs at least one vertex")
        if len(self.directions) != len(self.vertices) - 1:
            raise ValueError("need exactly one direction per step")

    def __len__(self):
        return len(self.directions)

    @property
    def net_length(self) -> int:
        return sum(d.value for d in self.directions)

    def is_walk_in(self, g: Digraph) -> bool:
        for i, d in enumerate(self.directions):
            u, v = self.vertices[i], self.vertices[i + 1]
            arc = (u, v) if d is Direction.FORWARD else (v, u)
            if arc not in g.arcs:
                return False
        return True


def is_congruent(w1: OrientedWalk, w2: OrientedWalk) -> bool:
    """Two walks are congruent when their direction sequences agree."""
    return w1.directions == w2.directions


@dataclass(frozen=True)
class LeveledDigraph:
    """A digraph plus a level map where every arc rises by exactly one."""

    base: Digraph
    level: tuple

    def __post_init__(self):
        if len(self.level) != self.base.n:
            raise ValueError("level map must cover every vertex")
        for u, v in self.base.arcs:
            if self.level[v] != self.level[u] + 1:
                raise ValueError(f"arc ({u}, {v}) does not rise by one level")

    @property
    def level_count(self) -> int:
        if not self.level:
            return 0
        return max(self.level) + 1


def compute_levels(g: Digraph) -> LeveledDigraph:
    """Assign levels by propagation over weak components, minimum 0 per component.

    Raises NotBalancedError when some oriented cycle has nonzero net-length.
    """
    level = [None] * g.n
    for start in range(g.n):
        if level[start] is not None:
            continue
        level[start] = 0
        component = [start]
        queue = [start]
        while queue:
            u = queue.pop()
            for v in g.out_sorted(u):
                if level[v] is None:
                    level[v] = level[u] + 1
                    component.append(v)
                    queue.append(v)
                elif level[v] != level[u] + 1:
                    raise NotBalancedError(f"conflict at arc ({u}, {v})")
            for v in g.in_sorted(u):
                if level[v] is None:
                    level[v] = level[u] - 1
                    component.append(v)
                    queue.append(v)
                elif level[v] != level[u] - 1:
                    raise NotBalancedError(f"conflict at arc ({v}, {u})")
        lowest = min(level[u] for u in component)
        for u in component:
            level[u] -= lowest
    return LeveledDigraph(g, tuple(level))


def apex_join(h1: Digraph, h2: Digraph) -> Digraph:
    """Disjoint union of two balanced digraphs plus a fresh apex vertex with
    arcs to every lowest-level vertex of both parts.

    The apex gets id n1+n2.  Raises LevelMismatchError when the two parts
    disagree on level count, NotBalancedError when either is not balanced.
    """
    l1 = compute_levels(h1)
    l2 = compute_levels(h2)
    if l1.level_count != l2.level_count:
        raise LevelMismatchError(
            f"level counts differ: {l1.level_count} vs {l2.level_count}"
        )
    n1, n2 = h1.n, h2.n
    apex = n1 + n2
    arcs = list(h1.arcs)
    arcs += [(u + n1, v + n1) for u, v in h2.arcs]
    arcs += [(apex, u) for u in range(n1) if l1.level[u] == 0]
    arcs += [(apex, u + n1) for u in range(n2) if l2.level[u] == 0]
    return Digraph(apex + 1, arcs)


def apex_join_instance(g: Digraph) -> Digraph:
    """Add one fresh vertex with arcs to every lowest-level vertex of g."""
    lv = compute_levels(g)
    apex = g.n
    arcs = list(g.arcs)
    arcs += [(apex, u) for u in range(g.n) if lv.level[u] == 0]
    return Digraph(apex + 1, arcs)


def gen_random_digraph(n: int, arc_prob: float, seed: int) -> Digraph:
    """Each ordered pair (u, v), loops included, becomes an arc independently."""
    rng = random.Random(f"digraph:{seed}")
    arcs = [
        (u, v)
        for u in range(n)
        for v in range(n)
        if rng.random() < arc_prob
    ]
    return Digraph(n, arcs)


def gen_balanced(n: int, levels: int, arc_prob: float, seed: int) -> LeveledDigraph:
    """Random balanced digraph: arcs only between consecutive levels.

    Every level is nonempty, which requires n >= levels.
    """
    if levels < 1:
        raise ValueError("need at least one level")
    if n < levels:
        raise ValueError("need n >= levels so every level is nonempty")
    rng = random.Random(f"balanced:{seed}")
    level = [i for i in range(levels)]
    level += [rng.randrange(levels) for _ in range(n - levels)]
    arcs = [
        (u, v)
        for u in range(n)
        for v in range(n)
        if level[v] == level[u] + 1 and rng.random() < arc_prob
    ]
    return LeveledDigraph(Digraph(n, arcs), tuple(level))


def load_digraph_text(text: str) -> Digraph:
    """Parse the two-part text format: first line "n m", then m lines "u v"."""
    lines = text.splitlines()
    if not lines:
        raise FormatError(1, "empty input")
    head = lines[0].split()
    if len(head) != 2:
        raise FormatError(1, "expected header 'n m'")
    try:
        n, m = int(head[0]), int(head[1])
    except ValueError:
        raise FormatError(1, "header fields must be integers") from None
    if n < 0 or m < 0:
        raise FormatError(1, "header fields must be nonnegative")
    arcs = []
    seen = set()
    lineno = 1
    for raw in lines[1:]:
        lineno += 1
        if not raw.strip():
            continue
        parts = raw.split()
        if len(parts) != 2:
            raise FormatError(lineno, "expected 'u v'")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise FormatError(lineno, "arc endpoints must be integers") from None
        if not (0 <= u < n and 0 <= v < n):
            raise FormatError(lineno, f"vertex id out of range 0..{n - 1}")
        if (u, v) in seen:
            raise FormatError(lineno, f"duplicate arc ({u}, {v})")
        seen.add((u, v))
        arcs.append((u, v))
    if len(arcs) != m:
        raise FormatError(lineno, f"header promised {m} arcs, found {len(arcs)}")
    return Digraph(n, arcs)


def dump_digraph_text(g: Digraph) -> str:
    lines = [f"{g.n} {g.arc_count}"]
    lines += [f"{u} {v}" for u, v in g.sorted_arcs()]
    return "\n".join(lines) + "\n"


def directed_cycle(length: int) -> Digraph:
    """All-forward cycle 0 -> 1 -> ... -> length-1 -> 0."""
    return Digraph(length, [(i, (i + 1) % length) for i in range(length)])


def oriented_cycle(pattern: Sequence[Direction]) -> Digraph:
    """Cycle on len(pattern) vertices with per-step orientations."""
    n = len(pattern)
    arcs = []
    for i, d in enumerate(pattern):
        j = (i + 1) % n
        arcs.append((i, j) if d is Direction.FORWARD else (j, i))
    return Digraph(n, arcs)
