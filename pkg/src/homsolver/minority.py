"""Final solving phase driven by a ternary table with cancellation laws.

Once the elimination loop has run to exhaustion, every surviving pattern
tuple maps to its odd coordinate.  Collapsing the middle coordinates then
yields a ternary operation m with m(c, d, d) = m(d, d, c) = c on every list,
and the instance is decided by a split-and-recurse procedure on pairs of
candidate values.  The procedure re-runs consistency after each removal so
its own precondition (pair lists in sync with unary lists) keeps holding;
without that step it returns wrong answers on directed cycles.
"""

from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .common import FalsificationError, FalsificationEvent
from .chom import SENTINEL, ConsistentHom, validate_all
from .consistency import ListAssignment, preprocess
from .digraph import Digraph, Direction, OrientedWalk
from .polymorphism import coordinate_matrix, tuple_index
from .oracle import Homomorphism


class NotMinorityError(ValueError):
    """The tables do not send every pattern tuple to its odd coordinate."""

    def __init__(self, witness):
        super().__init__(f"minority condition fails at {witness!r}")
        self.witness = witness


class CongruenceMismatchError(ValueError):
    def __init__(self, witness):
        super().__init__(f"walk composition mismatch at {witness!r}")
        self.witness = witness


class MaltsevHom:
    """Per-vertex ternary tables satisfying the cancellation laws on lists."""

    __slots__ = ("hom",)

    def __init__(self, hom: ConsistentHom):
        if hom.k != 3:
            raise ValueError("ternary tables required")
        self.hom = hom

    @property
    def g_size(self) -> int:
        return self.hom.g_size

    @property
    def h_size(self) -> int:
        return self.hom.h_size

    def apply(self, y: int, c: int, d: int, e: int) -> int:
        return self.hom.apply(y, (c, d, e))

    def digest(self) -> str:
        return self.hom.digest()

    def restricted(self, sub_sets, old_ids) -> "MaltsevHom":
        """Mask-only restriction; unlike the elimination phase no closure is
        demanded, images may leave the sub lists."""
        hs = self.hom.h_size
        coords = coordinate_matrix(hs, 3)
        tables = []
        for new_y, old_y in enumerate(old_ids):
            member = np.zeros(hs, dtype=bool)
            member[sorted(sub_sets[new_y])] = True
            valid = member[coords].all(axis=0)
            table = self.hom.tables[old_y].copy()
            table[~valid] = SENTINEL
            tables.append(table)
        return MaltsevHom(ConsistentHom(3, len(old_ids), hs, tables))


def derive_maltsev(
    hom: ConsistentHom, g: Digraph, h: Digraph, lists: ListAssignment
) -> MaltsevHom:
    """Collapse the k-ary tables to ternary ones.

    Checks the pattern-to-odd-coordinate condition first (raising
    NotMinorityError with a witness when it fails), then verifies the
    cancellation laws and the list and adjacency properties of the result.
    """
    k = hom.k
    if k < 3:
        raise ValueError("collapse needs arity at least 3")
    hs = hom.h_size
    for x in range(g.n):
        live = lists.sorted_list(x)
        for a in live:
            for b in live:
                value = hom.apply(x, (b,) * (k - 1) + (a,))
                if value != a:
                    raise NotMinorityError((x, a, b, value))
    tables = []
    for x in range(g.n):
        table = np.full(hs**3, SENTINEL, dtype=np.int16)
        live = lists.sorted_list(x)
        for a, b, c in itertools.product(live, repeat=3):
            value = hom.apply(x, (a,) + (b,) * (k - 2) + (c,))
            table[tuple_index(hs, (a, b, c))] = value
        tables.append(table)
    mh = MaltsevHom(ConsistentHom(3, g.n, hs, tables))
    for x in range(g.n):
        live = lists.sorted_list(x)
        for c in live:
            for d in live:
                if mh.apply(x, c, d, d) != c:
                    raise NotMinorityError((x, "right-cancel", c, d))
                if mh.apply(x, d, d, c) != c:
                    raise NotMinorityError((x, "left-cancel", c, d))
    report = validate_all(mh.hom, g, h, lists)
    if not (report.list_ok and report.adjacency_ok):
        raise NotMinorityError(("validation", report.witnesses[:2]))
    return mh


# -- pair components ----------------------------------------------------------


@dataclass(frozen=True)
class PairComponent:
    """Reachability component of the candidate-pair graph rooted at (x,a,b).

    Vertices are triples (y, c, d); at the pick vertex only the two anchor
    triples (x, a, b) and (x, b, a) participate, elsewhere both coordinates
    must be co-possible with the respective anchor value.  invertible means
    the two anchors reach each other.
    """

    root: tuple
    vertices: frozenset
    invertible: bool


def _pair_vertex_ok(lists, x, a, b, y, c, d) -> bool:
    if y == x:
        return (c, d) in ((a, b), (b, a))
    return lists.pair_allowed(x, y, a, c) and lists.pair_allowed(x, y, b, d)


def _pair_neighbors(g, h, lists, x, a, b, y, c, d):
    """Arcs of the candidate-pair graph, tagged with the realized arc of g."""
    for y2 in g.out_sorted(y):
        live = lists.get(y2)
        for c2 in sorted(h.out_neighbors(c) & live):
            for d2 in sorted(h.out_neighbors(d) & live):
                if h.has_arc(c, d2):
                    continue
                if _pair_vertex_ok(lists, x, a, b, y2, c2, d2):
                    yield (y2, c2, d2), (y, y2)
    for y2 in g.in_sorted(y):
        live = lists.get(y2)
        for c2 in sorted(h.in_neighbors(c) & live):
            for d2 in sorted(h.in_neighbors(d) & live):
                if h.has_arc(d2, c):
                    continue
                if _pair_vertex_ok(lists, x, a, b, y2, c2, d2):
                    yield (y2, c2, d2), (y2, y)


def _pair_reach(g, h, lists, x, a, b, start) -> frozenset:
    seen = {start}
    queue = deque([start])
    while queue:
        y, c, d = queue.popleft()
        for nxt, _arc in _pair_neighbors(g, h, lists, x, a, b, y, c, d):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return frozenset(seen)


def image_pair_component(
    g: Digraph, h: Digraph, lists: ListAssignment, x: int, a: int, b: int
) -> PairComponent:
    forward = _pair_reach(g, h, lists, x, a, b, (x, a, b))
    invertible = False
    if (x, b, a) in forward:
        backward = _pair_reach(g, h, lists, x, a, b, (x, b, a))
        invertible = (x, a, b) in backward
    return PairComponent((x, a, b), forward, invertible)


# -- the split-and-recurse decision procedure ---------------------------------


def _component_subinstance(g, h, lists, mh, comp) -> tuple:
    """Sub-instance for a non-invertible pair: project the component.

    The pick vertex keeps the singleton list {a}; every other projected
    vertex collects the first coordinates of its component triples, and arcs
    are those of g realized by some component arc.
    """
    x, a, b = comp.root
    sub_sets_by_old = {x: {a}}
    arcs = set()
    for y, c, d in sorted(comp.vertices):
        if y != x:
            sub_sets_by_old.setdefault(y, set()).add(c)
        for nxt, arc in _pair_neighbors(g, h, lists, x, a, b, y, c, d):
            if nxt in comp.vertices:
                arcs.add(arc)
    verts = sorted(sub_sets_by_old)
    sub_g, old_ids = g.induced(verts)
    index = {old: new for new, old in enumerate(old_ids)}
    kept = frozenset(
        (index[u], index[v]) for u, v in arcs if u in index and v in index
    )
    sub_g = Digraph(sub_g.n, kept)
    sub_sets = [sub_sets_by_old[old] for old in old_ids]
    return sub_g, sub_sets, old_ids


def _shortest_inverting_path(g, h, lists, x, a, b) -> Optional[list]:
    """Shortest walk (x,a,b,b) -> (x,b,b,a) in the undirected triple product,
    list-respecting, with no intermediate visit to the pick vertex."""
    start = (x, a, b, b)
    goal = (x, b, b, a)

    def neighbors(node):
        y, c, d, e = node
        for y2 in g.out_sorted(y):
            live = lists.get(y2)
            for c2 in sorted(h.out_neighbors(c) & live):
                for d2 in sorted(h.out_neighbors(d) & live):
                    for e2 in sorted(h.out_neighbors(e) & live):
                        yield (y2, c2, d2, e2)
        for y2 in g.in_sorted(y):
            live = lists.get(y2)
            for c2 in sorted(h.in_neighbors(c) & live):
                for d2 in sorted(h.in_neighbors(d) & live):
                    for e2 in sorted(h.in_neighbors(e) & live):
                        yield (y2, c2, d2, e2)

    parent = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        for nxt in neighbors(node):
            if nxt in parent:
                continue
            if nxt == goal:
                path = [goal, node]
                while parent[path[-1]] is not None:
                    path.append(parent[path[-1]])
                path.reverse()
                return path
            if nxt[0] == x:
                continue
            parent[nxt] = node
            queue.append(nxt)
    return None


def _path_subinstance(g, h, lists, mh, comp) -> tuple:
    """Sub-instance for an invertible pair: a shortest inverting walk carries
    composed images, the rest of the component contributes as usual."""
    x, a, b = comp.root
    path = _shortest_inverting_path(g, h, lists, x, a, b)
    if path is None:
        raise FalsificationError(
            FalsificationEvent(
                "inverting-path-missing", {"x": x, "a": a, "b": b}
            )
        )
    path_arcs = set()
    for node, nxt in zip(path, path[1:]):
        y1, c1, d1, e1 = node
        y2, c2, d2, e2 = nxt
        if (
            g.has_arc(y1, y2)
            and h.has_arc(c1, c2)
            and h.has_arc(d1, d2)
            and h.has_arc(e1, e2)
        ):
            path_arcs.add((y1, y2))
        elif (
            g.has_arc(y2, y1)
            and h.has_arc(c2, c1)
            and h.has_arc(d2, d1)
            and h.has_arc(e2, e1)
        ):
            path_arcs.add((y2, y1))
        else:
            raise FalsificationError(
                FalsificationEvent(
                    "inverting-path-broken", {"from": list(node), "to": list(nxt)}
                )
            )
    path_vertices = {node[0] for node in path}
    sub_sets_by_old = {x: {a}}
    for node in path:
        y, c, d, e = node
        value = mh.apply(y, c, d, e)
        if not lists.contains(y, value):
            raise FalsificationError(
                FalsificationEvent(
                    "composed-image-outside-list",
                    {"y": y, "triple": [c, d, e], "value": value},
                )
            )
        if y == x:
            if value != a:
                raise FalsificationError(
                    FalsificationEvent(
                        "cancellation-breach", {"y": y, "value": value, "a": a}
                    )
                )
            continue
        sub_sets_by_old.setdefault(y, set()).add(value)
    comp_arcs = set()
    for y, c, d in sorted(comp.vertices):
        if y != x and y not in path_vertices:
            sub_sets_by_old.setdefault(y, set()).add(c)
        for nxt, arc in _pair_neighbors(g, h, lists, x, a, b, y, c, d):
            if nxt in comp.vertices:
                comp_arcs.add(arc)
    verts = sorted(sub_sets_by_old)
    keep = set(path_arcs)
    for u, v in comp_arcs:
        if u not in path_vertices and v not in path_vertices:
            keep.add((u, v))
    sub_g, old_ids = g.induced(verts)
    index = {old: new for new, old in enumerate(old_ids)}
    kept = frozenset(
        (index[u], index[v]) for u, v in keep if u in index and v in index
    )
    sub_g = Digraph(sub_g.n, kept)
    sub_sets = [sub_sets_by_old[old] for old in old_ids]
    return sub_g, sub_sets, old_ids


def maltsev_solve(
    g: Digraph,
    h: Digraph,
    lists: ListAssignment,
    mh: MaltsevHom,
    depth_budget: int,
    depth: int = 0,
) -> Optional[Homomorphism]:
    """Decide the instance using the ternary tables.

    Splits on the two smallest values of the first non-singleton list: if
    the derived sub-instance (component projection, or inverting-walk
    instance when the pair is invertible) has a solution the second value is
    dropped, otherwise the first.  Consistency is re-established after every
    removal.  Returns a verified assignment or None.
    """
    if depth > depth_budget:
        raise FalsificationError(
            FalsificationEvent("split-depth-exceeded", {"depth": depth})
        )
    if any(not lists.get(x) for x in range(g.n)):
        return None
    while True:
        x = next(
            (v for v in range(g.n) if len(lists.get(v)) >= 2), None
        )
        if x is None:
            break
        a, b = lists.sorted_list(x)[:2]
        comp = image_pair_component(g, h, lists, x, a, b)
        if comp.invertible:
            sub_g, sub_sets, old_ids = _path_subinstance(g, h, lists, mh, comp)
        else:
            sub_g, sub_sets, old_ids = _component_subinstance(
                g, h, lists, mh, comp
            )
        sub_lists = ListAssignment(sub_g.n, h.n, lists=sub_sets)
        sub_mh = mh.restricted(sub_sets, old_ids)
        solved = maltsev_solve(
            sub_g, h, sub_lists, sub_mh, depth_budget, depth + 1
        )
        lists.remove_unary(x, b if solved is not None else a)
        # keep pair lists in step with the removal (see module docstring)
        signal = preprocess(g, h, lists)
        if signal is not None:
            return None
    assignment = tuple(lists.sorted_list(x)[0] for x in range(g.n))
    for u, v in g.sorted_arcs():
        if not h.has_arc(assignment[u], assignment[v]):
            return None
    return Homomorphism(assignment)


# -- walk composition ----------------------------------------------------------


def walk_compose(
    mh: MaltsevHom,
    g: Digraph,
    h: Digraph,
    lists: ListAssignment,
    walk: OrientedWalk,
    first,
    second,
    third,
) -> list:
    """Apply the ternary tables pointwise to three list-respecting lifts of
    the same oriented walk; the result is again such a lift (checked by the
    caller's tests, not here).  Raises CongruenceMismatchError when the
    inputs are not actually congruent lifts."""
    n = len(walk.vertices)
    if not (len(first) == len(second) == len(third) == n):
        raise CongruenceMismatchError(("length", len(first), len(second), len(third), n))
    if not walk.is_walk_in(g):
        raise CongruenceMismatchError(("walk", tuple(walk.vertices)))
    for name, lift in (("first", first), ("second", second), ("third", third)):
        for i, value in enumerate(lift):
            if not lists.contains(walk.vertices[i], value):
                raise CongruenceMismatchError((name, "list", i, value))
        for i, direction in enumerate(walk.directions):
            u, v = lift[i], lift[i + 1]
            if direction is Direction.FORWARD:
                ok = h.has_arc(u, v)
            else:
                ok = h.has_arc(v, u)
            if not ok:
                raise CongruenceMismatchError((name, "arc", i, u, v))
    return [
        mh.apply(walk.vertices[i], first[i], second[i], third[i])
        for i in range(n)
    ]


# -- relational export ---------------------------------------------------------


@dataclass(frozen=True)
class RelationalReduction:
    """The instance recast as tagged-value domain plus one binary relation
    per arc, together with a single combined ternary operation compatible
    with all of them."""

    pairs: tuple
    relations: dict

    def index(self, pair) -> int:
        return self.pairs.index(pair)

    def combined_op(self, mh: MaltsevHom, p, q, r):
        if p[0] == q[0] == r[0]:
            return (p[0], mh.apply(p[0], p[1], q[1], r[1]))
        if p == q:
            return r
        return p

    def to_json(self) -> str:
        return json.dumps(
            {
                "version": 1,
                "pairs": [list(p) for p in self.pairs],
                "relations": {
                    f"{u},{v}": [[list(p), list(q)] for p, q in rel]
                    for (u, v), rel in sorted(self.relations.items())
                },
            },
            sort_keys=True,
            separators=(",", ":"),
        )


def relational_reduction(
    g: Digraph, h: Digraph, lists: ListAssignment
) -> RelationalReduction:
    pairs = tuple(
        (x, value) for x in range(g.n) for value in lists.sorted_list(x)
    )
    relations = {}
    for u, v in g.sorted_arcs():
        rel = tuple(
            ((u, p), (v, q))
            for p in lists.sorted_list(u)
            for q in lists.sorted_list(v)
            if h.has_arc(p, q)
        )
        relations[(u, v)] = rel
    return RelationalReduction(pairs, relations)
