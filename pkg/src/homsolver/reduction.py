"""The value-elimination engine driven by co-movement tracking.

One outer iteration hunts a vertex x and values a != b whose pattern tuple
maps elsewhere (a candidate for removing a from the list of x), builds two
nested sub-instances over triple-reachability sets, recursively flattens
them, replays the recorded candidate replacement images onto the parent
tables, and finally removes a and re-runs consistency.

The construction is implemented exactly as specified even where its claimed
invariants are known to be breakable; every internal claim is guarded by a
check that converts a breach into a FalsificationEvent instead of silently
corrupting state.  The possible-image store is global across the recursion
and keyed by root-level vertex ids.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .common import FalsificationError, FalsificationEvent, sha256_hex
from .chom import ConsistentHom, NotClosedError, restrict, validate_all
from .consistency import EmptyListSignal, ListAssignment, preprocess
from .digraph import Digraph

DONE = "done"
EMPTY = "empty"
FALSIFIED = "falsified"


class SolveTrace:
    """Append-only event log; equal traces mean equal executions."""

    def __init__(self):
        self.events = []

    def emit(self, name: str, *fields):
        self.events.append((name,) + tuple(fields))

    def digest(self) -> str:
        return sha256_hex(self._body().encode("utf-8"))

    def _body(self) -> str:
        return "\n".join(
            "\t".join(str(f) for f in event) for event in self.events
        )

    def to_text(self, header: dict) -> str:
        lines = [f"# {key} {header[key]}" for key in sorted(header)]
        lines.append(self._body())
        return "\n".join(lines) + "\n"

    @staticmethod
    def parse_text(text: str):
        header = {}
        events = []
        for raw in text.splitlines():
            if not raw.strip():
                continue
            if raw.startswith("# "):
                key, _, value = raw[2:].partition(" ")
                header[key] = value
                continue
            events.append(tuple(raw.split("\t")))
        return header, events


@dataclass
class NMContext:
    """Knobs and counters threaded through the elimination recursion."""

    pick_order: str = "lex"
    validate: bool = True
    depth_budget: int = 10**9
    validations: int = 0
    fault: Optional[str] = None
    _fault_armed: bool = True


@dataclass(frozen=True)
class NMOutcome:
    status: str
    signal: Optional[EmptyListSignal] = None
    event: Optional[FalsificationEvent] = None


@dataclass(frozen=True)
class ReachableSets:
    """Triples (y, a1, a2) tracked from the pick w = (x, b, a).

    full is the wide set (second coordinate free), restricted additionally
    pins the second coordinate at x and filters against co-possibility with
    a itself.  restricted is always a subset of full.
    """

    root: tuple
    full: frozenset
    restricted: frozenset


class PossibleImageStore:
    """Global map (root vertex, value) -> candidate replacement images.

    Entries are overwritten, never merged; the store is deliberately never
    snapshot-restored around recursion.
    """

    def __init__(self):
        self._data = {}

    def get(self, y_root: int, value: int) -> frozenset:
        return self._data.get((y_root, value), frozenset())

    def put(self, y_root: int, value: int, values, bound=None):
        values = frozenset(values)
        if bound is not None and not values <= set(bound):
            raise FalsificationError(
                FalsificationEvent(
                    "store-write-outside-list",
                    {
                        "vertex": y_root,
                        "value": value,
                        "written": sorted(values),
                        "allowed": sorted(bound),
                    },
                )
            )
        self._data[(y_root, value)] = values

    def items(self):
        return sorted(self._data.items())

    def __len__(self):
        return len(self._data)


@dataclass
class SubInstance:
    graph: Digraph
    lists: ListAssignment
    hom: ConsistentHom
    old_ids: list
    root_ids: list
    tag: str = ""


# -- triple reachability ----------------------------------------------------


def _triple_neighbors(g: Digraph, h: Digraph, lists: ListAssignment, y, a1, a2):
    for y2 in g.out_sorted(y):
        live = lists.get(y2)
        for b1 in sorted(h.out_neighbors(a1) & live):
            for b2 in sorted(h.out_neighbors(a2) & live):
                yield (y2, b1, b2)
    for y2 in g.in_sorted(y):
        live = lists.get(y2)
        for b1 in sorted(h.in_neighbors(a1) & live):
            for b2 in sorted(h.in_neighbors(a2) & live):
                yield (y2, b1, b2)


def build_reachable(
    g: Digraph, h: Digraph, lists: ListAssignment, w: tuple
) -> ReachableSets:
    """Both reachability sets from w = (x, b, a) in one go.

    Paths never revisit x except through triples with first coordinate b
    (and, for the restricted set, second coordinate a).  Final membership
    additionally requires co-possibility with the pick: (b, a1) for the wide
    set, plus (a, a2) for the restricted one.
    """
    x, b, a = w

    def bfs(restricted: bool):
        start = (x, b, a)
        seen = {start}
        queue = deque([start])
        while queue:
            y, a1, a2 = queue.popleft()
            for nxt in _triple_neighbors(g, h, lists, y, a1, a2):
                if nxt in seen:
                    continue
                ny, n1, n2 = nxt
                if ny == x:
                    if n1 != b:
                        continue
                    if restricted and n2 != a:
                        continue
                seen.add(nxt)
                queue.append(nxt)
        return seen

    wide = bfs(False)
    narrow = bfs(True)
    full = frozenset(
        t for t in wide if lists.pair_allowed(x, t[0], b, t[1])
    )
    restricted = frozenset(
        t
        for t in narrow
        if lists.pair_allowed(x, t[0], b, t[1])
        and lists.pair_allowed(x, t[0], a, t[2])
    )
    return ReachableSets((x, b, a), full, restricted)


# -- sub-instance construction ----------------------------------------------


def _pattern_tuple(k: int, b: int, a: int) -> tuple:
    return (b,) * (k - 1) + (a,)


def _closure_lists(hom: ConsistentHom, images: dict) -> dict:
    closed = {}
    for y in sorted(images):
        try:
            closed[y] = set(hom.closure(y, images[y]).closed)
        except ValueError:
            raise FalsificationError(
                FalsificationEvent(
                    "closure-left-lists",
                    {"vertex": y, "seed": sorted(images[y])},
                )
            ) from None
    return closed


def _assemble(
    g: Digraph,
    h: Digraph,
    hom: ConsistentHom,
    lists_by_old: dict,
    to_root,
    tag: str,
) -> SubInstance:
    verts = sorted(lists_by_old)
    sub_g, old_ids = g.induced(verts)
    sub_sets = [set(lists_by_old[old]) for old in old_ids]
    sub_lists = ListAssignment(sub_g.n, h.n, lists=sub_sets)
    sub_lists.ensure_pairs(sub_g, h)
    tensor = sub_lists.pair_tensor
    alive = tensor.any(axis=(2, 3))
    if not alive.all():
        xi, yi = map(int, np.argwhere(~alive)[0])
        raise FalsificationError(
            FalsificationEvent(
                "pair-list-empty",
                {"tag": tag, "x": old_ids[xi], "y": old_ids[yi]},
            )
        )
    try:
        sub_hom = restrict(hom, sub_sets, old_ids)
    except NotClosedError as err:
        raise FalsificationError(
            FalsificationEvent("restriction-not-closed", {"witness": repr(err.witness)})
        ) from None
    return SubInstance(
        sub_g,
        sub_lists,
        sub_hom,
        old_ids,
        [to_root[old] for old in old_ids],
        tag=tag,
    )


def small_instance(
    g: Digraph,
    h: Digraph,
    lists: ListAssignment,
    hom: ConsistentHom,
    store: PossibleImageStore,
    reach: ReachableSets,
    to_root,
) -> SubInstance:
    """Narrow sub-instance: images of the restricted triples, closed under
    the tables, with the pick vertex pinned to its current image c."""
    x, b, a = reach.root
    k = hom.k
    c = hom.apply(x, _pattern_tuple(k, b, a))
    triples = reach.restricted
    images = {}
    for y, a1, a2 in sorted(triples):
        images.setdefault(y, set()).add(hom.apply(y, _pattern_tuple(k, a1, a2)))
    closed = _closure_lists(hom, images)
    if closed.get(x) != {c}:
        raise FalsificationError(
            FalsificationEvent(
                "small-pick-list-not-singleton",
                {"x": x, "expected": c, "got": sorted(closed.get(x, ()))},
            )
        )
    by_second = {}
    for y, d, a1 in triples:
        by_second.setdefault((y, a1), set()).add(
            hom.apply(y, _pattern_tuple(k, d, a1))
        )
    for y in sorted(closed):
        for a1 in lists.sorted_list(y):
            store.put(
                to_root[y],
                a1,
                by_second.get((y, a1), frozenset()),
                bound=lists.get(y),
            )
    return _assemble(g, h, hom, closed, to_root, tag="small")


def big_instance(
    g: Digraph,
    h: Digraph,
    lists: ListAssignment,
    hom: ConsistentHom,
    store: PossibleImageStore,
    reach: ReachableSets,
    to_root,
    retarget_map: dict,
) -> SubInstance:
    """Wide sub-instance built after the first retarget pass.

    Restricted triples contribute the updated image of their second
    coordinate; the remaining wide triples contribute their current table
    value.  Runs consistency on the result and checks that the value under
    removal is gone from the pick vertex list.
    """
    x, b, a = reach.root
    k = hom.k
    images = {}
    for y, a1, a2 in sorted(reach.restricted):
        images.setdefault(y, set()).add(retarget_map.get((y, a2), a2))
    for y, a1, a2 in sorted(reach.full - reach.restricted):
        images.setdefault(y, set()).add(hom.apply(y, _pattern_tuple(k, a1, a2)))
    closed = _closure_lists(hom, images)
    by_second = {}
    for y, a1, a2 in reach.full:
        if not lists.pair_allowed(x, y, a, a2):
            by_second.setdefault((y, a2), set()).add(
                hom.apply(y, _pattern_tuple(k, a1, a2))
            )
    for y in sorted(closed):
        for a2 in lists.sorted_list(y):
            if not lists.pair_allowed(x, y, a, a2):
                store.put(
                    to_root[y],
                    a2,
                    by_second.get((y, a2), frozenset()),
                    bound=lists.get(y),
                )
    if a in closed[x]:
        raise FalsificationError(
            FalsificationEvent(
                "big-kept-removed-value", {"x": x, "a": a, "list": sorted(closed[x])}
            )
        )
    sub = _assemble(g, h, hom, closed, to_root, tag="big")
    signal = preprocess(sub.graph, h, sub.lists)
    if signal is not None:
        raise FalsificationError(
            FalsificationEvent(
                "big-preprocess-emptied",
                {"witness": list(signal.witness), "x": x, "a": a, "b": b},
            )
        )
    sub.hom.remask(sub.lists)
    new_x = sub.old_ids.index(x)
    if sub.lists.contains(new_x, a):
        raise FalsificationError(
            FalsificationEvent("big-kept-removed-value", {"x": x, "a": a})
        )
    return sub


# -- retarget propagation ----------------------------------------------------


def propagate_retargets(
    g: Digraph,
    h: Digraph,
    lists: ListAssignment,
    store: PossibleImageStore,
    hom: ConsistentHom,
    x: int,
    a: int,
    to_root,
    trace: SolveTrace,
    ctx: Optional[NMContext] = None,
    depth: int = 0,
) -> dict:
    """Replay stored candidate images onto the tables.

    Finds the nearest store-fixed replacement d for a at x, walks the
    co-movement graph of (vertex, old value, new value) triples depth-first
    from (x, a, d), and retargets every table value old -> new at each
    visited triple.  Returns {(y, old): new} for the mutating visits.
    """

    def successors(y: int, value: int) -> tuple:
        return tuple(
            sorted(store.get(to_root[y], value) & lists.get(y))
        )

    reach_memo = {}

    def reach_from(y: int, value: int) -> frozenset:
        key = (y, value)
        if key not in reach_memo:
            seen = set()
            queue = deque(successors(y, value))
            seen.update(queue)
            while queue:
                v = queue.popleft()
                for nxt in successors(y, v):
                    if nxt not in seen:
                        seen.add(nxt)
                        queue.append(nxt)
            reach_memo[key] = frozenset(seen)
        return reach_memo[key]

    def fixed(y: int, value: int) -> bool:
        return store.get(to_root[y], value) == frozenset({value})

    # nearest fixed replacement: smallest iteration depth, then smallest value
    root_value = None
    layer = successors(x, a)
    seen_vals = set(layer)
    while layer:
        candidates = [v for v in layer if fixed(x, v)]
        if candidates:
            root_value = candidates[0]
            break
        nxt = []
        for v in layer:
            for u in successors(x, v):
                if u not in seen_vals:
                    seen_vals.add(u)
                    nxt.append(u)
        layer = tuple(sorted(nxt))
    if root_value is None:
        raise FalsificationError(
            FalsificationEvent(
                "retarget-root-missing",
                {"x": x, "a": a, "store_at_x": sorted(store.get(to_root[x], a))},
            )
        )

    def qualifies(y: int, c1: int, c2: int) -> bool:
        return (
            lists.contains(y, c1)
            and lists.contains(y, c2)
            and c2 in reach_from(y, c1)
            and fixed(y, c2)
        )

    start = (x, a, root_value)
    visited = {start}
    stack = [start]
    mutated = set()
    retarget_map = {}
    mutations = 0
    while stack:
        y, c1, c2 = stack.pop()
        if c1 != c2:
            target = c2
            if ctx is not None and ctx.fault == "retarget-corrupt" and ctx._fault_armed:
                spoiled = [v for v in lists.sorted_list(y) if v not in (c1, c2)]
                if spoiled:
                    target = spoiled[0]
                    ctx._fault_armed = False
            count = hom.bulk_retarget(y, c1, target)
            if count:
                if (y, c1) in mutated:
                    raise FalsificationError(
                        FalsificationEvent(
                            "retarget-visited-twice", {"y": y, "old": c1}
                        )
                    )
                mutated.add((y, c1))
                retarget_map[(y, c1)] = target
                mutations += count
                trace.emit("retarget", depth, y, c1, target)
        neighbors = []
        for y2 in g.out_sorted(y):
            live = lists.get(y2)
            for d1 in sorted(h.out_neighbors(c1) & live):
                for d2 in sorted(h.out_neighbors(c2) & live):
                    if qualifies(y2, d1, d2):
                        neighbors.append((y2, d1, d2))
        for y2 in g.in_sorted(y):
            live = lists.get(y2)
            for d1 in sorted(h.in_neighbors(c1) & live):
                for d2 in sorted(h.in_neighbors(c2) & live):
                    if qualifies(y2, d1, d2):
                        neighbors.append((y2, d1, d2))
        for nxt in reversed(neighbors):
            if nxt not in visited:
                visited.add(nxt)
                stack.append(nxt)
    trace.emit("update-run", x, a, root_value, mutations)
    return retarget_map


# -- the outer loop -----------------------------------------------------------


def _find_pick(g: Digraph, lists: ListAssignment, hom: ConsistentHom, order: str):
    k = hom.k
    xs = range(g.n) if order == "lex" else range(g.n - 1, -1, -1)
    for x in xs:
        values = lists.sorted_list(x)
        if order != "lex":
            values = tuple(reversed(values))
        for a in values:
            if not hom.value_exists(x, a):
                continue
            for b in values:
                if b == a:
                    continue
                c = hom.apply(x, _pattern_tuple(k, b, a))
                if c != a:
                    return x, a, b, c
    return None


def _falsified(trace: SolveTrace, event: FalsificationEvent) -> NMOutcome:
    trace.emit("falsified", event.kind)
    return NMOutcome(FALSIFIED, event=event)


def remove_nm(
    g: Digraph,
    h: Digraph,
    lists: ListAssignment,
    hom: ConsistentHom,
    store: PossibleImageStore,
    trace: SolveTrace,
    ctx: NMContext,
    depth: int = 0,
    to_root=None,
) -> NMOutcome:
    """Run the elimination loop to exhaustion on one instance.

    Returns Done when no pick remains, Empty when consistency emptied a list
    at the top level (callers read that as "no homomorphism"), and Falsified
    the moment any internal claim check fails.  Deeper recursion levels are
    not allowed to empty: the construction claims their instances stay
    satisfiable, so an empty list down there is itself a falsification.
    """
    out = _remove_nm(g, h, lists, hom, store, trace, ctx, depth, to_root)
    if depth == 0:
        trace.emit("nm-final", lists.digest(), hom.digest(), out.status)
    return out


def replay_events(
    g: Digraph,
    h: Digraph,
    lists: ListAssignment,
    hom: ConsistentHom,
    events,
) -> tuple:
    """Re-apply a trace's root-level mutations to a pre-elimination state.

    Only two event kinds mutate the root instance: "retarget" rewrites
    table values and "removed" deletes a list element (followed, as in the
    engine, by a consistency pass and a table remask).  Replaying them in
    order must land on the digests the "nm-final" event recorded; the
    caller compares.  Returns (lists, hom) mutated in place.
    """
    for event in events:
        name = event[0]
        if name == "retarget" and int(event[1]) == 0:
            _, _, y, old, new = event[:5]
            hom.bulk_retarget(int(y), int(old), int(new))
        elif name == "removed" and int(event[1]) == 0:
            lists.remove_unary(int(event[2]), int(event[3]))
            if preprocess(g, h, lists) is not None:
                break
            hom.remask(lists)
    return lists, hom


def _remove_nm(
    g: Digraph,
    h: Digraph,
    lists: ListAssignment,
    hom: ConsistentHom,
    store: PossibleImageStore,
    trace: SolveTrace,
    ctx: NMContext,
    depth: int = 0,
    to_root=None,
) -> NMOutcome:
    if to_root is None:
        to_root = list(range(g.n))
    if depth > ctx.depth_budget:
        return _falsified(
            trace,
            FalsificationEvent("recursion-depth-exceeded", {"depth": depth}),
        )
    if ctx.validate:
        report = validate_all(hom, g, h, lists)
        ctx.validations += 1
        if not report.passed:
            return _falsified(
                trace,
                FalsificationEvent(
                    "hom-validation-failed",
                    {"depth": depth, "witnesses": [repr(w) for w in report.witnesses[:3]]},
                ),
            )
    while True:
        pick = _find_pick(g, lists, hom, ctx.pick_order)
        if pick is None:
            return NMOutcome(DONE)
        x, a, b, c = pick
        trace.emit("while-pick", depth, x, a, b, c)
        size_before = lists.total_size()
        try:
            reach = build_reachable(g, h, lists, (x, b, a))
            small = small_instance(g, h, lists, hom, store, reach, to_root)
            trace.emit("small-built", depth, small.graph.n, small.lists.total_size())
            trace.emit("enter", depth + 1, "small")
            sub_out = remove_nm(
                small.graph, h, small.lists, small.hom, store, trace, ctx,
                depth + 1, small.root_ids,
            )
            trace.emit("exit", depth + 1, "small", sub_out.status)
            if sub_out.status != DONE:
                return sub_out
            for y2 in range(small.graph.n):
                for d2 in small.lists.sorted_list(y2):
                    store.put(small.root_ids[y2], d2, frozenset({d2}))
            retargets = propagate_retargets(
                g, h, lists, store, hom, x, a, to_root, trace, ctx, depth
            )
            big = big_instance(
                g, h, lists, hom, store, reach, to_root, retargets
            )
            trace.emit("big-built", depth, big.graph.n, big.lists.total_size())
            trace.emit("enter", depth + 1, "big")
            sub_out = remove_nm(
                big.graph, h, big.lists, big.hom, store, trace, ctx,
                depth + 1, big.root_ids,
            )
            trace.emit("exit", depth + 1, "big", sub_out.status)
            if sub_out.status != DONE:
                return sub_out
            for y2 in range(big.graph.n):
                for d2 in big.lists.sorted_list(y2):
                    store.put(big.root_ids[y2], d2, frozenset({d2}))
            propagate_retargets(
                g, h, lists, store, hom, x, a, to_root, trace, ctx, depth
            )
            lists.remove_unary(x, a)
            trace.emit("removed", depth, x, a)
            signal = preprocess(g, h, lists)
            if signal is not None:
                trace.emit("empty-list", depth, *signal.witness)
                if depth == 0:
                    return NMOutcome(EMPTY, signal=signal)
                return _falsified(
                    trace,
                    FalsificationEvent(
                        "nested-instance-emptied",
                        {"depth": depth, "witness": list(signal.witness)},
                    ),
                )
            hom.remask(lists)
            trace.emit("preprocess", depth, size_before - lists.total_size())
            if lists.total_size() >= size_before:
                return _falsified(
                    trace,
                    FalsificationEvent("no-progress", {"x": x, "a": a}),
                )
            if ctx.validate:
                report = validate_all(hom, g, h, lists)
                ctx.validations += 1
                if not report.passed:
                    return _falsified(
                        trace,
                        FalsificationEvent(
                            "hom-validation-failed",
                            {
                                "depth": depth,
                                "after": f"removal of {a} at {x}",
                                "witnesses": [repr(w) for w in report.witnesses[:3]],
                            },
                        ),
                    )
        except FalsificationError as err:
            return _falsified(trace, err.event)
