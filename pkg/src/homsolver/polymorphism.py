"""Operation tables on H, property checkers, and the weak near-unanimity search.

A k-ary table is stored flat in row-major tuple order (first coordinate most
significant).  The search for a weak near-unanimity operation is an indicator
construction: one CSP variable per k-tuple of H-vertices, with tuples merged
when the target identities force them equal, solved by backtracking with arc
consistency.  The checkers are deliberately independent of the search.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

from .common import BUDGET_EXHAUSTED, sha256_hex
from .digraph import Digraph, FormatError

TABLE_SIZE_GUARD = 65536
ARC_TUPLE_GUARD = 4_000_000


def tuple_index(h_size: int, args: Sequence[int]) -> int:
    idx = 0
    for a in args:
        idx = idx * h_size + a
    return idx


def index_tuple(h_size: int, k: int, idx: int) -> tuple:
    out = []
    for _ in range(k):
        out.append(idx % h_size)
        idx //= h_size
    return tuple(reversed(out))


def iter_tuples(h_size: int, k: int):
    """All k-tuples in row-major order, aligned with tuple_index."""
    return itertools.product(range(h_size), repeat=k)


@lru_cache(maxsize=32)
def coordinate_matrix(h_size: int, k: int) -> np.ndarray:
    """Shape (k, h_size**k): coordinate j of every tuple index."""
    cols = np.array(list(iter_tuples(h_size, k)), dtype=np.int64)
    return cols.T.copy()


@lru_cache(maxsize=32)
def pattern_indices(h_size: int, k: int) -> np.ndarray:
    """Shape (h, h, k): for (base, odd) the indices of the k one-odd tuples."""
    out = np.zeros((h_size, h_size, k), dtype=np.int64)
    for base in range(h_size):
        for odd in range(h_size):
            for pos in range(k):
                tup = [base] * k
                tup[pos] = odd
                out[base, odd, pos] = tuple_index(h_size, tup)
    return out


@dataclass(frozen=True)
class PropertyReport:
    """Outcome of the table checkers; unchecked properties stay None.

    A false flag always comes with at least one witness tuple.
    """

    is_polymorphism: Optional[bool] = None
    is_weak_nu: Optional[bool] = None
    is_idempotent: Optional[bool] = None
    is_maltsev: Optional[bool] = None
    witnesses: tuple = ()


class PolymorphismTable:
    """Total k-ary operation on V(H), flat row-major storage."""

    __slots__ = ("k", "h_size", "table")

    def __init__(self, k: int, h_size: int, table: Iterable[int]):
        self.k = k
        self.h_size = h_size
        self.table = tuple(table)
        if len(self.table) != h_size**k:
            raise ValueError("table must be total over all k-tuples")
        for value in self.table:
            if not (0 <= value < h_size):
                raise ValueError(f"table value {value} out of range")

    @classmethod
    def from_function(cls, k: int, h_size: int, fn) -> "PolymorphismTable":
        return cls(k, h_size, [fn(*t) for t in iter_tuples(h_size, k)])

    def apply(self, args: Sequence[int]) -> int:
        return self.table[tuple_index(self.h_size, args)]

    def digest(self) -> str:
        body = f"{self.k};{self.h_size};" + ",".join(map(str, self.table))
        return sha256_hex(body.encode("utf-8"))

    def __eq__(self, other):
        return (
            isinstance(other, PolymorphismTable)
            and self.k == other.k
            and self.h_size == other.h_size
            and self.table == other.table
        )

    def __hash__(self):
        return hash((self.k, self.h_size, self.table))

    def __repr__(self):
        return f"PolymorphismTable(k={self.k}, h={self.h_size})"


def check_polymorphism(h: Digraph, t: PolymorphismTable) -> PropertyReport:
    """Arc preservation: coordinatewise arcs map to an arc of h."""
    if t.h_size != h.n:
        raise ValueError(
            f"table range {t.h_size} does not match vertex count {h.n}"
        )
    witnesses = []
    arcs = h.sorted_arcs()
    for arc_tuple in itertools.product(arcs, repeat=t.k):
        src = tuple(a for a, _ in arc_tuple)
        dst = tuple(b for _, b in arc_tuple)
        if not h.has_arc(t.apply(src), t.apply(dst)):
            witnesses.append(("adjacency", src, dst, t.apply(src), t.apply(dst)))
            if len(witnesses) >= 8:
                break
    return PropertyReport(
        is_polymorphism=not witnesses, witnesses=tuple(witnesses)
    )


def check_weak_nu(t: PolymorphismTable) -> PropertyReport:
    """Pattern agreement and idempotence, reported separately.

    is_weak_nu is true iff for every (base, odd) all k tuples with a single
    odd coordinate share one value.  Idempotence is a distinct flag; both
    must hold before a table qualifies as a weak near-unanimity operation.
    """
    witnesses = []
    idempotent = True
    for a in range(t.h_size):
        if t.apply((a,) * t.k) != a:
            idempotent = False
            witnesses.append(("idempotence", a, t.apply((a,) * t.k)))
    agree = True
    for base in range(t.h_size):
        for odd in range(t.h_size):
            if base == odd:
                continue
            values = []
            for pos in range(t.k):
                tup = [base] * t.k
                tup[pos] = odd
                values.append(t.apply(tup))
            if len(set(values)) != 1:
                agree = False
                witnesses.append(("pattern", base, odd, tuple(values)))
    return PropertyReport(
        is_weak_nu=agree, is_idempotent=idempotent, witnesses=tuple(witnesses)
    )


def check_maltsev(t: PolymorphismTable) -> PropertyReport:
    """t(a,b,b) = a and t(b,b,a) = a for all a, b (ternary tables only)."""
    if t.k != 3:
        raise ValueError("maltsev check applies to ternary tables")
    witnesses = []
    for a in range(t.h_size):
        for b in range(t.h_size):
            if t.apply((a, b, b)) != a:
                witnesses.append(("maltsev-left", a, b, t.apply((a, b, b))))
            if t.apply((b, b, a)) != a:
                witnesses.append(("maltsev-right", a, b, t.apply((b, b, a))))
    return PropertyReport(is_maltsev=not witnesses, witnesses=tuple(witnesses))


def is_weak_nu_polymorphism(h: Digraph, t: PolymorphismTable) -> bool:
    """Combined gate: arc preservation, pattern agreement, idempotence."""
    wnu = check_weak_nu(t)
    if not (wnu.is_weak_nu and wnu.is_idempotent):
        return False
    return bool(check_polymorphism(h, t).is_polymorphism)


# -- indicator search ------------------------------------------------------


class _ClassSpace:
    """Tuple classes merged under idempotence pins and pattern equalities."""

    def __init__(self, h: Digraph, k: int):
        hs = h.n
        self.h = h
        self.k = k
        class_of = {}
        members = []
        pinned = []

        def new_class(pin=None):
            members.append([])
            pinned.append(pin)
            return len(members) - 1

        for a in range(hs):
            cid = new_class(pin=a)
            class_of[(a,) * k] = cid
            members[cid].append((a,) * k)
        for base in range(hs):
            for odd in range(hs):
                if base == odd:
                    continue
                cid = new_class()
                for pos in range(k):
                    tup = [base] * k
                    tup[pos] = odd
                    class_of[tuple(tup)] = cid
                    members[cid].append(tuple(tup))
        for tup in iter_tuples(hs, k):
            if tup not in class_of:
                cid = new_class()
                class_of[tup] = cid
                members[cid].append(tup)
        self.class_of = class_of
        self.members = [tuple(ms) for ms in members]
        self.pinned = pinned
        arcs = h.sorted_arcs()
        if len(arcs) ** k > ARC_TUPLE_GUARD:
            raise ValueError("arc tuple enumeration over budget")
        constraint_set = set()
        for arc_tuple in itertools.product(arcs, repeat=k):
            src = tuple(a for a, _ in arc_tuple)
            dst = tuple(b for _, b in arc_tuple)
            constraint_set.add((class_of[src], class_of[dst]))
        self.constraints = sorted(constraint_set)
        outdeg = [len(h.out_neighbors(a)) for a in range(hs)]
        indeg = [len(h.in_neighbors(a)) for a in range(hs)]
        self.degree = []
        for ms in self.members:
            d = 0
            for tup in ms:
                po = pi = 1
                for a in tup:
                    po *= outdeg[a]
                    pi *= indeg[a]
                d += po + pi
            self.degree.append(d)


def _propagate(domains, constraints, arc_h):
    """Arc consistency over class domains; False on any wipeout."""
    pending = deque(constraints)
    in_queue = set(constraints)
    succ = {}
    pred = {}
    for ci, cj in constraints:
        succ.setdefault(ci, []).append((ci, cj))
        pred.setdefault(cj, []).append((ci, cj))
    while pending:
        ci, cj = pending.popleft()
        in_queue.discard((ci, cj))
        di, dj = domains[ci], domains[cj]
        doomed_i = {p for p in di if not any(arc_h[p][q] for q in dj)}
        doomed_j = {q for q in dj if not any(arc_h[p][q] for p in di)}
        if doomed_i:
            di -= doomed_i
            if not di:
                return False
            for item in succ.get(ci, []) + pred.get(ci, []):
                if item not in in_queue:
                    in_queue.add(item)
                    pending.append(item)
        if doomed_j:
            dj -= doomed_j
            if not dj:
                return False
            for item in succ.get(cj, []) + pred.get(cj, []):
                if item not in in_queue:
                    in_queue.add(item)
                    pending.append(item)
    return True


def find_weak_nu(
    h: Digraph, k: int = 3, node_budget: int = 200_000
):
    """Search for an idempotent weak k-NU polymorphism of h.

    Returns a PolymorphismTable, None after exhaustive refutation, or
    BUDGET_EXHAUSTED when the node budget ran out first.
    """
    if k < 2 or k > 4:
        raise ValueError("supported arities are 2..4")
    if h.n**k > TABLE_SIZE_GUARD:
        raise ValueError("table size over budget")
    if h.n == 0:
        return None
    space = _ClassSpace(h, k)
    arc_h = [[h.has_arc(p, q) for q in range(h.n)] for p in range(h.n)]
    domains = []
    for cid in range(len(space.members)):
        if space.pinned[cid] is not None:
            domains.append({space.pinned[cid]})
        else:
            domains.append(set(range(h.n)))
    if not _propagate(domains, space.constraints, arc_h):
        return None
    representative = [
        min(tuple_index(h.n, tup) for tup in ms) for ms in space.members
    ]
    order = sorted(
        range(len(space.members)),
        key=lambda cid: (-space.degree[cid], representative[cid]),
    )
    nodes = 0

    def pick_branch(domains):
        target = None
        for cid in order:
            if len(domains[cid]) > 1:
                target = cid
                break
        if target is None:
            return None
        freq = [0] * h.n
        for cid in range(len(domains)):
            if len(domains[cid]) == 1:
                (val,) = domains[cid]
                freq[val] += len(space.members[cid])
        values = sorted(domains[target], key=lambda p: (-freq[p], p))
        return target, values

    # explicit stack; recursion depth equals the number of merged classes
    solution = None
    exhausted = False
    branch = pick_branch(domains)
    if branch is None:
        solution = domains
    else:
        stack = [(domains, branch[0], iter(branch[1]))]
        while stack:
            state, target, values = stack[-1]
            value = next(values, None)
            if value is None:
                stack.pop()
                continue
            nodes += 1
            if nodes > node_budget:
                exhausted = True
                break
            trial = [set(d) for d in state]
            trial[target] = {value}
            if not _propagate(trial, space.constraints, arc_h):
                continue
            branch = pick_branch(trial)
            if branch is None:
                solution = trial
                break
            stack.append((trial, branch[0], iter(branch[1])))
    if exhausted:
        return BUDGET_EXHAUSTED
    if solution is None:
        return None
    table = [0] * (h.n**k)
    for cid, ms in enumerate(space.members):
        (value,) = solution[cid]
        for tup in ms:
            table[tuple_index(h.n, tup)] = value
    found = PolymorphismTable(k, h.n, table)
    report = check_weak_nu(found)
    assert report.is_weak_nu and report.is_idempotent
    assert check_polymorphism(h, found).is_polymorphism
    return found


# -- text format -----------------------------------------------------------


def dump_table_text(t: PolymorphismTable) -> str:
    lines = [f"{t.k} {t.h_size}"]
    lines += [str(v) for v in t.table]
    return "\n".join(lines) + "\n"


def load_table_text(text: str) -> PolymorphismTable:
    """Parse "k n" then n**k value lines in row-major tuple order."""
    lines = text.splitlines()
    if not lines:
        raise FormatError(1, "empty input")
    head = lines[0].split()
    if len(head) != 2:
        raise FormatError(1, "expected header 'k n'")
    try:
        k, n = int(head[0]), int(head[1])
    except ValueError:
        raise FormatError(1, "header fields must be integers") from None
    if k < 1 or n < 1:
        raise FormatError(1, "header fields must be positive")
    values = []
    lineno = 1
    for raw in lines[1:]:
        lineno += 1
        if not raw.strip():
            continue
        try:
            value = int(raw.strip())
        except ValueError:
            raise FormatError(lineno, "expected one integer") from None
        if not (0 <= value < n):
            raise FormatError(lineno, f"value out of range 0..{n - 1}")
        values.append(value)
    if len(values) != n**k:
        raise FormatError(
            lineno, f"expected {n**k} values, found {len(values)}"
        )
    return PolymorphismTable(k, n, values)
