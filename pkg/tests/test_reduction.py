"""Tests for the value-elimination engine and its self-checks."""

import random

import pytest

from homsolver import (
    Digraph,
    FalsificationError,
    ListAssignment,
    NMContext,
    PossibleImageStore,
    SolveTrace,
    build_reachable,
    directed_cycle,
    find_weak_nu,
    gen_random_digraph,
    init_from_phi,
    preprocess,
    remove_nm,
    replay_events,
    small_instance,
    verify,
)
from homsolver.reduction import _find_pick, _pattern_tuple


def fresh_c6_state(c3, c3_wnu):
    g = directed_cycle(6)
    lists = ListAssignment.full(g, c3)
    assert preprocess(g, c3, lists) is None
    hom = init_from_phi(g, c3, c3_wnu, lists)
    return g, lists, hom


def survivor_instances(c3, c3_wnu, want, tag, max_seed=400):
    """Random (g, lists, hom) states over the 3-cycle that pass preprocess."""
    out = []
    for seed in range(max_seed):
        rng = random.Random(f"{tag}:{seed}")
        g = gen_random_digraph(
            rng.randrange(3, 7), rng.uniform(0.1, 0.4), rng.randrange(2**31)
        )
        lists = ListAssignment.full(g, c3)
        if preprocess(g, c3, lists) is not None:
            continue
        out.append((g, lists, init_from_phi(g, c3, c3_wnu, lists)))
        if len(out) == want:
            break
    assert len(out) >= want // 2
    return out


class TestSolveTrace:
    def test_digest_deterministic(self):
        t1, t2 = SolveTrace(), SolveTrace()
        for t in (t1, t2):
            t.emit("while-pick", 0, 1, 2, 0, 2)
            t.emit("removed", 0, 1, 2)
        assert t1.digest() == t2.digest()

    def test_digest_sensitive_to_events(self):
        t1, t2 = SolveTrace(), SolveTrace()
        t1.emit("removed", 0, 1, 2)
        t2.emit("removed", 0, 1, 0)
        assert t1.digest() != t2.digest()

    def test_text_roundtrip(self):
        trace = SolveTrace()
        trace.emit("while-pick", 0, 3, 1, 0, 2)
        trace.emit("falsified", "no-progress")
        header = {"version": "1", "verdict": "falsified"}
        text = trace.to_text(header)
        parsed_header, events = SolveTrace.parse_text(text)
        assert parsed_header == header
        assert events == [
            ("while-pick", "0", "3", "1", "0", "2"),
            ("falsified", "no-progress"),
        ]


class TestPossibleImageStore:
    def test_default_empty(self):
        store = PossibleImageStore()
        assert store.get(3, 1) == frozenset()
        assert len(store) == 0

    def test_put_get(self):
        store = PossibleImageStore()
        store.put(0, 1, {2, 0})
        assert store.get(0, 1) == frozenset({0, 2})
        assert len(store) == 1

    def test_overwrite_not_merge(self):
        store = PossibleImageStore()
        store.put(0, 1, {2})
        store.put(0, 1, {0})
        assert store.get(0, 1) == frozenset({0})

    def test_bound_enforced(self):
        store = PossibleImageStore()
        with pytest.raises(FalsificationError) as err:
            store.put(0, 1, {2}, bound={0, 1})
        assert err.value.event.kind == "store-write-outside-list"

    def test_items_sorted(self):
        store = PossibleImageStore()
        store.put(2, 0, {1})
        store.put(0, 1, {0})
        keys = [key for key, _ in store.items()]
        assert keys == sorted(keys)


def reachable_reference(g, h, lists, w):
    """Saturation-style re-derivation of both reachability sets."""
    x, b, a = w

    def neighbors(t):
        y, a1, a2 = t
        for y2 in g.out_sorted(y):
            live = lists.get(y2)
            for b1 in h.out_neighbors(a1) & live:
                for b2 in h.out_neighbors(a2) & live:
                    yield (y2, b1, b2)
        for y2 in g.in_sorted(y):
            live = lists.get(y2)
            for b1 in h.in_neighbors(a1) & live:
                for b2 in h.in_neighbors(a2) & live:
                    yield (y2, b1, b2)

    def saturate(restricted):
        seen = {(x, b, a)}
        while True:
            grown = set()
            for t in seen:
                for nt in neighbors(t):
                    if nt in seen or nt in grown:
                        continue
                    if nt[0] == x:
                        if nt[1] != b or (restricted and nt[2] != a):
                            continue
                    grown.add(nt)
            if not grown:
                return seen
            seen |= grown

    full = frozenset(
        t for t in saturate(False) if lists.pair_allowed(x, t[0], b, t[1])
    )
    narrow = frozenset(
        t
        for t in saturate(True)
        if lists.pair_allowed(x, t[0], b, t[1])
        and lists.pair_allowed(x, t[0], a, t[2])
    )
    return full, narrow


class TestBuildReachable:
    def test_isolated_vertex_only_root(self, c3):
        g = Digraph(2, [(0, 1)])
        lists = ListAssignment(g.n, 3, lists=[{0, 1, 2}, {0, 1, 2}])
        lists.ensure_pairs(g, c3)
        # vertex 1 only reaches forward along the arc; picking at an
        # endpoint keeps the root in both sets
        reach = build_reachable(g, c3, lists, (0, 1, 0))
        assert (0, 1, 0) in reach.full
        assert (0, 1, 0) in reach.restricted

    def test_restricted_subset_of_full(self, c3, c3_wnu):
        for g, lists, _ in survivor_instances(c3, c3_wnu, 12, "reach-sub"):
            for x in range(g.n):
                values = sorted(lists.get(x))
                if len(values) < 2:
                    continue
                reach = build_reachable(g, c3, lists, (x, values[1], values[0]))
                assert reach.restricted <= reach.full
                break

    def test_members_respect_lists(self, c3, c3_wnu):
        g, lists, _ = fresh_c6_state(c3, c3_wnu)
        reach = build_reachable(g, c3, lists, (0, 1, 0))
        for y, a1, a2 in reach.full:
            assert a1 in lists.get(y) and a2 in lists.get(y)

    def test_matches_reference(self, c3, c3_wnu):
        checked = 0
        for g, lists, _ in survivor_instances(c3, c3_wnu, 12, "reach-ref"):
            for x in range(g.n):
                values = sorted(lists.get(x))
                if len(values) < 2:
                    continue
                w = (x, values[-1], values[0])
                reach = build_reachable(g, c3, lists, w)
                full, narrow = reachable_reference(g, c3, lists, w)
                assert reach.full == full
                assert reach.restricted == narrow
                checked += 1
        assert checked > 10


class TestSmallInstance:
    def test_pick_vertex_pinned(self, c3, c3_wnu):
        g, lists, hom = fresh_c6_state(c3, c3_wnu)
        pick = _find_pick(g, lists, hom, "lex")
        assert pick is not None
        x, a, b, c = pick
        # this table sends near-unanimous patterns to the majority value
        assert c == b
        store = PossibleImageStore()
        reach = build_reachable(g, c3, lists, (x, b, a))
        to_root = list(range(g.n))
        sub = small_instance(g, c3, lists, hom, store, reach, to_root)
        assert sub.tag == "small"
        new_x = sub.old_ids.index(x)
        assert sub.lists.get(new_x) == {c}
        assert len(store) > 0

    def test_sub_lists_shrink(self, c3, c3_wnu):
        g, lists, hom = fresh_c6_state(c3, c3_wnu)
        x, a, b, c = _find_pick(g, lists, hom, "lex")
        reach = build_reachable(g, c3, lists, (x, b, a))
        sub = small_instance(
            g, c3, lists, hom, PossibleImageStore(), reach, list(range(g.n))
        )
        for new_y, old_y in enumerate(sub.old_ids):
            assert sub.lists.get(new_y) <= lists.get(old_y)

    def test_store_values_within_lists(self, c3, c3_wnu):
        g, lists, hom = fresh_c6_state(c3, c3_wnu)
        x, a, b, c = _find_pick(g, lists, hom, "lex")
        reach = build_reachable(g, c3, lists, (x, b, a))
        store = PossibleImageStore()
        small_instance(g, c3, lists, hom, store, reach, list(range(g.n)))
        for (y, value), images in store.items():
            assert images <= lists.get(y)


class TestRemoveNM:
    def test_c6_terminates_with_witness(self, c3, c3_wnu):
        g, lists, hom = fresh_c6_state(c3, c3_wnu)
        out = remove_nm(
            g, c3, lists, hom, PossibleImageStore(), SolveTrace(), NMContext()
        )
        assert out.status == "done"
        # the engine collapsed every list to a singleton homomorphism
        assignment = []
        for x in range(g.n):
            values = sorted(lists.get(x))
            assert len(values) == 1
            assignment.append(values[0])
        ok, witness = verify(g, c3, assignment)
        assert ok, witness

    def test_done_means_no_pick_left(self, c3, c3_wnu):
        for g, lists, hom in survivor_instances(c3, c3_wnu, 10, "nm-post"):
            out = remove_nm(
                g, c3, lists, hom, PossibleImageStore(), SolveTrace(), NMContext()
            )
            if out.status == "done":
                assert _find_pick(g, lists, hom, "lex") is None

    def test_deterministic(self, c3, c3_wnu):
        digests = []
        for _ in range(2):
            g, lists, hom = fresh_c6_state(c3, c3_wnu)
            trace = SolveTrace()
            remove_nm(
                g, c3, lists, hom, PossibleImageStore(), trace, NMContext()
            )
            digests.append((trace.digest(), lists.digest(), hom.digest()))
        assert digests[0] == digests[1]

    def test_depth_budget_falsifies(self, c3, c3_wnu):
        g, lists, hom = fresh_c6_state(c3, c3_wnu)
        out = remove_nm(
            g, c3, lists, hom, PossibleImageStore(), SolveTrace(),
            NMContext(depth_budget=0),
        )
        assert out.status == "falsified"
        assert out.event.kind == "recursion-depth-exceeded"

    def test_corrupted_table_surfaces(self, c3, c3_wnu):
        g, lists, hom = fresh_c6_state(c3, c3_wnu)
        hom.tables[0][0] = 1  # diagonal (0,0,0) -> 1 breaks adjacency
        out = remove_nm(
            g, c3, lists, hom, PossibleImageStore(), SolveTrace(), NMContext()
        )
        assert out.status == "falsified"
        assert out.event.kind == "hom-validation-failed"

    def test_validation_counter(self, c3, c3_wnu):
        g, lists, hom = fresh_c6_state(c3, c3_wnu)
        ctx = NMContext()
        remove_nm(g, c3, lists, hom, PossibleImageStore(), SolveTrace(), ctx)
        assert ctx.validations > 0

    def test_validators_off_skips_entry_check(self, c3, c3_wnu):
        g, lists, hom = fresh_c6_state(c3, c3_wnu)
        ctx = NMContext(validate=False)
        remove_nm(g, c3, lists, hom, PossibleImageStore(), SolveTrace(), ctx)
        assert ctx.validations == 0

    def test_trace_has_final_digests(self, c3, c3_wnu):
        g, lists, hom = fresh_c6_state(c3, c3_wnu)
        trace = SolveTrace()
        out = remove_nm(
            g, c3, lists, hom, PossibleImageStore(), trace, NMContext()
        )
        finals = [e for e in trace.events if e[0] == "nm-final"]
        assert finals == [("nm-final", lists.digest(), hom.digest(), out.status)]


class TestFaultInjection:
    def test_corrupted_retarget_detected(self, c3, c3_wnu):
        # this seed yields an instance whose healthy run retargets and
        # finishes; corrupting the first retarget must surface a
        # falsification instead of a silent wrong answer
        rng = random.Random("probe:1")
        g = gen_random_digraph(
            rng.randrange(3, 7), rng.uniform(0.2, 0.6), rng.randrange(2**31)
        )

        def run(fault):
            lists = ListAssignment.full(g, c3)
            assert preprocess(g, c3, lists) is None
            hom = init_from_phi(g, c3, c3_wnu, lists)
            trace = SolveTrace()
            out = remove_nm(
                g, c3, lists, hom, PossibleImageStore(), trace,
                NMContext(fault=fault),
            )
            retargets = sum(1 for e in trace.events if e[0] == "retarget")
            return out, retargets

        healthy, n_retargets = run(None)
        assert healthy.status == "done"
        assert n_retargets > 0
        faulted, _ = run("retarget-corrupt")
        assert faulted.status == "falsified"
        assert faulted.event is not None

    def test_fault_fires_once(self, c3, c3_wnu):
        g, lists, hom = fresh_c6_state(c3, c3_wnu)
        ctx = NMContext(fault="retarget-corrupt")
        remove_nm(g, c3, lists, hom, PossibleImageStore(), SolveTrace(), ctx)
        assert not ctx._fault_armed


class TestReplay:
    def test_c6_replay_matches_digests(self, c3, c3_wnu):
        g, lists, hom = fresh_c6_state(c3, c3_wnu)
        pre_lists, pre_hom = lists.copy(), hom.copy()
        trace = SolveTrace()
        remove_nm(g, c3, lists, hom, PossibleImageStore(), trace, NMContext())
        final = [e for e in trace.events if e[0] == "nm-final"][0]
        re_lists, re_hom = replay_events(g, c3, pre_lists, pre_hom, trace.events)
        assert re_lists.digest() == final[1]
        assert re_hom.digest() == final[2]

    def test_random_replays_match(self, c3, c3_wnu):
        replayed = 0
        for g, lists, hom in survivor_instances(c3, c3_wnu, 20, "nm-replay"):
            pre_lists, pre_hom = lists.copy(), hom.copy()
            trace = SolveTrace()
            out = remove_nm(
                g, c3, lists, hom, PossibleImageStore(), trace, NMContext()
            )
            if out.status != "done":
                continue
            final = [e for e in trace.events if e[0] == "nm-final"][0]
            re_lists, re_hom = replay_events(
                g, c3, pre_lists, pre_hom, trace.events
            )
            assert re_lists.digest() == final[1]
            assert re_hom.digest() == final[2]
            replayed += 1
        assert replayed > 5

    def test_replay_events_parsed_from_text(self, c3, c3_wnu):
        # string-typed events from a trace file replay identically
        g, lists, hom = fresh_c6_state(c3, c3_wnu)
        pre_lists, pre_hom = lists.copy(), hom.copy()
        trace = SolveTrace()
        remove_nm(g, c3, lists, hom, PossibleImageStore(), trace, NMContext())
        final = [e for e in trace.events if e[0] == "nm-final"][0]
        _, events = SolveTrace.parse_text(trace.to_text({"version": 1}))
        re_lists, re_hom = replay_events(g, c3, pre_lists, pre_hom, events)
        assert re_lists.digest() == final[1]
        assert re_hom.digest() == final[2]


class TestPatternTuple:
    def test_shape(self):
        assert _pattern_tuple(3, 1, 0) == (1, 1, 0)
        assert _pattern_tuple(4, 2, 5) == (2, 2, 2, 5)
