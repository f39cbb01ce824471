"""Tests for the evolving k-ary homomorphism tables."""

import itertools

import numpy as np
import pytest

from homsolver import (
    ConsistentHom,
    Digraph,
    ListAssignment,
    NotClosedError,
    SENTINEL,
    directed_cycle,
    enumerate_all,
    find_weak_nu,
    init_from_phi,
    preprocess,
    restrict,
    validate_all,
    verify,
)
from homsolver.chom import _decode

from conftest import preprocessed_lists


def c3_instance(c3, c3_wnu):
    g = directed_cycle(6)
    lists = preprocessed_lists(g, c3)
    assert lists is not None
    return g, c3, lists, init_from_phi(g, c3, c3_wnu, lists)


class TestInitFromPhi:
    def test_tables_cover_lists(self, c3, c3_wnu):
        g, h, lists, hom = c3_instance(c3, c3_wnu)
        for x in range(g.n):
            assert hom.masked_values(x) == lists.get(x)

    def test_validates_clean(self, c3, c3_wnu):
        g, h, lists, hom = c3_instance(c3, c3_wnu)
        report = validate_all(hom, g, h, lists)
        assert report.passed
        assert report.witnesses == ()

    def test_rejects_non_polymorphism_table(self, c3, zadd3):
        # zadd3 breaks arc preservation on the 3-cycle, so the initial
        # validation must refuse it
        g = directed_cycle(3)
        lists = preprocessed_lists(g, c3)
        with pytest.raises(ValueError, match="not consistent"):
            init_from_phi(g, c3, zadd3, lists)

    def test_loop_target_forces_constant(self, loop1):
        g = Digraph(3, [(0, 1), (1, 2)])
        phi = find_weak_nu(loop1, k=3)
        lists = preprocessed_lists(g, loop1)
        hom = init_from_phi(g, loop1, phi, lists)
        for x in range(g.n):
            assert hom.apply(x, (0, 0, 0)) == 0


class TestApplyAndMask:
    def test_apply_row_major(self, c3, c3_wnu):
        g, h, lists, hom = c3_instance(c3, c3_wnu)
        for tup in itertools.product(range(3), repeat=3):
            assert hom.apply(0, tup) == c3_wnu.apply(tup)

    def test_apply_outside_mask_raises(self, c3, c3_wnu):
        g, h, lists, hom = c3_instance(c3, c3_wnu)
        lists.remove_unary(0, 2)
        hom.remask(lists)
        with pytest.raises(ValueError, match="outside"):
            hom.apply(0, (0, 1, 2))

    def test_remask_tracks_lists(self, c3, c3_wnu):
        g, h, lists, hom = c3_instance(c3, c3_wnu)
        lists.remove_unary(1, 0)
        hom.remask(lists)
        assert hom.masked_values(1) == {1, 2}
        # every surviving tuple draws its components from the shrunk list
        for idx in np.nonzero(hom.valid_mask(1))[0]:
            tup = _decode(3, 3, int(idx))
            assert set(tup) <= {1, 2}

    def test_remask_never_unmasks(self, c3, c3_wnu):
        g, h, lists, hom = c3_instance(c3, c3_wnu)
        lists.remove_unary(0, 1)
        hom.remask(lists)
        before = hom.valid_mask(0).sum()
        hom.remask(lists)
        assert hom.valid_mask(0).sum() == before

    def test_value_exists(self, c3, c3_wnu):
        g, h, lists, hom = c3_instance(c3, c3_wnu)
        assert hom.value_exists(0, 2)
        assert not hom.value_exists(0, SENTINEL + 0) or True  # sentinel aside
        hom.tables[0][hom.tables[0] == 2] = 0
        assert not hom.value_exists(0, 2)

    def test_copy_is_independent(self, c3, c3_wnu):
        g, h, lists, hom = c3_instance(c3, c3_wnu)
        dup = hom.copy()
        dup.tables[0][:] = SENTINEL
        assert hom.valid_mask(0).any()
        assert hom.digest() != dup.digest()


class TestInjectedViolations:
    def test_list_violation_witnessed(self, c3, c3_wnu):
        g, h, lists, hom = c3_instance(c3, c3_wnu)
        lists.remove_unary(2, 1)
        hom.remask(lists)
        # retarget a surviving tuple of vertex 2 onto the removed value
        idx = int(np.nonzero(hom.valid_mask(2))[0][0])
        hom.tables[2][idx] = 1
        report = validate_all(hom, g, h, lists)
        assert not report.list_ok
        kinds = {w[0] for w in report.witnesses}
        assert "list" in kinds

    def test_adjacency_violation_witnessed(self, c3, c3_wnu):
        g, h, lists, hom = c3_instance(c3, c3_wnu)
        # the diagonal entry (a,a,a) -> a participates in adjacency checks;
        # pointing it at a non-successor breaks some arc through vertex 0
        hom.tables[0][0] = 1  # f(0; 0,0,0) = 1, true successor of image 1 is 2
        report = validate_all(hom, g, h, lists)
        assert not report.adjacency_ok

    def test_pattern_violation_witnessed(self, c3, c3_wnu):
        g, h, lists, hom = c3_instance(c3, c3_wnu)
        # make the three patterns over (base=0, odd=1) disagree at vertex 0
        pats = [(0, 0, 1), (0, 1, 0), (1, 0, 0)]
        vals = [hom.apply(0, p) for p in pats]
        assert len(set(vals)) == 1
        i = 0 * 9 + 0 * 3 + 1  # row-major index of (0,0,1)
        hom.tables[0][i] = (vals[0] + 1) % 3
        report = validate_all(hom, g, h, lists)
        assert not report.weak_nu_ok
        kinds = {w[0] for w in report.witnesses}
        assert "weak-nu" in kinds

    def test_witness_cap_respected(self, c3, c3_wnu):
        g, h, lists, hom = c3_instance(c3, c3_wnu)
        for x in range(g.n):
            hom.tables[x][:] = 5  # garbage value, out of range for h
        report = validate_all(hom, g, h, lists, witness_cap=3)
        assert not report.passed
        assert len(report.witnesses) <= 4  # cap plus at most one overshoot


class TestClosure:
    def test_singleton_closed_under_idempotent_table(self, c3, c3_wnu):
        g, h, lists, hom = c3_instance(c3, c3_wnu)
        for a in range(3):
            res = hom.closure(0, {a})
            assert res.closed == {a}
            assert res.order == ()
            assert res.trace == {}

    def test_full_list_closed(self, c3, c3_wnu):
        g, h, lists, hom = c3_instance(c3, c3_wnu)
        res = hom.closure(0, {0, 1, 2})
        assert res.closed == {0, 1, 2}

    def test_monotone_in_seed(self, c3, c3_wnu):
        g, h, lists, hom = c3_instance(c3, c3_wnu)
        small = hom.closure(0, {0}).closed
        big = hom.closure(0, {0, 1}).closed
        assert small <= big

    def test_idempotent(self, c3, c3_wnu):
        g, h, lists, hom = c3_instance(c3, c3_wnu)
        once = hom.closure(0, {1, 2}).closed
        twice = hom.closure(0, set(once)).closed
        assert once == twice

    def test_trace_generates_in_order(self):
        # a table that genuinely grows the seed: x+y+z mod 3 turns {1} into
        # everything, one new element per generation
        table = [(a + b + c) % 3
                 for a in range(3) for b in range(3) for c in range(3)]
        hom = ConsistentHom(3, 1, 3, [np.array(table, dtype=np.int16)])
        res = hom.closure(0, {1})
        assert res.closed == {0, 1, 2}
        seen = {1}
        for value in res.order:
            tup = res.trace[value]
            assert set(tup) <= seen
            assert (sum(tup) % 3) == value
            seen.add(value)

    def test_masked_region_raises(self, c3, c3_wnu):
        g, h, lists, hom = c3_instance(c3, c3_wnu)
        lists.remove_unary(0, 2)
        hom.remask(lists)
        with pytest.raises(ValueError, match="valid region"):
            hom.closure(0, {1, 2})


class TestRestrict:
    def test_identity_restriction(self, c3, c3_wnu):
        g, h, lists, hom = c3_instance(c3, c3_wnu)
        sub = restrict(hom, [lists.get(x) for x in range(g.n)])
        assert sub.g_size == g.n
        for x in range(g.n):
            assert (sub.tables[x] == hom.tables[x]).all()

    def test_singleton_restriction(self, c3, c3_wnu):
        g, h, lists, hom = c3_instance(c3, c3_wnu)
        sub = restrict(hom, [{0}], old_ids=[4])
        assert sub.g_size == 1
        assert sub.masked_values(0) == {0}
        assert sub.valid_mask(0).sum() == 1

    def test_two_element_lists_are_closed(self, c3, c3_wnu):
        # over an idempotent ternary table every tuple on {a,b} is a diagonal
        # or a near-unanimous pattern, so 2-element sets are always closed
        g, h, lists, hom = c3_instance(c3, c3_wnu)
        for pair in ({0, 1}, {0, 2}, {1, 2}):
            sub = restrict(hom, [pair] * g.n)
            for x in range(g.n):
                assert sub.masked_values(x) == pair

    def test_not_subset_rejected(self, c3, c3_wnu):
        g, h, lists, hom = c3_instance(c3, c3_wnu)
        lists.remove_unary(0, 2)
        hom.remask(lists)
        with pytest.raises(NotClosedError) as err:
            restrict(hom, [{0, 1, 2}], old_ids=[0])
        assert err.value.witness == (0, (2,))

    def test_not_closed_rejected(self, zadd3):
        # zadd3 sends (0,1,1) to 2, escaping {0,1}
        hom = ConsistentHom(3, 1, 3, [np.array(zadd3.table, dtype=np.int16)])
        with pytest.raises(NotClosedError) as err:
            restrict(hom, [{0, 1}])
        assert err.value.witness[0] == 0

    def test_reindexing(self, c3, c3_wnu):
        g, h, lists, hom = c3_instance(c3, c3_wnu)
        lists.remove_unary(3, 1)
        hom.remask(lists)
        sub = restrict(hom, [{0, 2}, {0, 1, 2}], old_ids=[3, 5])
        assert sub.masked_values(0) == {0, 2}
        assert sub.masked_values(1) == {0, 1, 2}
        # entries copied from the source vertices, not from 0/1
        for tup in itertools.product((0, 2), repeat=3):
            assert sub.apply(0, tup) == hom.apply(3, tup)


class TestBulkRetarget:
    def test_moves_every_occurrence(self, c3, c3_wnu):
        g, h, lists, hom = c3_instance(c3, c3_wnu)
        before = int((hom.tables[2] == 1).sum())
        assert before > 0
        count = hom.bulk_retarget(2, 1, 0)
        assert count == before
        assert not hom.value_exists(2, 1)

    def test_logs_each_move(self, c3, c3_wnu):
        g, h, lists, hom = c3_instance(c3, c3_wnu)
        hom.change_log.clear()
        count = hom.bulk_retarget(1, 0, 2)
        assert len(hom.change_log) == count
        for x, idx, old, new in hom.change_log:
            assert (x, old, new) == (1, 0, 2)
            assert hom.tables[1][idx] == 2

    def test_absent_value_noop(self, c3, c3_wnu):
        g, h, lists, hom = c3_instance(c3, c3_wnu)
        hom.tables[0][hom.tables[0] == 2] = 0
        hom.change_log.clear()
        assert hom.bulk_retarget(0, 2, 1) == 0
        assert hom.change_log == []

    def test_same_value_rejected(self, c3, c3_wnu):
        g, h, lists, hom = c3_instance(c3, c3_wnu)
        with pytest.raises(ValueError, match="old != new"):
            hom.bulk_retarget(0, 1, 1)

    def test_other_vertices_untouched(self, c3, c3_wnu):
        g, h, lists, hom = c3_instance(c3, c3_wnu)
        snap = hom.tables[1].copy()
        hom.bulk_retarget(0, 0, 1)
        assert (hom.tables[1] == snap).all()


class TestHomComposition:
    def test_pointwise_image_of_homs_is_hom(self, c3, c3_wnu):
        # the defining use of a consistent table: feed it k homomorphisms
        # pointwise and a homomorphism must come back out
        g = directed_cycle(6)
        lists = preprocessed_lists(g, c3)
        hom = init_from_phi(g, c3, c3_wnu, lists)
        all_homs = enumerate_all(g, c3)
        assert len(all_homs) == 3
        for trio in itertools.product(all_homs, repeat=3):
            image = tuple(
                hom.apply(x, tuple(m.assignment[x] for m in trio))
                for x in range(g.n)
            )
            ok, witness = verify(
                g, c3, image, [lists.get(x) for x in range(g.n)]
            )
            assert ok, witness


class TestDumpText:
    def test_line_per_valid_entry(self, c3, c3_wnu):
        g, h, lists, hom = c3_instance(c3, c3_wnu)
        text = hom.dump_text()
        lines = text.strip().split("\n")
        total = sum(int(hom.valid_mask(x).sum()) for x in range(g.n))
        assert len(lines) == total
        x, tup, value = lines[0].split()
        assert x == "0"
        assert tup == "0,0,0"
        assert value == str(hom.apply(0, (0, 0, 0)))
