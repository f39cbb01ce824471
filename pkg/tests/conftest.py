"""Shared fixtures: tiny named graphs and one searched table per target."""

import random

import pytest

from homsolver import (
    Digraph,
    ListAssignment,
    PolymorphismTable,
    directed_cycle,
    find_weak_nu,
    gen_random_digraph,
    preprocess,
)


@pytest.fixture(scope="session")
def c3():
    return directed_cycle(3)


@pytest.fixture(scope="session")
def k3():
    return Digraph(3, [(u, v) for u in range(3) for v in range(3) if u != v])


@pytest.fixture(scope="session")
def k2_sym():
    return Digraph(2, [(0, 1), (1, 0)])


@pytest.fixture(scope="session")
def loop1():
    return Digraph(1, [(0, 0)])


@pytest.fixture(scope="session")
def single_arc():
    return Digraph(2, [(0, 1)])


@pytest.fixture(scope="session")
def path3():
    return Digraph(3, [(0, 1), (1, 2)])


@pytest.fixture(scope="session")
def c3_wnu(c3):
    phi = find_weak_nu(c3, k=3)
    assert isinstance(phi, PolymorphismTable)
    return phi


@pytest.fixture(scope="session")
def k2_wnu(k2_sym):
    phi = find_weak_nu(k2_sym, k=3)
    assert isinstance(phi, PolymorphismTable)
    return phi


@pytest.fixture(scope="session")
def zadd3():
    # pattern-agreeing but neither idempotent nor a 3-cycle polymorphism
    return PolymorphismTable.from_function(3, 3, lambda x, y, z: (x + y + z) % 3)


@pytest.fixture(scope="session")
def zmal3():
    # the coset operation: cancellative on both sides, not pattern-agreeing
    return PolymorphismTable.from_function(3, 3, lambda x, y, z: (x - y + z) % 3)


def random_instance(seed, max_g=6, max_h=4, lo=0.1, hi=0.7):
    rng = random.Random(f"test-instance:{seed}")
    g = gen_random_digraph(rng.randrange(1, max_g + 1), rng.uniform(lo, hi), seed)
    h = gen_random_digraph(
        rng.randrange(1, max_h + 1), rng.uniform(lo, hi), seed + 10_000
    )
    return g, h


def preprocessed_lists(g, h):
    """Full lists after the joint fixpoint; None when a list emptied."""
    lists = ListAssignment.full(g, h)
    if preprocess(g, h, lists) is not None:
        return None
    return lists
