"""Greedy causality monitor against exhaustive search."""

from __future__ import annotations

import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bridgesim.monitors import CausalEvent, diagnose_causality
from bridgesim.oracle import MAX_ORACLE_EVENTS, brute_force_causality, brute_force_grouped

SLOTS = [(key, t) for key in "AB" for t in range(4)]


def _events(picks, side):
    return [CausalEvent(k, t, f"{side}{i}") for i, (k, t) in enumerate(picks)]


def _monitor(locks, mints, horizon, grace):
    found = diagnose_causality(locks, mints, horizon, grace)
    return None if found is None else found[0]


def small_instances():
    sides = [c for n in range(3) for c in itertools.combinations_with_replacement(SLOTS, n)]
    for locks, mints in itertools.product(sides, sides):
        for grace in (5, 8):
            yield _events(locks, "L"), _events(mints, "M"), 10, grace


def test_exhaustive_small_instances():
    count = 0
    for locks, mints, horizon, grace in small_instances():
        expect = brute_force_causality(locks, mints, horizon, grace)
        assert _monitor(locks, mints, horizon, grace) == expect, (locks, mints, grace)
        assert brute_force_grouped(locks, mints, horizon, grace) == expect
        count += 1
    assert count >= 1000


def test_seeded_medium_instances():
    rng = random.Random(20240611)
    for _ in range(600):
        n = rng.randint(5, 8)
        split = rng.randint(0, n)
        locks = [CausalEvent(rng.choice("ABC"), rng.randint(0, 6), f"L{i}") for i in range(split)]
        mints = [CausalEvent(rng.choice("ABC"), rng.randint(0, 6), f"M{i}")
                 for i in range(n - split)]
        rng.shuffle(locks)
        rng.shuffle(mints)
        grace = rng.randint(0, 8)
        assert _monitor(locks, mints, 8, grace) == brute_force_causality(locks, mints, 8, grace)


_event = st.tuples(st.sampled_from("AB"), st.integers(0, 5))


@settings(max_examples=300, deadline=None)
@given(st.lists(_event, max_size=4), st.lists(_event, max_size=4), st.integers(0, 7))
def test_monitor_agrees_with_brute_force(lock_picks, mint_picks, grace):
    locks, mints = _events(lock_picks, "L"), _events(mint_picks, "M")
    assert _monitor(locks, mints, 7, grace) == brute_force_causality(locks, mints, 7, grace)


def test_oracle_refuses_large_inputs():
    locks = [CausalEvent("A", 0, f"L{i}") for i in range(MAX_ORACLE_EVENTS + 1)]
    with pytest.raises(ValueError):
        brute_force_causality(locks, [], 1, 1)
