"""Sampler tests: fixed vectors, independent oracles, and invariants."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridqa.errors import InvalidArgument
from gridqa.sampling import FramePlan, plan


def oracle_plan(total: int, side: int) -> list[int]:
    """Interval-enumeration oracle, independent of the closed-form index.

    Interval i spans real time [i*total/cells, (i+1)*total/cells); its
    midpoint is (2i+1)*total / (2*cells). The sampled frame is the one whose
    unit slot [j, j+1) contains that midpoint, located by bisecting on the
    slot-containment predicate with exact integer comparisons.
    """
    cells = side * side
    den = 2 * cells
    picks = []
    for i in range(cells):
        mid_num = (2 * i + 1) * total  # midpoint == mid_num / den
        lo, hi = 0, total - 1
        while lo < hi:  # smallest j with (j+1)*den > mid_num
            j = (lo + hi) // 2
            if (j + 1) * den > mid_num:
                hi = j
            else:
                lo = j + 1
        picks.append(lo)
    return picks


def oracle_plan_slow(total: int, side: int) -> list[int]:
    """Same contract as oracle_plan but by linear scan over every frame slot."""
    cells = side * side
    picks = []
    for i in range(cells):
        mid_num = (2 * i + 1) * total
        for j in range(total):
            if 2 * j * cells <= mid_num < 2 * (j + 1) * cells:
                picks.append(j)
                break
    return picks


FIXED_VECTORS = [
    (16, 2, [2, 6, 10, 14]),
    (9, 3, [0, 1, 2, 3, 4, 5, 6, 7, 8]),
    (100, 3, [5, 16, 27, 38, 50, 61, 72, 83, 94]),
    (5, 3, [0, 0, 1, 1, 2, 3, 3, 4, 4]),
]


@pytest.mark.parametrize("total,side,expected", FIXED_VECTORS)
def test_fixed_vectors(total, side, expected):
    assert plan(total, side) == expected
    assert oracle_plan(total, side) == expected
    assert oracle_plan_slow(total, side) == expected


@pytest.mark.parametrize("total,side", [(0, 3), (-1, 1), (10, 0), (5, -2)])
def test_invalid_arguments(total, side):
    with pytest.raises(InvalidArgument):
        plan(total, side)


def test_oracle_equivalence_random():
    rng = random.Random(20240917)
    for _ in range(300):
        total = rng.randint(1, 100_000)
        side = rng.randint(1, 8)
        assert plan(total, side) == oracle_plan(total, side), (total, side)


def test_slow_oracle_equivalence_small():
    rng = random.Random(7)
    for _ in range(150):
        total = rng.randint(1, 2000)
        side = rng.randint(1, 8)
        assert plan(total, side) == oracle_plan_slow(total, side), (total, side)


@given(total=st.integers(1, 100_000), side=st.integers(1, 8))
@settings(max_examples=200, deadline=None)
def test_plan_invariants(total, side):
    cells = side * side
    indices = plan(total, side)
    assert len(indices) == cells
    assert all(0 <= ix < total for ix in indices)
    assert all(a <= b for a, b in zip(indices, indices[1:]))
    if total >= cells:
        assert all(a < b for a, b in zip(indices, indices[1:]))


@given(total=st.integers(1, 100_000), side=st.integers(1, 8))
@settings(max_examples=200, deadline=None)
def test_sampled_index_overlaps_its_interval(total, side):
    # Frame slot [ix, ix+1) must overlap interval [i*M/cells, (i+1)*M/cells).
    cells = side * side
    for i, ix in enumerate(plan(total, side)):
        assert ix * cells < (i + 1) * total
        assert (ix + 1) * cells > i * total


@given(side=st.integers(1, 8), scale=st.integers(1, 1500))
@settings(max_examples=150, deadline=None)
def test_shift_symmetry_for_exact_multiples(side, scale):
    # M = k * N^2 spaces samples exactly k apart starting at floor(k/2).
    cells = side * side
    assert plan(scale * cells, side) == [scale * i + scale // 2 for i in range(cells)]


@given(total=st.integers(1, 100_000))
@settings(max_examples=100, deadline=None)
def test_single_cell_takes_middle_frame(total):
    assert plan(total, 1) == [total // 2]


def test_interval_containment_when_enough_frames():
    # For M >= N^2 every interval [floor(i*M/cells), ceil((i+1)*M/cells))
    # holds its own sample. Adjacent widened intervals overlap by up to one
    # frame unless M is an exact multiple, so exclusivity is only checked
    # in the exact case.
    rng = random.Random(99)
    for _ in range(200):
        side = rng.randint(1, 8)
        cells = side * side
        total = rng.randint(cells, 50_000)
        indices = plan(total, side)
        exact = total % cells == 0
        for i, ix in enumerate(indices):
            lo = (i * total) // cells
            hi = -(-((i + 1) * total) // cells)  # ceil
            assert lo <= ix < hi, (total, side, i)
            if exact:
                others = indices[:i] + indices[i + 1 :]
                assert all(not (lo <= other < hi) for other in others)


def test_frame_plan_validation():
    plan_ok = FramePlan.for_video("vid", 16, 2)
    assert plan_ok.indices == (2, 6, 10, 14)
    with pytest.raises(InvalidArgument):
        FramePlan(video_id="v", total_frames=16, grid_side=2, indices=(1, 2, 3))
    with pytest.raises(InvalidArgument):
        FramePlan(video_id="v", total_frames=4, grid_side=2, indices=(0, 1, 2, 4))
    with pytest.raises(InvalidArgument):
        FramePlan(video_id="v", total_frames=16, grid_side=2, indices=(6, 2, 10, 14))


def test_frame_plan_round_trip():
    original = FramePlan.for_video("vid07", 100, 3)
    assert FramePlan.from_dict(original.to_dict()) == original
