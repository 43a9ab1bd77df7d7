import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparq.errors import EmptyList, FormatError, GridMisaligned, LengthMismatch, SizeMismatch
from sparq.preprocess import GridSeries
from sparq.recurrence import (MatrixShape, RecurrenceMatrix, accumulate, combine_dimensions,
                              cross_recurrence, self_recurrence, spatial_cross_recurrence)
from sparq.testkit import bundled_melody, pack_rows_naive

UPPER = MatrixShape.UPPER_TRIANGLE


def naive_cross(a, b):
    return [[1 if a[i] == b[j] else 0 for j in range(len(b))] for i in range(len(a))]


def grid(cx, cy, gaps=None, start=0, agent="g"):
    gaps = [False] * len(cx) if gaps is None else gaps
    return GridSeries(agent, start, cx, cy, gaps, 300)


def upper(arr):
    return RecurrenceMatrix.from_bool(np.array(arr, dtype=bool), UPPER)


def test_self_recurrence_small():
    assert self_recurrence([1, 2, 1]).to_bool().astype(int).tolist() == [[1, 0, 1], [0, 1, 0], [1, 0, 1]]


def test_constant_series_all_ones():
    assert self_recurrence([7] * 4).to_bool().all()


def test_frere_jacques_first_phrase_repeats_at_lag_4():
    notes = bundled_melody("frere_jacques")[:8]
    m = self_recurrence(notes).to_bool()
    oracle = naive_cross(notes, notes)
    assert m.astype(int).tolist() == oracle
    assert all(oracle[i][i + 4] for i in range(4))
    assert not all(oracle[i][i + 3] for i in range(4))


def test_happy_birthday_vs_frere_jacques_matches_brute_force():
    hb = bundled_melody("happy_birthday")
    fj = bundled_melody("frere_jacques")[: len(hb)]
    m = cross_recurrence(hb, fj)
    assert m.to_bool().astype(int).tolist() == naive_cross(hb, fj)


def test_cross_recurrence_small():
    assert cross_recurrence([1, 2], [2, 1]).to_bool().astype(int).tolist() == [[0, 1], [1, 0]]


def test_cross_equals_self_for_identical_series():
    s = [3, 1, 4, 1, 5, 9, 2, 6]
    assert cross_recurrence(s, s) == self_recurrence(s)


def test_cross_recurrence_length_mismatch():
    with pytest.raises(LengthMismatch):
        cross_recurrence([1, 2, 3], [1, 2])


@given(st.lists(st.integers(0, 5), min_size=1, max_size=150))
def test_self_recurrence_symmetric_unit_diagonal(s):
    b = self_recurrence(s).to_bool()
    assert np.array_equal(b, b.T)
    assert b.diagonal().all()


@settings(max_examples=60)
@given(st.integers(1, 300), st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_packed_matches_naive_boolean(n, alphabet, seed):
    rng = random.Random(seed)
    a = [rng.randrange(alphabet) for _ in range(n)]
    b = [rng.randrange(alphabet) for _ in range(n)]
    m = cross_recurrence(a, b)
    naive = naive_cross(a, b)
    assert m == pack_rows_naive(naive, MatrixShape.FULL)
    assert m.to_bool().astype(int).tolist() == naive
    i, j = rng.randrange(n), rng.randrange(n)
    assert m[i, j] == naive[i][j]


def test_spatial_stationary_same_cell():
    rx, ry = spatial_cross_recurrence(grid([4] * 3, [9] * 3), grid([4] * 3, [9] * 3))
    assert rx.to_bool().all() and ry.to_bool().all()


def test_spatial_single_plane_match():
    rx, ry = spatial_cross_recurrence(grid([1, 2, 3], [5, 5, 5]), grid([10, 11, 12], [5, 5, 5]))
    assert ry.to_bool().all()
    assert not rx.to_bool().any()
    assert combine_dimensions(rx, ry).popcount() == 0


def test_spatial_gap_zeroes_column():
    healthy = grid([0, 0, 0], [0, 0, 0], [False, True, False])
    contagious = grid([0, 0, 0], [0, 0, 0])
    for m in spatial_cross_recurrence(healthy, contagious):
        b = m.to_bool()
        assert not b[:, 1].any()
        assert b.sum() == 6


def test_spatial_both_gaps_never_match():
    g = [True, True]
    rx, ry = spatial_cross_recurrence(grid([0, 0], [0, 0], g), grid([0, 0], [0, 0], g))
    assert rx.popcount() == ry.popcount() == 0


def test_spatial_index_convention():
    # contagious in cell 1 at window 0, healthy reaches it at window 2
    healthy = grid([0, 0, 1], [0, 0, 0])
    contagious = grid([1, 5, 5], [0, 0, 0])
    m = combine_dimensions(*spatial_cross_recurrence(healthy, contagious))
    assert m[0, 2] == 1
    assert m.popcount() == 1


def test_spatial_errors():
    with pytest.raises(LengthMismatch):
        spatial_cross_recurrence(grid([0, 0], [0, 0]), grid([0], [0]))
    with pytest.raises(GridMisaligned):
        spatial_cross_recurrence(grid([0], [0], start=1), grid([0], [0], start=2))


def test_combine_examples():
    n = 5
    ones = RecurrenceMatrix.from_bool(np.ones((n, n), bool))
    zeros = RecurrenceMatrix.zeros(n)
    assert combine_dimensions(ones, zeros).popcount() == 0
    eye = RecurrenceMatrix.from_bool(np.eye(n, dtype=bool))
    c = combine_dimensions(eye, eye)
    assert c.shape == UPPER
    assert np.array_equal(c.to_bool(), np.eye(n, dtype=bool))
    with pytest.raises(SizeMismatch):
        combine_dimensions(eye, RecurrenceMatrix.zeros(4))


@settings(max_examples=50)
@given(st.integers(1, 130), st.integers(0, 2 ** 32 - 1))
def test_combine_is_upper_product(n, seed):
    rng = np.random.default_rng(seed)
    ax, ay = rng.random((n, n)) < 0.5, rng.random((n, n)) < 0.5
    c = combine_dimensions(RecurrenceMatrix.from_bool(ax), RecurrenceMatrix.from_bool(ay)).to_bool()
    assert np.array_equal(c, np.triu(ax & ay))
    assert np.all(c <= np.minimum(ax, ay))


def test_accumulate_examples():
    a = upper([[1, 0, 0], [0, 0, 1], [0, 0, 0]])
    acc = accumulate([a])
    assert np.array_equal(acc.counts, a.to_bool())
    acc3 = accumulate([a, a, a])
    assert np.array_equal(acc3.counts, 3 * a.to_bool().astype(int))
    assert acc3.contributor_count == 3
    p = upper([[0, 1, 0], [0, 0, 0], [0, 0, 0]])
    q = upper([[0, 0, 0], [0, 0, 0], [0, 0, 1]])
    acc = accumulate([p, q])
    assert acc.counts.tolist() == [[0, 1, 0], [0, 0, 0], [0, 0, 1]]


def test_accumulate_errors():
    with pytest.raises(EmptyList):
        accumulate([])
    with pytest.raises(SizeMismatch):
        accumulate([RecurrenceMatrix.zeros(3, UPPER), RecurrenceMatrix.zeros(4, UPPER)])


@settings(max_examples=30)
@given(st.integers(1, 40), st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_accumulate_permutation_invariant_and_bounded(n, k, seed):
    rng = np.random.default_rng(seed)
    ms = [upper(rng.random((n, n)) < 0.3) for _ in range(k)]
    acc = accumulate(ms)
    perm = accumulate([ms[i] for i in rng.permutation(k)])
    assert np.array_equal(acc.counts, perm.counts)
    assert acc.counts.max(initial=0) <= acc.contributor_count
    # associative merge of partial accumulators
    if k > 1:
        merged = accumulate(ms[:1]).merge(accumulate(ms[1:]))
        assert np.array_equal(merged.counts, acc.counts)


@settings(max_examples=40)
@given(st.integers(0, 200), st.sampled_from(list(MatrixShape)), st.integers(0, 2 ** 32 - 1))
def test_serialization_round_trip(n, shape, seed):
    rng = np.random.default_rng(seed)
    m = RecurrenceMatrix.from_bool(rng.random((n, n)) < 0.4, shape)
    data = m.to_bytes()
    assert data[:4] == b"SPRQ"
    assert data[4] == 1 and data[5] == int(shape)
    assert int.from_bytes(data[6:10], "little") == n
    assert len(data) == 10 + n * ((n + 7) // 8)
    assert RecurrenceMatrix.from_bytes(data) == m


def test_serialization_layout():
    m = RecurrenceMatrix.from_bool(np.array([[1, 0, 0], [1, 1, 1], [0, 0, 1]], bool))
    assert m.to_bytes()[10:] == bytes([0b001, 0b111, 0b100])


@pytest.mark.parametrize("data", [b"", b"XXXX\x01\x00\x01\x00\x00\x00\x00", b"SPRQ\x02\x00\x01\x00\x00\x00\x00",
                                  b"SPRQ\x01\x00\x02\x00\x00\x00\x00", b"SPRQ\x01\x00\x01\x00\x00\x00\x02",
                                  b"SPRQ\x01\x01\x02\x00\x00\x00\x00\x01"])
def test_deserialization_rejects_bad_input(data):
    with pytest.raises(FormatError):
        RecurrenceMatrix.from_bytes(data)
