import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sparq.errors import DuplicateTimestamp, EmptyInput, InsufficientOverlap, MalformedRecord
from sparq.ingest import (ProjectionConfig, ProjectionMode, Trajectory, parse_trajectory,
                          serialize_trajectory, validate_overlap)

EQ = ProjectionMode.EQUIRECTANGULAR


def traj(ts, agent="a"):
    return Trajectory(agent, np.array(ts), np.zeros(len(ts)), np.zeros(len(ts)))


def test_parse_csv_without_header():
    t = parse_trajectory(b"a1,0,0.0,0.0\na1,60,10.0,0.0", "csv")
    assert t.agent_id == "a1"
    assert list(t.samples) == [(0, 0.0, 0.0), (60, 10.0, 0.0)]


def test_parse_csv_with_header_and_unsorted_rows():
    t = parse_trajectory(b"agent_id,timestamp,x,y\nb,120,1.5,2\nb,60,3,4\n", "csv")
    assert t.t.tolist() == [60, 120]
    assert t.x.tolist() == [3.0, 1.5]


def test_parse_jsonl():
    data = "\n".join(json.dumps({"agent_id": "z", "timestamp": ts, "x": ts / 2, "y": -1.0}) for ts in (5, 1))
    t = parse_trajectory(data.encode(), "jsonl")
    assert t.t.tolist() == [1, 5]
    assert t.x.tolist() == [0.5, 2.5]


@pytest.mark.parametrize("data", [
    b"a1,0,abc,0.0",
    b"a1,0,1.0",
    b"a1,1.5,1.0,2.0",
    b"a1,-1,1.0,2.0",
    b"a1,0,nan,2.0",
    b"a1,0,1,2\na2,60,1,2",
    b"agent_id,timestamp,lat,lon\na1,0,1,2",
    b"\xff\xfe",
])
def test_malformed_csv(data):
    with pytest.raises(MalformedRecord):
        parse_trajectory(data, "csv")


def test_malformed_reports_line():
    with pytest.raises(MalformedRecord) as exc:
        parse_trajectory(b"a,0,1,1\na,60,1,1\na,120,x,1\n", "csv")
    assert exc.value.line == 3


def test_malformed_jsonl():
    with pytest.raises(MalformedRecord):
        parse_trajectory(b'{"agent_id": "a", "timestamp": 0, "x": 1}', "jsonl")
    with pytest.raises(MalformedRecord):
        parse_trajectory(b"[1, 2]", "jsonl")


def test_duplicate_timestamp():
    with pytest.raises(DuplicateTimestamp) as exc:
        parse_trajectory(b"a,60,1,1\na,0,2,2\na,60,3,3", "csv")
    assert exc.value.t == 60


def test_empty_input():
    with pytest.raises(EmptyInput):
        parse_trajectory(b"", "csv")
    with pytest.raises(EmptyInput):
        parse_trajectory(b"agent_id,timestamp,x,y\n\n", "csv")


def test_equirectangular_projection():
    proj = ProjectionConfig(0.0, EQ)
    t = parse_trajectory(b"agent_id,timestamp,lat,lon\na,0,0.0,0.001", "csv", proj)
    assert t.x[0] == pytest.approx(0.001 * math.cos(0.0) * 111320)
    assert t.x[0] == pytest.approx(111.32)
    assert t.y[0] == 0.0


def test_equirectangular_reference_latitude():
    x, y = ProjectionConfig(60.0, EQ).project(1.0, 1.0)
    assert x == pytest.approx(0.5 * 111320)
    assert y == pytest.approx(110540)


def test_projection_rejects_bad_latitude():
    with pytest.raises(ValueError):
        ProjectionConfig(91.0, EQ)


@given(st.floats(-89, 89), st.floats(-179, 179), st.floats(1e-6, 1.0))
def test_projection_monotone_in_longitude(ref_lat, lon, step):
    proj = ProjectionConfig(ref_lat, EQ)
    assert proj.project(10.0, lon + step)[0] > proj.project(10.0, lon)[0]


finite = st.floats(-1e7, 1e7, allow_nan=False, allow_infinity=False)


@given(st.dictionaries(st.integers(0, 10 ** 9), st.tuples(finite, finite), min_size=1, max_size=40),
       st.sampled_from(["csv", "jsonl"]))
def test_round_trip(rows, fmt):
    t = Trajectory.from_samples("agent-7", [(ts, x, y) for ts, (x, y) in rows.items()])
    back = parse_trajectory(serialize_trajectory(t, fmt), fmt)
    assert back.agent_id == t.agent_id
    assert back.t.tolist() == t.t.tolist()
    np.testing.assert_allclose(back.x, t.x, rtol=0, atol=1e-9)
    np.testing.assert_allclose(back.y, t.y, rtol=0, atol=1e-9)


def test_overlap_examples():
    assert validate_overlap(traj([0, 1000]), traj([500, 2000]), 100) == (500, 1000)
    assert validate_overlap(traj([0, 600]), traj([0, 600]), 600) == (0, 600)
    with pytest.raises(InsufficientOverlap):
        validate_overlap(traj([0, 100]), traj([200, 300]), 0)
    with pytest.raises(InsufficientOverlap):
        validate_overlap(traj([0, 1000]), traj([900, 2000]), 101)


@given(st.lists(st.integers(0, 5000), min_size=1, max_size=5, unique=True),
       st.lists(st.integers(0, 5000), min_size=1, max_size=5, unique=True),
       st.integers(0, 2000))
def test_overlap_symmetric(a, b, min_s):
    ta, tb = traj(sorted(a)), traj(sorted(b))
    try:
        ab = validate_overlap(ta, tb, min_s)
    except InsufficientOverlap:
        with pytest.raises(InsufficientOverlap):
            validate_overlap(tb, ta, min_s)
    else:
        assert validate_overlap(tb, ta, min_s) == ab


def test_trajectory_invariants():
    with pytest.raises(ValueError):
        Trajectory("", np.array([0]), np.array([0.0]), np.array([0.0]))
    with pytest.raises(ValueError):
        Trajectory("a", np.array([5, 5]), np.zeros(2), np.zeros(2))
    with pytest.raises(ValueError):
        Trajectory("a", np.array([0]), np.array([np.inf]), np.array([0.0]))
