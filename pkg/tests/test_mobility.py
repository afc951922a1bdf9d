import io
import random

import pytest

from replisim.geometry import Area, euclidean_distance
from replisim.mobility import dump_trace_csv, generate_trace, static_trace

AREA = Area(200.0, 200.0)


def test_same_seed_same_trace():
    a = generate_trace(AREA, 10, 3.0, 100.0, 1000.0, seed=42)
    b = generate_trace(AREA, 10, 3.0, 100.0, 1000.0, seed=42)
    assert a.legs == b.legs
    assert a.initial_positions == b.initial_positions


def test_different_seed_differs():
    a = generate_trace(AREA, 10, 3.0, 100.0, 1000.0, seed=1)
    b = generate_trace(AREA, 10, 3.0, 100.0, 1000.0, seed=2)
    assert a.initial_positions != b.initial_positions


def test_pause_equal_to_duration_keeps_node_still():
    trace = generate_trace(AREA, 4, 3.0, 500.0, 500.0, seed=9)
    for node in trace.node_ids:
        start = trace.position_at(node, 0.0)
        for t in (0.0, 123.4, 499.9, 500.0):
            assert trace.position_at(node, t) == start


def test_linear_interpolation_on_leg():
    trace = generate_trace(AREA, 6, 3.0, 10.0, 2000.0, seed=5)
    legs = trace.legs[2]
    moving = [leg for leg in legs if leg.start != leg.end][0]
    # halfway in time lands halfway in space
    mid = (moving.depart_time + moving.arrival_time) / 2
    p = trace.position_at(2, mid)
    assert p.x == pytest.approx((moving.start.x + moving.end.x) / 2)
    assert p.y == pytest.approx((moving.start.y + moving.end.y) / 2)
    assert trace.position_at(2, moving.depart_time) == moving.start
    # any time inside the pause sits at the destination
    inside_pause = moving.arrival_time + moving.pause_after / 2
    if inside_pause <= trace.duration:
        assert trace.position_at(2, inside_pause) == moving.end


def test_explicit_leg_geometry():
    trace = generate_trace(
        AREA, 1, 3.0, 0.0, 20.0, seed=1, initial_positions={0: (0.0, 0.0)}
    )
    leg = trace.legs[0][1]  # first moving leg, departs at t=0 pause
    t = leg.depart_time + 5.0
    if t < leg.arrival_time:
        p = trace.position_at(0, t)
        expect = 3.0 * 5.0  # distance covered in 5 s
        assert euclidean_distance(leg.start, p) == pytest.approx(expect)


def test_legs_time_contiguous():
    trace = generate_trace(AREA, 8, 3.0, 50.0, 3000.0, seed=3)
    for node in trace.node_ids:
        legs = trace.legs[node]
        for a, b in zip(legs, legs[1:]):
            assert a.release_time == pytest.approx(b.depart_time)
            assert a.end == b.start
        assert legs[-1].release_time >= trace.duration


def test_positions_stay_inside_area():
    trace = generate_trace(AREA, 10, 3.0, 20.0, 2000.0, seed=8)
    rng = random.Random(0)
    for _ in range(300):
        node = rng.randrange(10)
        t = rng.uniform(0.0, 2000.0)
        p = trace.position_at(node, t)
        assert AREA.contains(p)


def test_speed_bound_continuity():
    trace = generate_trace(AREA, 6, 3.0, 20.0, 1000.0, seed=4)
    rng = random.Random(1)
    for _ in range(200):
        node = rng.randrange(6)
        t = rng.uniform(0.0, 990.0)
        delta = rng.uniform(0.0, 10.0)
        d = euclidean_distance(trace.position_at(node, t), trace.position_at(node, t + delta))
        assert d <= 3.0 * delta + 1e-9


def test_fixed_speed_on_every_leg():
    trace = generate_trace(AREA, 5, 3.0, 100.0, 5000.0, seed=6)
    assert all(leg.speed == 3.0 for legs in trace.legs.values() for leg in legs)


def test_static_trace():
    trace = static_trace(AREA, {0: (5.0, 5.0), 1: (10.0, 20.0)}, 100.0)
    assert trace.static
    assert trace.position_at(0, 0.0) == trace.position_at(0, 99.0) == (5.0, 5.0)


def test_zero_speed_rejected():
    with pytest.raises(ValueError, match="speed"):
        generate_trace(AREA, 3, 0.0, 100.0, 100.0, seed=1)


def test_time_out_of_range_rejected():
    trace = generate_trace(AREA, 2, 3.0, 10.0, 100.0, seed=1)
    with pytest.raises(ValueError):
        trace.position_at(0, -1.0)
    with pytest.raises(ValueError):
        trace.position_at(0, 100.5)


def test_csv_dump():
    trace = generate_trace(AREA, 2, 3.0, 10.0, 5.0, seed=2)
    buf = io.StringIO()
    dump_trace_csv(trace, buf, step=1.0)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "node,t,x,y"
    assert len(lines) == 1 + 2 * 6  # header + two nodes sampled at t=0..5
