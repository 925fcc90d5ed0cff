import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tubeltl.abstraction import label_state
from tubeltl.geometry import GeometryError, Polytope, Workspace
from tubeltl.ltl import Plan, parse
from tubeltl.semantics import (
    FAIL,
    INCOMPLETE,
    PASS,
    EmptyTrace,
    check_run,
    extract_trace,
    trajectory_of_interest,
)

WS = Workspace(
    Polytope.box([-5, -5], [5, 5]),
    [Polytope.box([-0.5, 2], [0.5, 3])],
    [Polytope.box([-3, -0.5], [-2, 0.5]), Polytope.box([2, -0.5], [3, 0.5]), Polytope.box([-0.5, -3], [0.5, -2])],
)
IN = {1: [-2.5, 0.0], 2: [2.5, 0.0], 3: [0.0, -2.5]}
FREE = [0.0, 0.0]


def states(*labels):
    return np.array([IN[a] if a else FREE for a in labels], float)


def test_label_state():
    assert label_state(WS, WS.center(2)) == 2
    assert label_state(WS, FREE) == 0
    with pytest.raises(GeometryError, match="free space"):
        label_state(WS, [0.0, 2.5])


def test_trajectory_of_interest_example():
    X = states(1, 1, 1, 0, 0, 0, 2, 2, 2)
    idx, labels = trajectory_of_interest(WS, X)
    assert idx.tolist() == [0, 1, 2, 6, 7, 8]
    assert labels == [1, 1, 1, 2, 2, 2]


def test_trajectory_of_interest_edge_cases():
    assert len(trajectory_of_interest(WS, states(0, 0, 0))[0]) == 0
    assert trajectory_of_interest(WS, states(3, 3, 3))[0].tolist() == [0, 1, 2]


def test_trace_example_eventually_constant():
    tr = extract_trace(WS, states(1, 1, 1, 0, 0, 0, 2, 2, 2))
    assert tr.letters == [1, 2]
    assert tr.steps == [0, 6]
    assert tr.constant
    assert str(tr) == "p1 p2 ..."


def test_trace_alternating():
    tr = extract_trace(WS, states(1, 0, 2, 0, 1, 0, 2, 0))
    assert tr.letters == [1, 2, 1, 2]
    assert not tr.constant


def test_trace_single_region():
    tr = extract_trace(WS, states(1, 1, 1))
    assert tr.letters == [1] and tr.constant


def test_trace_empty():
    with pytest.raises(EmptyTrace):
        extract_trace(WS, states(0, 0))


label_lists = st.lists(st.sampled_from([0, 1, 2, 3]), min_size=1, max_size=25).filter(lambda v: any(v))


@settings(max_examples=80, deadline=None)
@given(label_lists, st.data())
def test_stutter_and_dummy_invariance(labels, data):
    base = extract_trace(WS, states(*labels))
    assert 0 not in base.letters
    pos = data.draw(st.integers(0, len(labels) - 1))
    dup = labels[:pos + 1] + [labels[pos]] + labels[pos + 1:]
    assert extract_trace(WS, states(*dup)).letters == base.letters
    ins = data.draw(st.integers(0, len(labels)))
    with_dummy = labels[:ins] + [0] + labels[ins:]
    assert extract_trace(WS, states(*with_dummy)).letters == base.letters


# ---------------------------------------------------------------- check_run

PHI_CYCLE = parse("G(F p1 & F p2)")
CYCLE_PLAN = Plan([1], [2, 1])
PHI_REACH = parse("F p2 & F G p3")
REACH_PLAN = Plan([1, 2, 3], [3])


def test_cycle_run_passes():
    v = check_run(PHI_CYCLE, CYCLE_PLAN, WS, states(1, 0, 2, 0, 1, 0, 2, 0, 1))
    assert v.status == PASS


def test_cycle_run_too_short_is_incomplete():
    v = check_run(PHI_CYCLE, CYCLE_PLAN, WS, states(1, 0, 2, 0, 1))
    assert v.status == INCOMPLETE


def test_clipping_an_off_plan_region_fails():
    v = check_run(PHI_CYCLE, CYCLE_PLAN, WS, states(1, 0, 3, 0, 2, 0, 1, 0, 2, 0, 1))
    assert v.status == FAIL
    assert v.divergence == 1


def test_run_through_obstacle_fails():
    X = states(1, 0, 2, 0, 1, 0, 2, 0, 1)
    X[3] = [0.0, 2.5]
    v = check_run(PHI_CYCLE, CYCLE_PLAN, WS, X)
    assert v.status == FAIL
    assert "free space" in v.reason


def test_plan_not_satisfying_formula_fails():
    v = check_run(parse("F p3"), CYCLE_PLAN, WS, states(1, 0, 2, 0, 1, 0, 2, 0, 1))
    assert v.status == FAIL


def test_constant_plan_needs_final_region():
    assert check_run(PHI_REACH, REACH_PLAN, WS, states(1, 0, 2, 0, 3, 3)).status == PASS
    assert check_run(PHI_REACH, REACH_PLAN, WS, states(1, 0, 2, 0, 3, 0)).status == INCOMPLETE
    assert check_run(PHI_REACH, REACH_PLAN, WS, states(1, 0, 2)).status == INCOMPLETE
    v = check_run(PHI_REACH, REACH_PLAN, WS, states(1, 0, 2, 0, 3, 0, 1))
    assert v.status == FAIL and v.divergence == 3


def test_empty_run_is_incomplete():
    assert check_run(PHI_CYCLE, CYCLE_PLAN, WS, states(0, 0)).status == INCOMPLETE
