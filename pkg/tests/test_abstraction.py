import numpy as np
import pytest

from tubeltl.abstraction import (
    AbstractionOptions,
    TransitionSystem,
    TubeLibrary,
    build,
    certify_pair,
    content_hash,
    default_shape,
    label_state,
    load_cache,
    proposition,
    save_cache,
)
from tubeltl.dynamics import LtiModel
from tubeltl.geometry import GeometryError, Polytope, Workspace, contains_polytope
from tubeltl.tubesynth import verify_tubes

REQUIRED = {(2, 3), (3, 4), (4, 1), (1, 2), (1, 1), (2, 2), (3, 3), (4, 4)}


def integrator(w=0.05, u=0.5):
    return LtiModel(np.eye(2), np.eye(2), Polytope.box([-u, -u], [u, u]), Polytope.box([-w, -w], [w, w]))


def test_case_study_states_and_required_edges(case_study):
    ts = case_study.ts
    assert ts.n_states == 4
    assert ts.init == 2
    assert REQUIRED <= ts.edges
    assert len(ts.edges) >= 12


def test_labels_and_region_map_are_bijective(case_study):
    ts = case_study.ts
    assert sorted(ts.label(s) for s in ts.states) == ts.states
    for s in ts.states:
        assert ts.state_of(ts.region_of(s)) == s
        assert proposition(ts.label(s)) == f"p{s}"


def test_every_edge_has_a_library_entry(case_study):
    ts, lib = case_study.ts, case_study.lib
    for a, b in ts.edges:
        if a == b:
            assert lib.invariance[a].invariant
        else:
            assert lib.reach[(a, b)]
    assert set(lib.reach) == {e for e in ts.edges if e[0] != e[1]}


def test_library_tubes_pass_post_hoc_checks(case_study):
    cfg, lib = case_study.cfg, case_study.lib
    for (i, j), tubes in lib.reach.items():
        for t in tubes:
            assert verify_tubes(cfg.model, cfg.workspace, t) == [], (i, j)
            assert contains_polytope(cfg.workspace.region(i), t.section(0))


def test_cache_round_trip(case_study, tmp_path):
    key = case_study.cfg.abstraction_key()
    ts, lib, report = load_cache(case_study.cache, key)
    assert ts == case_study.ts
    assert set(lib.reach) == set(case_study.lib.reach)
    path = tmp_path / "again.json"
    save_cache(path, key, ts, lib, report)
    assert path.read_bytes() == case_study.cache.read_bytes()


def test_stale_or_missing_cache(case_study, tmp_path):
    assert load_cache(case_study.cache, "other-key") is None
    assert load_cache(tmp_path / "none.json") is None


def test_pair_certificate_is_deterministic(case_study):
    cfg = case_study.cfg
    a = certify_pair(cfg.model, cfg.workspace, 2, 3, cfg.shape, cfg.abstraction)
    b = certify_pair(cfg.model, cfg.workspace, 2, 3, cfg.shape, cfg.abstraction)
    assert a.tubes[0].to_dict() == b.tubes[0].to_dict()


def test_label_state_on_case_study(case_study):
    ws = case_study.cfg.workspace
    assert label_state(ws, ws.center(2)) == 2
    assert label_state(ws, [0.0, 2.0]) == 0
    with pytest.raises(GeometryError):
        label_state(ws, [0.0, 0.0])


def test_single_invariant_region():
    ws = Workspace(Polytope.box([-5, -5], [5, 5]), [], [Polytope.box([-1, -1], [1, 1])])
    ts, lib, report = build(integrator(), ws, 1)
    assert ts.n_states == 1
    assert ts.edges == {(1, 1)}
    assert report[(1, 1)]["status"] == "invariant"


def test_wall_disconnects_regions():
    wall = Polytope.box([-0.25, -5], [0.25, 5])
    ws = Workspace(Polytope.box([-5, -5], [5, 5]), [wall],
                   [Polytope.box([-3, -0.5], [-2, 0.5]), Polytope.box([2, -0.5], [3, 0.5])])
    opts = AbstractionOptions(seeds=(0,), budget=1500)
    ts, lib, report = build(integrator(), ws, 1, options=opts)
    assert ts.edges == {(1, 1), (2, 2)}
    assert report[(1, 2)]["status"] == "not-certified"
    assert lib.reach == {}


def test_corridor_pair_is_certified_with_default_shape():
    # without obstacles the widest tubes cover both regions and fail the re-entry check
    walls = [Polytope.box([-1.5, 0.75], [1.5, 5]), Polytope.box([-1.5, -5], [1.5, -0.75])]
    ws = Workspace(Polytope.box([-5, -5], [5, 5]), walls,
                   [Polytope.box([-3, -0.5], [-2, 0.5]), Polytope.box([2, -0.5], [3, 0.5])])
    opts = AbstractionOptions(seeds=(0, 1), budget=4000, input_scale=0.5)
    ts, lib, _ = build(integrator(), ws, 1, options=opts)
    assert {(1, 2), (2, 1)} <= ts.edges
    np.testing.assert_allclose(default_shape(ws, 1).vertices.max(axis=0), [0.5, 0.5])


def test_transition_system_validation():
    with pytest.raises(ValueError):
        TransitionSystem(2, 3, set())
    with pytest.raises(ValueError):
        TransitionSystem(2, 1, {(1, 5)})
    ts = TransitionSystem(3, 1, {(1, 2), (1, 3), (2, 2)})
    assert ts.successors(1) == [2, 3]
    assert TransitionSystem.from_dict(ts.to_dict()) == ts


def test_content_hash_is_order_independent():
    assert content_hash({"a": 1, "b": [1, 2]}) == content_hash({"b": [1, 2], "a": 1})
    assert content_hash({"a": 1}) != content_hash({"a": 2})


def test_empty_library_round_trip():
    lib = TubeLibrary()
    assert TubeLibrary.from_dict(lib.to_dict()).reach == {}
