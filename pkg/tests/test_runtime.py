import numpy as np
import pytest

from tubeltl.abstraction import TubeLibrary
from tubeltl.dynamics import LtiModel
from tubeltl.geometry import Polytope, Workspace, contains_point, erode_halfspaces
from tubeltl.ltl import Plan
from tubeltl.runtime import (
    ADVERSARIAL,
    UNIFORM,
    Guide,
    InterpolationError,
    RunLog,
    RuntimeInvariantError,
    compute_controls,
    interpolate_lambda,
    next_comm_time,
    sample_disturbance,
    simulate,
    tightened_margin,
)
from tubeltl.tubesynth import check_invariance

SQUARE = Polytope.box([-1, -1], [1, 1])


def box_model(w=0.1, u=1.0):
    return LtiModel(np.eye(2), np.eye(2), Polytope.box([-u, -u], [u, u]), Polytope.box([-w, -w], [w, w]))


def self_loop_guide(model):
    ws = Workspace(Polytope.box([-5, -5], [5, 5]), [], [SQUARE])
    lib = TubeLibrary({}, {1: check_invariance(model, SQUARE, 1)})
    return Guide(Plan([1], [1]), lib, ws), ws


# ---------------------------------------------------------------- interpolation

def test_interval_barycentric():
    np.testing.assert_allclose(interpolate_lambda([[0.0], [2.0]], [0.5]), [0.75, 0.25], atol=1e-12)


def test_vertex_gives_indicator():
    for s, v in enumerate(SQUARE.vertices):
        lam = interpolate_lambda(SQUARE.vertices, v)
        np.testing.assert_allclose(lam, np.eye(4)[s], atol=1e-12)


def test_center_reconstruction():
    lam = interpolate_lambda(SQUARE.vertices, [0, 0])
    assert np.all(lam >= 0)
    assert lam.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(lam @ SQUARE.vertices, [0, 0], atol=1e-12)


def test_interpolation_is_deterministic():
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.uniform(-1, 1, 2)
        a = interpolate_lambda(SQUARE.vertices, x)
        assert a.tobytes() == interpolate_lambda(SQUARE.vertices, x).tobytes()
        np.testing.assert_allclose(a @ SQUARE.vertices, x, atol=1e-10)


def test_outside_point_raises():
    with pytest.raises(InterpolationError):
        interpolate_lambda(SQUARE.vertices, [1.5, 0])


# ---------------------------------------------------------------- controls

def test_horizon_one():
    model = box_model()
    guide, _ = self_loop_guide(model)
    us, xs = compute_controls(guide, model, 0, [0.2, -0.3], 1)
    assert us.shape == (1, 2) and xs.shape == (2, 2)


def test_vertex_start_uses_stored_control():
    model = box_model()
    guide, _ = self_loop_guide(model)
    cert = guide.library.invariance[1]
    us, _ = compute_controls(guide, model, 0, cert.vertices[2], 3)
    np.testing.assert_allclose(us[0], cert.controls[2], atol=1e-12)


def test_self_loop_nominals_stay_in_tightened_region():
    model = box_model()
    guide, ws = self_loop_guide(model)
    tight = erode_halfspaces(SQUARE, model.W)
    rng = np.random.default_rng(2)
    for _ in range(50):
        _, xs = compute_controls(guide, model, 0, rng.uniform(-1, 1, 2), 10)
        for x in xs[1:]:
            assert contains_point(tight, x, 1e-9)


def test_horizon_must_be_positive():
    model = box_model()
    guide, _ = self_loop_guide(model)
    with pytest.raises(ValueError):
        compute_controls(guide, model, 0, [0, 0], 0)


# ---------------------------------------------------------------- self-trigger

@pytest.mark.parametrize("H, expect", [(10, 10), (20, 10), (3, 3)])
def test_next_comm_time_analytic(H, expect):
    model = box_model()
    guide, _ = self_loop_guide(model)
    assert next_comm_time(guide, model, 0, np.zeros((H + 1, 2)), H) == expect


def test_next_comm_time_zero_only_outside():
    model = box_model()
    guide, _ = self_loop_guide(model)
    nominals = np.zeros((6, 2))
    assert next_comm_time(guide, model, 0, nominals, 5) >= 1
    nominals[0] = [2.0, 0.0]
    assert next_comm_time(guide, model, 0, nominals, 5) == -1


def test_tightened_margin_sign():
    model = box_model()
    guide, _ = self_loop_guide(model)
    assert tightened_margin(guide, model, 0, np.zeros((4, 2))) == pytest.approx(0.9)
    assert tightened_margin(guide, model, 0, np.array([[0, 0], [0.95, 0]])) < 0


# ---------------------------------------------------------------- disturbances

def test_disturbance_sampling():
    W = Polytope.from_vertices(0.15 * np.c_[np.cos(np.arange(8) * np.pi / 4), np.sin(np.arange(8) * np.pi / 4)])
    rng = np.random.default_rng(0)
    for _ in range(200):
        assert contains_point(W, sample_disturbance(W, rng, UNIFORM))
        w = sample_disturbance(W, rng, ADVERSARIAL)
        assert np.min(np.linalg.norm(W.vertices - w, axis=1)) == 0.0
    with pytest.raises(ValueError):
        sample_disturbance(W, rng, "gaussian")


# ---------------------------------------------------------------- closed loop on the case study

def _run(cs, name, seed, steps=300, model=None, mode=UNIFORM, record=True, x0=None):
    cfg = cs.cfg
    guide = Guide(cs.plans[name], cs.lib, cfg.workspace)
    return simulate(model or cfg.model, cfg.workspace, guide, cfg.x0 if x0 is None else x0, cfg.runtime.H,
                    steps, seed, mode, record=record), guide


def test_guide_region_sequence(case_study):
    guide = Guide(case_study.plans["phi1"], case_study.lib, case_study.cfg.workspace)
    p = case_study.plans["phi1"]
    seq = guide.region_sequence(len(p.prefix) + len(p.suffix) - 1)
    assert seq == p.prefix + p.suffix


def test_guide_junction_sections(case_study):
    cfg = case_study.cfg
    guide = Guide(case_study.plans["phi2"], case_study.lib, cfg.workspace)
    leg0_len = case_study.lib.reach[(2, 3)][0].horizon
    guide.select(0, cfg.x0)
    # the state at a junction lies in the last section of the previous leg,
    # which sits inside the first section of the next leg
    guide.select(leg0_len, case_study.lib.reach[(2, 3)][0].centers[-1])
    S_end = guide.membership(leg0_len)
    V, _ = guide.control(leg0_len, case_study.lib.reach[(2, 3)][0].centers[-1])
    Next = Polytope.from_vertices(V)
    assert np.all(S_end.vertices @ Next.A.T <= Next.b + 1e-9)


def test_open_loop_replay_identity(case_study):
    log, _ = _run(case_study, "phi1", 3)
    A = case_study.cfg.model.A
    for k, us, xs in log.predictions:
        ell_star = log.ell_star[k]
        for ell in range(1, ell_star + 1):
            if k + ell > log.steps:
                break
            acc = sum(np.linalg.matrix_power(A, j - 1) @ log.disturbances[k + ell - j] for j in range(1, ell + 1))
            np.testing.assert_allclose(log.states[k + ell], xs[ell] + acc, atol=1e-9)
            np.testing.assert_array_equal(log.inputs[k + ell - 1], us[ell - 1])


def test_disturbance_free_run_follows_nominal(case_study):
    cfg = case_study.cfg
    still = LtiModel(cfg.model.A, cfg.model.B, cfg.model.U, Polytope.singleton([0.0, 0.0]))
    log, _ = _run(case_study, "phi2", 0, steps=200, model=still)
    assert set(log.ell_star[log.comm].tolist()) == {cfg.runtime.H}
    for k, _, xs in log.predictions:
        n = min(cfg.runtime.H, log.steps - k)
        np.testing.assert_allclose(log.states[k:k + n + 1], xs[:n + 1], atol=1e-12)


def test_run_is_deterministic(case_study):
    a, _ = _run(case_study, "phi3", 5, steps=120, record=False)
    b, _ = _run(case_study, "phi3", 5, steps=120, record=False)
    assert a.states.tobytes() == b.states.tobytes()
    assert a.comm.tobytes() == b.comm.tobytes()


def test_run_log_csv_round_trip(case_study, tmp_path):
    log, _ = _run(case_study, "phi2", 1, steps=60, record=False)
    path = tmp_path / "run.csv"
    log.to_csv(path)
    back = RunLog.from_csv(path)
    np.testing.assert_array_equal(back.states, log.states)
    np.testing.assert_array_equal(back.comm, log.comm)
    np.testing.assert_array_equal(back.ell_star, log.ell_star)
    np.testing.assert_array_equal(back.letters, log.letters)
    assert np.isnan(back.inputs[-1]).all()
    assert path.read_text().splitlines()[0] == "k,x0,x1,u0,u1,w0,w1,comm_flag,ell_star,trace_letter"


def test_inputs_between_communications_are_the_packet(case_study):
    log, _ = _run(case_study, "phi1", 2, steps=150)
    for k, us, _ in log.predictions:
        n = min(log.ell_star[k], log.steps - k)
        np.testing.assert_array_equal(log.inputs[k:k + n], us[:n])
        assert not log.comm[k + 1:k + n].any()


@pytest.mark.parametrize("text", ["", "k,x0\n0,1\n", "k,x0,x1,u0,u1,w0,w1,comm_flag,ell_star,trace_letter\n0,a,1,,,,,1,1,p2\n"])
def test_malformed_csv(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(ValueError):
        RunLog.from_csv(path)


def test_start_outside_first_section_aborts(case_study):
    with pytest.raises(RuntimeInvariantError) as exc:
        _run(case_study, "phi1", 0, steps=20, x0=np.array([-2.0, -4.0]))
    assert exc.value.log is not None


def test_steps_must_be_positive(case_study):
    with pytest.raises(ValueError):
        _run(case_study, "phi1", 0, steps=0)
