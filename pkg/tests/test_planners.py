import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskplan import planners
from riskplan.environments import circle_env, walled_goal_env
from riskplan.pipeline import sample_query
from riskplan.planners import (
    Path,
    PlannerConfig,
    SearchTree,
    Status,
    _Search,
    lsc,
    nearest,
    nr_rrt_plan,
    path_to_json,
    polyline_length,
    replan,
    rrt_sos_plan,
    steer,
)
from riskplan.risk_map import Environment, build_constraints
from riskplan.verifier import RiskAssessor, verify_edge, verify_path, verify_point

FREE = Environment((-2.0, 2.0, -2.0, 2.0))


class ConstantSampler:
    """Adversarial stub: always proposes the same point."""

    def __init__(self, pt):
        self.pt = np.asarray(pt, float)

    def propose(self, x_t, x_goal, rng):
        return self.pt.copy()


class UniformSampler:
    def __init__(self, env):
        self.env = env

    def propose(self, x_t, x_goal, rng):
        return self.env.sample_uniform(rng)


@pytest.fixture(scope="module")
def circle():
    env = circle_env()
    return env, build_constraints(env, 0.1)


def _queries(env, cs, n, seed):
    rng = np.random.default_rng(seed)
    return [sample_query(env, 0.1, rng, cs) for _ in range(n)]


# -- primitives ---------------------------------------------------------------------


def test_nearest_examples():
    t = SearchTree((0.0, 0.0))
    assert nearest(t, (5.0, 5.0)) == 0
    t.add((1.0, 0.0), 0)
    assert nearest(t, (0.9, 0.0)) == 1
    t.add((0.0, 1.0), 0)
    assert nearest(t, (0.5, 0.5)) == 0  # all three equidistant, lowest index wins
    t2 = SearchTree((1.0, 0.0))
    t2.add((-1.0, 0.0), 0)
    assert nearest(t2, (0.0, 0.0)) == 0  # exact tie goes to the lower index


def test_steer_examples():
    assert np.array_equal(steer((0, 0), (3, 0), 1.0), [1.0, 0.0])
    assert np.array_equal(steer((0, 0), (0.3, 0.4), 1.0), [0.3, 0.4])
    assert np.array_equal(steer((0.2, 0.2), (0.2, 0.2), 1.0), [0.2, 0.2])
    out = steer((1, 1), (4, 5), 2.0)
    assert math.dist(out, (1, 1)) == pytest.approx(2.0, abs=1e-12)


def test_tree_rejects_unknown_parent():
    t = SearchTree((0, 0))
    with pytest.raises(IndexError):
        t.add((1, 1), 3)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.floats(-5, 5), st.floats(-5, 5)), max_size=200))
def test_tree_well_formed(ops):
    t = SearchTree((0.0, 0.0))
    for frac, px, py in ops:
        parent = int(frac * (len(t) - 1))
        idx = t.add((px, py), parent)
        assert t.top == idx
    # exactly one root, and every branch walks back to it without revisiting a vertex
    assert [p is None for p in t.parent].count(True) == 1
    for i in range(len(t)):
        seen, node = set(), i
        while node is not None:
            assert node not in seen
            seen.add(node)
            node = t.parent[node]
        assert np.array_equal(t.branch(i)[0], [0.0, 0.0])
        assert np.array_equal(t.branch(i)[-1], t.vertices[i])


def test_config_defaults_and_validation():
    cfg = PlannerConfig().resolved(FREE)
    d = math.hypot(4, 4)
    assert cfg.step == pytest.approx(0.1 * d) and cfg.r == pytest.approx(0.05 * d)
    assert cfg.prm_radius == pytest.approx(0.25 * d) and cfg.line_bias_sigma == pytest.approx(0.1 * d)
    assert (cfg.N, cfg.N_j, cfg.prm_nodes, cfg.resample_cap) == (100, 5, 200, 32)
    for bad in (dict(N=0), dict(step=-1.0), dict(line_bias_prob=1.5), dict(time_budget_s=0.0)):
        with pytest.raises(ValueError):
            PlannerConfig(**bad).resolved(FREE)


def test_path_length_recomputed():
    p = Path.from_points([(0, 0), (3, 4), (3, 5)])
    assert p.total_length == pytest.approx(polyline_length(p.waypoints), abs=1e-9)
    assert p.total_length == pytest.approx(6.0, abs=1e-12)
    with pytest.raises(ValueError):
        Path.from_points([])


def test_path_json_field_order():
    doc = path_to_json(Path.from_points([(0, 0), (1, 0)]), 0.1, Status.SOLVED, 7)
    assert list(json.loads(doc)) == ["waypoints", "length", "delta", "status", "seed"]
    assert json.loads(doc)["status"] == "Solved"
    empty = json.loads(path_to_json(None, 0.2, "Infeasible", 1))
    assert empty["waypoints"] == [] and empty["status"] == "Infeasible"


# -- lazy states contraction -------------------------------------------------------------


def test_lsc_examples():
    cs = build_constraints(FREE, 0.1)
    out = lsc(Path.from_points([(0, 0), (0.5, 0.1), (1, 0)]), cs)
    assert out.waypoints == ((0.0, 0.0), (1.0, 0.0))
    two = Path.from_points([(0, 0), (1, 1)])
    assert lsc(two, cs) == two
    out = lsc(Path.from_points([(0, 0), (0.5, 0.5), (1, 1)]), cs)
    assert out.waypoints == ((0.0, 0.0), (1.0, 1.0))


def test_lsc_keeps_needed_detour(circle):
    env, cs = circle
    detour = Path.from_points([(-0.9, 0.0), (-0.6, 0.7), (0.0, 0.9), (0.6, 0.7), (0.9, 0.0)])
    assert verify_path(cs, detour)
    out = lsc(detour, cs)
    assert verify_path(cs, out)
    assert 2 < len(out) <= len(detour)
    assert out.waypoints[0] == detour.waypoints[0] and out.waypoints[-1] == detour.waypoints[-1]
    assert set(out.waypoints) <= set(detour.waypoints)


def test_lsc_contraction_property(circle):
    env, cs = circle
    rng = np.random.default_rng(3)
    for _ in range(30):
        pts = [env.sample_uniform(rng) for _ in range(int(rng.integers(2, 8)))]
        path = Path.from_points(pts)
        out = lsc(path, cs)
        assert len(out) <= len(path)
        assert out.total_length <= path.total_length + 1e-12
        it = iter(path.waypoints)
        assert all(any(w == v for v in it) for w in out.waypoints)  # ordered subsequence
        if verify_path(cs, path):
            assert verify_path(cs, out)


# -- RRT-SOS ---------------------------------------------------------------------------


def test_rrt_sos_obstacle_free_near_straight():
    rep = rrt_sos_plan(FREE, 0.1, (-2, -2), (2, 2), PlannerConfig(r=0.1, seed=0))
    assert rep.status is Status.SOLVED
    assert rep.path.total_length <= 1.05 * math.dist((-2, -2), (2, 2))
    assert rep.ra_calls > 0 and rep.iterations > 0


def test_rrt_sos_unsafe_endpoint(circle):
    env, _ = circle
    assert rrt_sos_plan(env, 0.1, (0, 0), (0.9, 0.9), PlannerConfig()).status is Status.INFEASIBLE
    assert rrt_sos_plan(env, 0.1, (0.9, 0.9), (0.05, 0), PlannerConfig()).status is Status.INFEASIBLE


def test_rrt_sos_timeout():
    env = walled_goal_env()
    rep = rrt_sos_plan(env, 0.1, (0.9, 0.9), (0.0, 0.0), PlannerConfig(time_budget_s=0.5, prm_nodes=10))
    assert rep.status is Status.TIMEOUT and rep.path is None


def test_rrt_sos_contracts_and_determinism(circle):
    env, cs = circle
    cfg = PlannerConfig().resolved(env)
    for i, (s, g) in enumerate(_queries(env, cs, 5, 1)):
        rep = rrt_sos_plan(env, 0.1, s, g, PlannerConfig(seed=i), cs=cs)
        assert rep.solved
        assert np.array_equal(rep.path.waypoints[0], s)
        assert math.dist(rep.path.waypoints[-1], g) < cfg.r
        assert verify_path(cs, rep.path)
        again = rrt_sos_plan(env, 0.1, s, g, PlannerConfig(seed=i), cs=cs)
        assert again.path == rep.path


class RecordingTree(SearchTree):
    log: list = []

    def add(self, pt, parent):
        RecordingTree.log.append((self.vertices[parent].copy(), np.array(pt, float)))
        return super().add(pt, parent)


def test_every_tree_edge_verified(circle, monkeypatch):
    env, cs = circle
    RecordingTree.log = []
    monkeypatch.setattr(planners, "SearchTree", RecordingTree)
    for i, (s, g) in enumerate(_queries(env, cs, 3, 2)):
        rrt_sos_plan(env, 0.1, s, g, PlannerConfig(seed=i), cs=cs)
        nr_rrt_plan(env, 0.1, s, g, None, PlannerConfig(seed=i), sampler=UniformSampler(env), cs=cs)
    assert len(RecordingTree.log) > 20
    for a, b in RecordingTree.log:
        assert verify_point(cs, b) and verify_edge(cs, a, b).verdict


# -- replanning ------------------------------------------------------------------------


def _search(env, cs, sampler, **kw):
    cfg = PlannerConfig(**kw).resolved(env)
    return _Search(env, cfg, RiskAssessor(cs), sampler, np.random.default_rng(0))


def test_replan_verified_input_unchanged(circle):
    env, cs = circle
    p = Path.from_points([(-0.9, 0.8), (0.9, 0.8)])
    s = _search(env, cs, UniformSampler(env))
    assert replan(p, None, env, 0.1, s.cfg, search=s) == p


def test_replan_splices_detour(circle):
    env, cs = circle
    # one long steer reaches the proposal, whose edge to the far endpoint then certifies
    s = _search(env, cs, ConstantSampler((0.0, 0.9)), step=5.0)
    out = replan(Path.from_points([(-0.9, 0.0), (0.9, 0.0)]), None, env, 0.1, s.cfg, search=s)
    assert out.waypoints == ((-0.9, 0.0), (0.0, 0.9), (0.9, 0.0))


def test_replan_leaves_unbridgeable_pair():
    env = walled_goal_env()
    cs = build_constraints(env, 0.1)
    s = _search(env, cs, UniformSampler(env), N=20)
    coarse = Path.from_points([(0.9, 0.9), (0.0, 0.0)])
    assert replan(coarse, None, env, 0.1, s.cfg, search=s) == coarse


def test_replan_needs_two_waypoints(circle):
    env, cs = circle
    s = _search(env, cs, UniformSampler(env))
    with pytest.raises(ValueError):
        replan(Path.from_points([(0.9, 0.9)]), None, env, 0.1, s.cfg, search=s)


# -- NR-RRT ---------------------------------------------------------------------------


def test_nr_rrt_degenerate_query(circle):
    env, cs = circle
    rep = nr_rrt_plan(env, 0.1, (0.9, 0.9), (0.91, 0.9), None, PlannerConfig(), sampler=UniformSampler(env))
    assert rep.status is Status.SOLVED and rep.path.waypoints == ((0.9, 0.9),)


def test_nr_rrt_unsafe_endpoint(circle):
    env, _ = circle
    rep = nr_rrt_plan(env, 0.1, (0.0, 0.0), (0.9, 0.9), None, PlannerConfig(), sampler=UniformSampler(env))
    assert rep.status is Status.INFEASIBLE and rep.path is None


def test_nr_rrt_contracts_and_determinism(circle):
    env, cs = circle
    r = PlannerConfig().resolved(env).r
    for i, (s, g) in enumerate(_queries(env, cs, 5, 4)):
        rep = nr_rrt_plan(env, 0.1, s, g, None, PlannerConfig(seed=i), sampler=UniformSampler(env), cs=cs)
        assert rep.solved
        assert np.array_equal(rep.path.waypoints[0], s)
        assert math.dist(rep.path.waypoints[-1], g) < r
        assert verify_path(cs, rep.path)
        again = nr_rrt_plan(env, 0.1, s, g, None, PlannerConfig(seed=i), sampler=UniformSampler(env), cs=cs)
        assert again.path == rep.path and again.status is rep.status


def test_nr_rrt_adversarial_sampler_falls_back(circle):
    env, cs = circle
    seen_fallback = False
    for i, (s, g) in enumerate(_queries(env, cs, 4, 5)):
        rep = nr_rrt_plan(env, 0.1, s, g, None, PlannerConfig(N=10, seed=i), sampler=ConstantSampler(s), cs=cs)
        assert rep.solved and verify_path(cs, rep.path)
        seen_fallback |= rep.status is Status.SOLVED_BY_FALLBACK
        if rep.status is Status.SOLVED_BY_FALLBACK:
            assert rep.fallback_segments >= 1
    assert seen_fallback


def test_nr_rrt_unsolvable_is_infeasible():
    env = walled_goal_env()
    rep = nr_rrt_plan(env, 0.1, (0.9, 0.9), (0.0, 0.0), None,
                      PlannerConfig(N=10, N_j=1, time_budget_s=2.0, prm_nodes=10),
                      sampler=ConstantSampler((0.9, 0.9)))
    assert rep.status is Status.INFEASIBLE and rep.path is None
