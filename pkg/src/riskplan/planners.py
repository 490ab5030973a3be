"""Risk-bounded sampling planners: the RRT-SOS baseline and bidirectional NR-RRT.

Both planners see the world only through a :class:`RiskAssessor`, so every
vertex and edge they keep has been certified against the risk constraints.
"""

from __future__ import annotations

import enum
import json
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Protocol, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

from .risk_map import Environment, RiskConstraintSet, build_constraints
from .verifier import RiskAssessor


class Status(str, enum.Enum):
    SOLVED = "Solved"
    SOLVED_BY_FALLBACK = "SolvedByFallback"
    INFEASIBLE = "Infeasible"
    TIMEOUT = "Timeout"


@dataclass(frozen=True)
class Path:
    waypoints: tuple[tuple[float, float], ...]
    total_length: float

    @classmethod
    def from_points(cls, pts) -> "Path":
        wps = tuple((float(p[0]), float(p[1])) for p in pts)
        if not wps:
            raise ValueError("a path needs at least one waypoint")
        return cls(wps, polyline_length(wps))

    def __len__(self):
        return len(self.waypoints)


def polyline_length(pts) -> float:
    return float(sum(math.dist(a, b) for a, b in zip(pts, pts[1:])))


def path_to_json(path: Optional[Path], delta: float, status: Status | str, seed: int) -> str:
    doc = {
        "waypoints": [list(p) for p in path.waypoints] if path else [],
        "length": path.total_length if path else 0.0,
        "delta": delta,
        "status": Status(status).value,
        "seed": seed,
    }
    return json.dumps(doc, indent=2) + "\n"


@dataclass(frozen=True)
class PlannerConfig:
    """Planner knobs. ``None`` geometric fields are filled from the workspace diagonal."""

    N: int = 100
    N_j: int = 5
    step: Optional[float] = None
    r: Optional[float] = None
    prm_nodes: int = 200
    prm_radius: Optional[float] = None
    line_bias_prob: float = 0.5
    line_bias_sigma: Optional[float] = None
    time_budget_s: float = 30.0
    seed: int = 0
    resample_cap: int = 32

    def resolved(self, env: Environment) -> "PlannerConfig":
        d = env.diagonal
        cfg = replace(
            self,
            step=self.step if self.step is not None else 0.1 * d,
            r=self.r if self.r is not None else 0.05 * d,
            prm_radius=self.prm_radius if self.prm_radius is not None else 0.25 * d,
            line_bias_sigma=self.line_bias_sigma if self.line_bias_sigma is not None else 0.1 * d,
        )
        for name in ("N", "N_j", "step", "r", "prm_nodes", "prm_radius", "line_bias_sigma", "time_budget_s"):
            if not getattr(cfg, name) > 0:
                raise ValueError(f"planner setting {name} must be positive")
        if not 0.0 <= cfg.line_bias_prob <= 1.0:
            raise ValueError("line_bias_prob must lie in [0, 1]")
        return cfg


@dataclass
class PlanReport:
    path: Optional[Path]
    status: Status
    iterations: int = 0
    ra_calls: int = 0
    wall_time: float = 0.0
    fallback_segments: int = 0

    @property
    def solved(self) -> bool:
        return self.status in (Status.SOLVED, Status.SOLVED_BY_FALLBACK)


class SearchTree:
    def __init__(self, root):
        self._pts = np.zeros((64, 2))
        self._pts[0] = root
        self.parent: list[Optional[int]] = [None]
        self.top = 0  # most recently inserted vertex

    def __len__(self):
        return len(self.parent)

    @property
    def vertices(self) -> np.ndarray:
        return self._pts[: len(self.parent)]

    def add(self, pt, parent: int) -> int:
        n = len(self.parent)
        if not 0 <= parent < n:
            raise IndexError(f"parent {parent} not in tree")
        if n == len(self._pts):
            self._pts = np.concatenate([self._pts, np.zeros_like(self._pts)])
        self._pts[n] = pt
        self.parent.append(parent)
        self.top = n
        return n

    def nearest(self, x) -> int:
        d2 = ((self.vertices - np.asarray(x, float)) ** 2).sum(axis=1)
        return int(np.argmin(d2))  # first minimum, so ties go to the lowest index

    def branch(self, idx: int) -> list[np.ndarray]:
        """Vertices from the root down to ``idx``."""
        out = []
        node: Optional[int] = idx
        while node is not None:
            out.append(self._pts[node].copy())
            node = self.parent[node]
        return out[::-1]


def nearest(tree: SearchTree, x) -> int:
    return tree.nearest(x)


def steer(frm, toward, step: float) -> np.ndarray:
    frm = np.asarray(frm, float)
    toward = np.asarray(toward, float)
    d = toward - frm
    n = float(np.hypot(d[0], d[1]))
    if n <= step:
        return toward.copy()
    return frm + d * (step / n)


def _clip(env: Environment, pt) -> np.ndarray:
    xmin, xmax, ymin, ymax = env.bounds
    return np.array([min(max(pt[0], xmin), xmax), min(max(pt[1], ymin), ymax)])


def _same(a, b) -> bool:
    return float(a[0]) == float(b[0]) and float(a[1]) == float(b[1])


# -- RRT-SOS ----------------------------------------------------------------


def rrt_sos_plan(
    env: Environment,
    delta: float,
    start,
    goal,
    cfg: PlannerConfig,
    rng: Optional[np.random.Generator] = None,
    *,
    cs: Optional[RiskConstraintSet] = None,
    ra: Optional[RiskAssessor] = None,
) -> PlanReport:
    """Single risk-verified tree with line-biased sampling, then PRM + Dijkstra refinement."""
    t0 = time.perf_counter()
    cfg = cfg.resolved(env)
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    if ra is None:
        ra = RiskAssessor(cs if cs is not None else build_constraints(env, delta))
    calls0 = ra.calls
    start = np.asarray(start, float)
    goal = np.asarray(goal, float)

    def report(path, status, it):
        return PlanReport(path, status, it, ra.calls - calls0, time.perf_counter() - t0)

    if not (ra.point(start) and ra.point(goal)):
        return report(None, Status.INFEASIBLE, 0)
    deadline = t0 + cfg.time_budget_s
    seg = goal - start
    tree = SearchTree(start)
    goal_idx = None
    if math.dist(start, goal) < cfg.r and ra.edge(start, goal):
        goal_idx = tree.add(goal, 0)
    it = 0
    while goal_idx is None:
        if time.perf_counter() > deadline:
            return report(None, Status.TIMEOUT, it)
        it += 1
        if rng.random() < cfg.line_bias_prob:
            sample = start + rng.random() * seg + rng.normal(0.0, cfg.line_bias_sigma, 2)
            sample = _clip(env, sample)
        else:
            sample = env.sample_uniform(rng)
        k = tree.nearest(sample)
        near = tree.vertices[k]
        new = steer(near, sample, cfg.step)
        if _same(new, near) or not ra.edge(near, new):
            continue
        idx = tree.add(new, k)
        if math.dist(new, goal) < cfg.r and ra.edge(new, goal):
            goal_idx = tree.add(goal, idx)

    branch = tree.branch(goal_idx)
    refined = _prm_refine(env, branch, cfg, rng, ra, deadline)
    return report(Path.from_points(refined), Status.SOLVED, it)


def _prm_refine(env, branch, cfg, rng, ra, deadline) -> list:
    """Shortest path over a roadmap of the tree branch plus fresh safe samples."""
    nodes = [np.asarray(p) for p in branch]
    attempts = 0
    extra = []
    while len(extra) < cfg.prm_nodes and attempts < 50 * cfg.prm_nodes:
        if time.perf_counter() > deadline:
            return branch
        attempts += 1
        s = env.sample_uniform(rng)
        if ra.point(s):
            extra.append(s)
    pts = np.array(nodes + extra)
    n_branch = len(nodes)
    goal_node = n_branch - 1
    rows, cols, wts = [], [], []
    for i in range(n_branch - 1):
        # tree edges were certified when inserted
        rows.append(i)
        cols.append(i + 1)
        wts.append(math.dist(pts[i], pts[i + 1]))
    pairs = sorted(cKDTree(pts).query_pairs(cfg.prm_radius))
    for i, j in pairs:
        if j == i + 1 and j < n_branch:
            continue
        if time.perf_counter() > deadline:
            return branch
        if ra.edge(pts[i], pts[j]):
            rows.append(i)
            cols.append(j)
            wts.append(math.dist(pts[i], pts[j]))
    graph = csr_matrix((wts, (rows, cols)), shape=(len(pts), len(pts)))
    _, pred = dijkstra(graph, directed=False, indices=0, return_predecessors=True)
    if goal_node != 0 and pred[goal_node] < 0:
        return branch
    out = [goal_node]
    while out[-1] != 0:
        out.append(int(pred[out[-1]]))
    return [pts[i] for i in reversed(out)]


# -- shortcutting -------------------------------------------------------------


def lsc(path: Path, cs: RiskConstraintSet, *, ra: Optional[RiskAssessor] = None) -> Path:
    """Lazy states contraction: greedy forward shortcutting over certified edges.

    From each anchor the farthest later waypoint with a certified direct edge
    becomes the next anchor. If no later waypoint connects, the immediate
    successor is kept so uncertified pairs stay adjacent for later repair.
    """
    ra = RiskAssessor(cs) if ra is None else ra
    pts = path.waypoints
    if len(pts) <= 2:
        return path
    out = [pts[0]]
    i = 0
    while i < len(pts) - 1:
        nxt = i + 1
        for j in range(len(pts) - 1, i + 1, -1):
            if ra.edge(pts[i], pts[j]):
                nxt = j
                break
        out.append(pts[nxt])
        i = nxt
    return Path.from_points(out)


# -- NR-RRT ------------------------------------------------------------------


class Sampler(Protocol):
    def propose(self, x_t, x_goal, rng: np.random.Generator) -> np.ndarray: ...


@dataclass
class _Search:
    env: Environment
    cfg: PlannerConfig
    ra: RiskAssessor
    sampler: Sampler
    rng: np.random.Generator
    iterations: int = 0

    def draw(self, x_t, x_goal) -> np.ndarray:
        for _ in range(self.cfg.resample_cap):
            s = self.sampler.propose(x_t, x_goal, self.rng)
            if self.ra.point(s):
                return s
        return self.env.sample_uniform(self.rng)

    def bidirectional(self, a, b) -> tuple[list, bool]:
        """Grow trees from ``a`` and ``b`` alternately until their newest vertices connect.

        Returns the a -> b waypoint list and whether the trees connected. On
        failure the list is the branch to the newest vertex of each tree, with
        the two newest vertices adjacent and not certified.
        """
        trees = [SearchTree(a), SearchTree(b)]
        fwd = 0
        for _ in range(self.cfg.N):
            self.iterations += 1
            tf, tb = trees[fwd], trees[1 - fwd]
            sample = self.draw(tf.vertices[tf.top], tb.vertices[tb.top])
            k = tf.nearest(sample)
            near = tf.vertices[k]
            new = steer(near, sample, self.cfg.step)
            if not _same(new, near) and self.ra.edge(near, new):
                tf.add(new, k)
            if self.ra.edge(tf.vertices[tf.top], tb.vertices[tb.top]):
                return self._joined(trees), True
            fwd = 1 - fwd
        return self._joined(trees), False

    @staticmethod
    def _joined(trees) -> list:
        ta, tb = trees
        return ta.branch(ta.top) + tb.branch(tb.top)[::-1]


def _failing_pairs(pts, ra: RiskAssessor) -> list[int]:
    return [i for i in range(len(pts) - 1) if not ra.edge(pts[i], pts[i + 1])]


def replan(
    coarse: Path,
    model,
    env: Environment,
    delta: float,
    cfg: PlannerConfig,
    rng: Optional[np.random.Generator] = None,
    *,
    sampler: Optional[Sampler] = None,
    ra: Optional[RiskAssessor] = None,
    search: Optional[_Search] = None,
) -> Path:
    """Bridge every uncertified consecutive pair of ``coarse`` with a bidirectional neural sub-plan.

    Pairs that still cannot be bridged stay adjacent in the output.
    """
    if search is None:
        cfg = cfg.resolved(env)
        rng = np.random.default_rng(cfg.seed) if rng is None else rng
        ra = ra or RiskAssessor(build_constraints(env, delta))
        sampler = sampler or _default_sampler(model, env, delta)
        search = _Search(env, cfg, ra, sampler, rng)
    pts = [np.asarray(p, float) for p in coarse.waypoints]
    if len(pts) < 2:
        raise ValueError("replanning needs at least two waypoints")
    out = [pts[0]]
    for a, b in zip(pts, pts[1:]):
        if not search.ra.edge(a, b):
            sub, ok = search.bidirectional(a, b)
            if ok:
                out.extend(sub[1:-1])
        out.append(b)
    return Path.from_points(out)


def _default_sampler(model, env, delta) -> Sampler:
    from .neural import NeuralSampler

    return NeuralSampler.for_environment(model, env, delta)


def nr_rrt_plan(
    env: Environment,
    delta: float,
    start,
    goal,
    model,
    cfg: PlannerConfig,
    rng: Optional[np.random.Generator] = None,
    *,
    sampler: Optional[Sampler] = None,
    cs: Optional[RiskConstraintSet] = None,
) -> PlanReport:
    """Bidirectional neural planning with shortcutting, neural replanning and an RRT-SOS standby."""
    t0 = time.perf_counter()
    cfg = cfg.resolved(env)
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    cs = cs if cs is not None else build_constraints(env, delta)
    ra = RiskAssessor(cs)
    start = np.asarray(start, float)
    goal = np.asarray(goal, float)

    def report(path, status, fallback=0):
        return PlanReport(path, status, search.iterations if search else 0, ra.calls,
                          time.perf_counter() - t0, fallback)

    search = None
    if not (ra.point(start) and ra.point(goal)):
        return report(None, Status.INFEASIBLE)
    if math.dist(start, goal) < cfg.r:
        return report(Path.from_points([start]), Status.SOLVED)

    # the map is rasterised and encoded once per query
    sampler = sampler or _default_sampler(model, env, delta)
    search = _Search(env, cfg, ra, sampler, rng)
    pts, _ = search.bidirectional(start, goal)
    path = lsc(Path.from_points(pts), cs, ra=ra)
    if ra.path(path):
        return report(path, Status.SOLVED)
    for _ in range(cfg.N_j):
        path = replan(path, None, env, delta, cfg, search=search)
        path = lsc(path, cs, ra=ra)
        if ra.path(path):
            return report(path, Status.SOLVED)

    # standby planner on whatever pairs neural replanning could not bridge
    pts = [np.asarray(p, float) for p in path.waypoints]
    stitched = [pts[0]]
    used = 0
    for a, b in zip(pts, pts[1:]):
        if ra.edge(a, b):
            stitched.append(b)
            continue
        remaining = cfg.time_budget_s - (time.perf_counter() - t0)
        if remaining <= 0.0:
            return report(None, Status.INFEASIBLE, used)
        local = rrt_sos_plan(env, delta, a, b, replace(cfg, time_budget_s=remaining), rng, ra=ra)
        if not local.solved:
            # every stage is spent, including the standby budget
            return report(None, Status.INFEASIBLE, used)
        used += 1
        stitched.extend(np.asarray(p) for p in local.path.waypoints[1:])
    path = lsc(Path.from_points(stitched), cs, ra=ra)
    if ra.path(path):
        return report(path, Status.SOLVED_BY_FALLBACK, used)
    return report(None, Status.INFEASIBLE, used)
