"""Risk assessor: certify vertices and straight edges against the risk constraints.

An edge u -> v is accepted when every constraint polynomial, restricted to
x(t) = u + t (v - u), is nonnegative on [0, 1]. The restriction is exact in
coefficients, and nonnegativity is decided by Bernstein bounds first and a
Sturm root count when the bound is inconclusive, so no time discretisation of
the edge is involved.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .poly_core import DEFAULT_EPS, LinePoly, bernstein_matrix, nonneg_on_unit_interval, restrict_matrix
from .risk_map import Environment, RiskConstraintSet


@dataclass(frozen=True)
class EdgeCertificate:
    verdict: bool
    margins: dict = field(default_factory=dict)  # (obstacle, k) -> min endpoint value
    rejected_constraint: Optional[tuple[str, int]] = None

    def __bool__(self):
        return self.verdict


def verify_point(cs: RiskConstraintSet, pt) -> bool:
    if not cs.in_bounds(pt):
        return False
    return bool((cs.point_values(pt) >= 0.0).all())


def restricted_constraints(cs: RiskConstraintSet, u, v) -> np.ndarray:
    """Coefficients in t of every constraint along the segment, shape (K, width)."""
    return restrict_matrix(cs.bank, u, v)


def verify_edge(cs: RiskConstraintSet, u, v, eps: float = DEFAULT_EPS) -> EdgeCertificate:
    u = (float(u[0]), float(u[1]))
    v = (float(v[0]), float(v[1]))
    if v < u:
        # fixed orientation makes the verdict independent of edge direction
        u, v = v, u
    if not (verify_point(cs, u) and verify_point(cs, v)):
        rejected = _first_violated(cs, u) or _first_violated(cs, v)
        return EdgeCertificate(False, {}, rejected)
    if not cs.polys:
        return EdgeCertificate(True, {}, None)
    coeffs = restricted_constraints(cs, u, v)
    bern = coeffs @ bernstein_matrix(coeffs.shape[1] - 1).T
    margins = {lab: float(min(b[0], b[-1])) for lab, b in zip(cs.labels, bern)}
    for k, lab in enumerate(cs.labels):
        if bern[k].min() > 0.0:
            continue
        if not nonneg_on_unit_interval(LinePoly(coeffs[k]), eps):
            return EdgeCertificate(False, margins, lab)
    return EdgeCertificate(True, margins, None)


def _first_violated(cs: RiskConstraintSet, pt):
    if not cs.in_bounds(pt):
        return ("<bounds>", 0)
    vals = cs.point_values(pt)
    for lab, val in zip(cs.labels, vals):
        if val < 0.0:
            return lab
    return None


def verify_path(cs: RiskConstraintSet, path, eps: float = DEFAULT_EPS) -> bool:
    pts = _waypoints(path)
    if len(pts) == 0:
        return False
    if len(pts) == 1:
        return verify_point(cs, pts[0])
    return all(verify_edge(cs, a, b, eps).verdict for a, b in zip(pts, pts[1:]))


def _waypoints(path) -> Sequence:
    return path.waypoints if hasattr(path, "waypoints") else path


def mc_edge_risk(
    env: Environment,
    u,
    v,
    n_param: int,
    n_pts: int = 64,
    rng: np.random.Generator | None = None,
    chunk: int = 20_000,
) -> float:
    """Fraction of joint parameter draws under which some point of the segment is hit.

    Uses ``n_pts`` evenly spaced points on [u, v]; a draw counts as a collision
    if any of those points lies in any realised obstacle.
    """
    if n_param < 1 or n_pts < 1:
        raise ValueError("need at least one draw and one point")
    return _mc_union_risk(env, _segment_points(u, v, n_pts), n_param, rng, chunk)


def mc_path_risk(
    env: Environment,
    path,
    n_param: int,
    n_pts: int = 64,
    rng: np.random.Generator | None = None,
    chunk: int = 20_000,
) -> float:
    """Whole-path collision probability: one draw hits if any point of any edge is hit."""
    pts = [np.asarray(p, float) for p in _waypoints(path)]
    if not pts:
        raise ValueError("empty path")
    if n_param < 1 or n_pts < 1:
        raise ValueError("need at least one draw and one point")
    if len(pts) == 1:
        samples = pts[0][None, :]
    else:
        samples = np.concatenate([_segment_points(a, b, n_pts) for a, b in zip(pts, pts[1:])])
    return _mc_union_risk(env, samples, n_param, rng, chunk)


def _segment_points(u, v, n_pts: int) -> np.ndarray:
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    s = np.linspace(0.0, 1.0, n_pts) if n_pts > 1 else np.zeros(1)
    return u[None, :] + s[:, None] * (v - u)[None, :]


def _mc_union_risk(env: Environment, pts: np.ndarray, n_param: int, rng, chunk: int) -> float:
    rng = np.random.default_rng() if rng is None else rng
    hits = 0
    for start in range(0, n_param, chunk):
        m = min(chunk, n_param - start)
        hit = np.zeros(m, bool)
        for obs in env.obstacles:
            w = obs.dist.sample(rng, m)
            a = np.stack([c.eval(pts[:, 0], pts[:, 1]) for c in obs.w_coeffs], axis=1)
            acc = np.zeros((len(pts), m))
            for k in range(a.shape[1] - 1, -1, -1):
                acc = acc * w[None, :] + a[:, k : k + 1]
            hit |= (acc >= 0.0).any(axis=0)
        hits += int(hit.sum())
    return hits / n_param


class RiskAssessor:
    """Counts every point and edge query made against one constraint set."""

    def __init__(self, cs: RiskConstraintSet, eps: float = DEFAULT_EPS):
        self.cs = cs
        self.eps = eps
        self.calls = 0

    def point(self, pt) -> bool:
        self.calls += 1
        return verify_point(self.cs, pt)

    def edge(self, u, v) -> bool:
        self.calls += 1
        return verify_edge(self.cs, u, v, self.eps).verdict

    def path(self, path) -> bool:
        pts = _waypoints(path)
        if len(pts) == 1:
            return self.point(pts[0])
        return len(pts) > 0 and all(self.edge(a, b) for a, b in zip(pts, pts[1:]))
