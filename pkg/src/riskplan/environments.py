"""Ready-made uncertain environments.

``ellipse_env``, ``circle_env`` and ``heart_env`` carry the obstacle polynomials
and parameter laws of the single-obstacle experiments. ``cluttered_env`` is a
parametric reconstruction of the seven-obstacle scenes (three circles, two
ellipses, two calabash shapes) on [-5, 5]^2; the shapes are generated here, not
taken from published data.
"""

from __future__ import annotations

import numpy as np

from .poly_core import TriPoly
from .risk_map import Environment
from .uncertainty import Beta, Gaussian, Uniform, UncertainObstacle

X = TriPoly.var("x")
Y = TriPoly.var("y")
W = TriPoly.var("w")

HEART_TERMS = [
    # (ex, ey, c) of the deterministic part; the parameter enters as -0.7 w
    (5, 0, -0.35), (4, 1, -1.0), (4, 0, -0.5), (3, 2, 0.2), (3, 1, -0.5),
    (3, 0, 0.31), (2, 3, -0.5), (2, 2, 0.2), (2, 1, 1.7), (2, 0, 0.26),
    (1, 4, 0.7), (1, 3, -0.1), (1, 2, -1.5), (1, 1, -0.1), (1, 0, 0.1),
    (0, 5, 0.02), (0, 4, -0.1), (0, 3, -0.04), (0, 2, -0.1), (0, 1, 0.28),
    (0, 0, 0.89),
]


def ellipse_obstacle(name: str = "ellipse") -> UncertainObstacle:
    return UncertainObstacle(W**2 - 0.5 * X**2 - Y**2, Gaussian(0.0, 1.0), name)


def ellipse_env() -> Environment:
    return Environment((-2.0, 2.0, -2.0, 2.0), (ellipse_obstacle(),))


def circle_env() -> Environment:
    obs = UncertainObstacle(W**2 - X**2 - Y**2, Uniform(0.3, 0.4), "circle")
    return Environment((-1.0, 1.0, -1.0, 1.0), (obs,))


def heart_poly() -> TriPoly:
    return TriPoly([((ex, ey, 0), c) for ex, ey, c in HEART_TERMS] + [((0, 0, 1), -0.7)])


def heart_env() -> Environment:
    obs = UncertainObstacle(heart_poly(), Beta(9.0, 0.5), "heart")
    return Environment((-2.0, 2.0, -2.0, 2.0), (obs,))


def _shifted(cx: float, cy: float, theta: float = 0.0):
    c, s = np.cos(theta), np.sin(theta)
    dx, dy = X - cx, Y - cy
    return c * dx + s * dy, -s * dx + c * dy


def circle_obstacle(name, cx, cy, radius, spread) -> UncertainObstacle:
    """Disc with uniformly uncertain radius in [radius - spread, radius + spread]."""
    u, v = _shifted(cx, cy)
    return UncertainObstacle(W**2 - u**2 - v**2, Uniform(radius - spread, radius + spread), name)


def shifted_ellipse_obstacle(name, cx, cy, a, b, theta, sigma) -> UncertainObstacle:
    """Ellipse whose centre slides along its major axis by a N(0, sigma^2) offset."""
    u, v = _shifted(cx, cy, theta)
    poly = 1.0 - (u - W) ** 2 * (1.0 / a**2) - v**2 * (1.0 / b**2)
    return UncertainObstacle(poly, Gaussian(0.0, sigma**2), name)


def calabash_obstacle(name, cx, cy, a, theta, lo, hi) -> UncertainObstacle:
    """Peanut-shaped Cassini oval with foci at +-a along the rotated axis.

    The obstacle is {w - ((u^2 + v^2)^2 - 2 a^2 (u^2 - v^2)) >= 0} with w
    uniform in [lo, hi]. For 0 < w < 3 a^4 the oval is connected with a waist.
    """
    u, v = _shifted(cx, cy, theta)
    r2 = u**2 + v**2
    cassini = r2 * r2 - 2.0 * a**2 * (u**2 - v**2)
    return UncertainObstacle(W - cassini, Uniform(lo, hi), name)


def cluttered_env(seed: int, max_tries: int = 10_000) -> Environment:
    """Seven uncertain obstacles placed at random without overlap on [-5, 5]^2."""
    rng = np.random.default_rng(seed)
    kinds = ["circle"] * 3 + ["ellipse"] * 2 + ["calabash"] * 2
    placed: list[tuple[float, float, float]] = []
    obstacles = []
    for idx, kind in enumerate(kinds):
        for _ in range(max_tries):
            if kind == "circle":
                extent = rng.uniform(0.5, 0.8)
            elif kind == "ellipse":
                extent = rng.uniform(0.9, 1.2)
            else:
                extent = rng.uniform(0.7, 0.9)
            cx, cy = rng.uniform(-3.8, 3.8, 2)
            # keep a clear corridor between neighbours
            if all(np.hypot(cx - px, cy - py) > extent + pr + 1.0 for px, py, pr in placed):
                break
        else:
            raise RuntimeError("could not place obstacles")
        placed.append((cx, cy, extent))
        theta = rng.uniform(0.0, np.pi)
        name = f"{kind}{idx}"
        if kind == "circle":
            obstacles.append(circle_obstacle(name, cx, cy, extent, 0.1))
        elif kind == "ellipse":
            b = extent * rng.uniform(0.45, 0.6)
            obstacles.append(shifted_ellipse_obstacle(name, cx, cy, extent - 0.2, b, theta, 0.08))
        else:
            # half-length of the oval is about 1.57 a for w ~ 1.2 a^4
            a = extent / 1.57
            a4 = a**4
            obstacles.append(calabash_obstacle(name, cx, cy, a, theta, 1.1 * a4, 1.3 * a4))
    return Environment((-5.0, 5.0, -5.0, 5.0), tuple(obstacles))


def walled_goal_env() -> Environment:
    """Goal region at the origin fully enclosed by a certain-to-exist ring obstacle."""
    r2 = X**2 + Y**2
    ring = W**2 - (r2 - 0.36) ** 2
    obs = UncertainObstacle(ring, Uniform(0.15, 0.2), "ring")
    return Environment((-1.0, 1.0, -1.0, 1.0), (obs,))
