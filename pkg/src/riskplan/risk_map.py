"""Deterministic risk-contour constraints, zone classification and raster maps."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path as FsPath
from typing import Sequence

import numpy as np

from .poly_core import PlanePoly
from .uncertainty import UncertainObstacle, expect_poly, expect_square

SAFE_RGB = (255, 255, 255)
RISK_RGB = (0, 0, 0)
DANGER_RGB = (255, 0, 0)


@dataclass(frozen=True)
class Environment:
    bounds: tuple[float, float, float, float]  # xmin, xmax, ymin, ymax
    obstacles: tuple[UncertainObstacle, ...] = ()

    def __post_init__(self):
        xmin, xmax, ymin, ymax = (float(b) for b in self.bounds)
        if not (xmin < xmax and ymin < ymax):
            raise ValueError(f"degenerate bounds {self.bounds}")
        object.__setattr__(self, "bounds", (xmin, xmax, ymin, ymax))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        names = [o.name for o in self.obstacles]
        if len(set(names)) != len(names):
            raise ValueError(f"obstacle names must be unique: {names}")

    @property
    def diagonal(self) -> float:
        xmin, xmax, ymin, ymax = self.bounds
        return float(np.hypot(xmax - xmin, ymax - ymin))

    def contains(self, pt) -> bool:
        xmin, xmax, ymin, ymax = self.bounds
        return xmin <= pt[0] <= xmax and ymin <= pt[1] <= ymax

    def sample_uniform(self, rng: np.random.Generator) -> np.ndarray:
        xmin, xmax, ymin, ymax = self.bounds
        return np.array([rng.uniform(xmin, xmax), rng.uniform(ymin, ymax)])


class Zone(enum.Enum):
    SAFE = "safe"
    RISK = "risk"
    DANGEROUS = "dangerous"


@dataclass(frozen=True)
class ObstacleConstraints:
    name: str
    g1: PlanePoly  # E[P]^2 - (1 - delta) E[P^2]
    g2: PlanePoly  # -E[P]
    mean: PlanePoly
    second: PlanePoly


@dataclass(frozen=True)
class RiskConstraintSet:
    delta: float
    bounds: tuple[float, float, float, float]
    obstacles: tuple[ObstacleConstraints, ...] = field(default=())

    @cached_property
    def labels(self) -> list[tuple[str, int]]:
        return [(o.name, k) for o in self.obstacles for k in (1, 2)]

    @cached_property
    def polys(self) -> list[PlanePoly]:
        return [g for o in self.obstacles for g in (o.g1, o.g2)]

    @cached_property
    def bank(self) -> np.ndarray:
        """All constraint coefficient matrices zero-padded to one shape, (K, nx, ny)."""
        if not self.polys:
            return np.zeros((0, 1, 1))
        nx = max(p.coeff_matrix.shape[0] for p in self.polys)
        ny = max(p.coeff_matrix.shape[1] for p in self.polys)
        out = np.zeros((len(self.polys), nx, ny))
        for k, p in enumerate(self.polys):
            C = p.coeff_matrix
            out[k, : C.shape[0], : C.shape[1]] = C
        out.setflags(write=False)
        return out

    @cached_property
    def degrees(self) -> list[int]:
        return [p.degree() for p in self.polys]

    def in_bounds(self, pt) -> bool:
        xmin, xmax, ymin, ymax = self.bounds
        return xmin <= pt[0] <= xmax and ymin <= pt[1] <= ymax

    def point_values(self, pt) -> np.ndarray:
        """Constraint values at one point, in ``labels`` order."""
        nx, ny = self.bank.shape[1:]
        xp = float(pt[0]) ** np.arange(nx)
        yp = float(pt[1]) ** np.arange(ny)
        return (self.bank @ yp) @ xp

    def values(self, x, y) -> np.ndarray:
        """Constraint values, stacked along a new leading axis in ``labels`` order."""
        if not self.polys:
            return np.zeros((0,) + np.shape(x))
        return np.stack([p.eval(x, y) for p in self.polys])


def build_constraints(env: Environment, delta: float) -> RiskConstraintSet:
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"risk level must lie in [0, 1], got {delta}")
    items = []
    for obs in env.obstacles:
        mean = expect_poly(obs.poly, obs.dist)
        second = expect_square(obs.poly, obs.dist)
        g1 = mean * mean - (1.0 - delta) * second
        items.append(ObstacleConstraints(obs.name, g1, -mean, mean, second))
    return RiskConstraintSet(float(delta), env.bounds, tuple(items))


# codes used by the vectorised classifier
_SAFE, _RISK, _DANGER = 0, 1, 2


def classify_codes(cs: RiskConstraintSet, x, y) -> np.ndarray:
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    codes = np.full(np.broadcast(x, y).shape, _SAFE, dtype=np.uint8)
    danger = np.zeros(codes.shape, bool)
    risk = np.zeros(codes.shape, bool)
    for o in cs.obstacles:
        danger |= o.g2.eval(x, y) < 0.0
        risk |= o.g1.eval(x, y) < 0.0
    codes[risk] = _RISK
    codes[danger] = _DANGER
    return codes


def classify_point(cs: RiskConstraintSet, pt) -> Zone:
    if not cs.in_bounds(pt):
        raise ValueError(f"point {tuple(pt)} lies outside the workspace {cs.bounds}")
    vals = cs.point_values(pt)
    if (vals[1::2] < 0.0).any():
        return Zone.DANGEROUS
    if (vals[0::2] < 0.0).any():
        return Zone.RISK
    return Zone.SAFE


@dataclass(frozen=True, eq=False)
class MapImage:
    """Row-major RGB raster; row 0 is the top of the workspace (ymax)."""

    pixels: np.ndarray  # (height, width, 3) uint8

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        return isinstance(other, MapImage) and np.array_equal(self.pixels, other.pixels)

    def count(self, rgb) -> int:
        return int(np.all(self.pixels == np.asarray(rgb, np.uint8), axis=-1).sum())

    def mask(self, rgb) -> np.ndarray:
        return np.all(self.pixels == np.asarray(rgb, np.uint8), axis=-1)

    def to_ppm(self) -> bytes:
        header = f"P6\n{self.width} {self.height}\n255\n".encode("ascii")
        return header + np.ascontiguousarray(self.pixels, dtype=np.uint8).tobytes()

    def save(self, path) -> None:
        FsPath(path).write_bytes(self.to_ppm())

    @classmethod
    def from_ppm(cls, data: bytes) -> "MapImage":
        tokens = []
        pos = 0
        while len(tokens) < 4:
            while data[pos : pos + 1].isspace():
                pos += 1
            if data[pos : pos + 1] == b"#":
                pos = data.index(b"\n", pos) + 1
                continue
            start = pos
            while not data[pos : pos + 1].isspace():
                pos += 1
            tokens.append(data[start:pos])
        if tokens[0] != b"P6":
            raise ValueError("not a binary PPM (P6) image")
        w, h, maxval = (int(t) for t in tokens[1:])
        if maxval != 255:
            raise ValueError(f"unsupported maxval {maxval}")
        payload = data[pos + 1 : pos + 1 + w * h * 3]
        if len(payload) != w * h * 3:
            raise ValueError("truncated PPM payload")
        return cls(np.frombuffer(payload, np.uint8).reshape(h, w, 3).copy())

    @classmethod
    def load(cls, path) -> "MapImage":
        return cls.from_ppm(FsPath(path).read_bytes())


def pixel_centers(bounds, width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    xmin, xmax, ymin, ymax = bounds
    xs = xmin + (np.arange(width) + 0.5) * (xmax - xmin) / width
    ys = ymax - (np.arange(height) + 0.5) * (ymax - ymin) / height
    return np.meshgrid(xs, ys)


def rasterize(cs: RiskConstraintSet, env: Environment, width: int, height: int) -> MapImage:
    if width < 8 or height < 8:
        raise ValueError("raster must be at least 8x8")
    X, Y = pixel_centers(env.bounds, width, height)
    codes = classify_codes(cs, X, Y)
    palette = np.array([SAFE_RGB, RISK_RGB, DANGER_RGB], np.uint8)
    return MapImage(palette[codes])


def mc_point_risk(env: Environment, pt, n: int, rng: np.random.Generator) -> float:
    """Fraction of ``n`` joint parameter draws that put ``pt`` inside some obstacle."""
    if n < 1:
        raise ValueError("need at least one draw")
    hit = np.zeros(n, bool)
    for obs in env.obstacles:
        w = obs.dist.sample(rng, n)
        hit |= obs.values_at(pt, w) >= 0.0
    return float(hit.mean())


def risk_stderr(delta: float, n: int) -> float:
    return float(np.sqrt(delta * (1.0 - delta) / n))


def zone_counts(img: MapImage) -> dict[str, int]:
    return {
        "safe": img.count(SAFE_RGB),
        "risk": img.count(RISK_RGB),
        "dangerous": img.count(DANGER_RGB),
    }


def grid_points(bounds, n: int) -> Sequence[tuple[float, float]]:
    X, Y = pixel_centers(bounds, n, n)
    return list(zip(X.ravel().tolist(), Y.ravel().tolist()))
