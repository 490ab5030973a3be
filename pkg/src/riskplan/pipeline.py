"""Environment files, expert datasets, training and benchmarking at desk scale."""

from __future__ import annotations

import json
import logging
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path as FsPath
from typing import Callable, Iterable, Optional, Sequence

import jsonschema
import numpy as np

from .neural import Architecture, ModelBundle, TrainConfig, TrainHistory, TrainingSet, normalize, train
from .planners import Path, PlannerConfig, PlanReport, Status, nr_rrt_plan, rrt_sos_plan
from .poly_core import TriPoly
from .risk_map import Environment, MapImage, build_constraints, rasterize, risk_stderr
from .uncertainty import Beta, Gaussian, Uniform, UncertainObstacle
from .verifier import mc_edge_risk, mc_path_risk, verify_path, verify_point

log = logging.getLogger(__name__)

OVERLAY_RGB = (0, 0, 255)

_PAIR = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_DIST_PARAMS = {"uniform": ("a", "b"), "gaussian": ("mu", "var"), "beta": ("alpha", "beta")}

ENV_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["bounds", "obstacles"],
    "properties": {
        "bounds": {
            "type": "object",
            "additionalProperties": False,
            "required": ["x", "y"],
            "properties": {"x": _PAIR, "y": _PAIR},
        },
        "obstacles": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["name", "terms", "dist"],
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "terms": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["x", "y", "w", "c"],
                            "properties": {
                                "x": {"type": "integer", "minimum": 0},
                                "y": {"type": "integer", "minimum": 0},
                                "w": {"type": "integer", "minimum": 0},
                                "c": {"type": "number"},
                            },
                        },
                    },
                    "dist": {
                        "oneOf": [
                            {
                                "type": "object",
                                "additionalProperties": False,
                                "required": ["type", *names],
                                "properties": {
                                    "type": {"const": kind},
                                    **{n: {"type": "number"} for n in names},
                                },
                            }
                            for kind, names in _DIST_PARAMS.items()
                        ]
                    },
                },
            },
        },
    },
}


class EnvFileError(ValueError):
    """Invalid environment document; ``path`` is a JSON path such as ``$.obstacles[0].dist``."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def env_from_doc(doc) -> Environment:
    validator = jsonschema.Draft202012Validator(ENV_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        # oneOf failures hide the useful message one level down
        detail = min(err.context, key=lambda e: len(list(e.absolute_path)), default=err) if err.context else err
        raise EnvFileError(detail.json_path, detail.message)
    b = doc["bounds"]
    bounds = (b["x"][0], b["x"][1], b["y"][0], b["y"][1])
    if not (bounds[0] < bounds[1]):
        raise EnvFileError("$.bounds.x", "min must be below max")
    if not (bounds[2] < bounds[3]):
        raise EnvFileError("$.bounds.y", "min must be below max")
    obstacles = []
    seen = set()
    for i, o in enumerate(doc["obstacles"]):
        where = f"$.obstacles[{i}]"
        if o["name"] in seen:
            raise EnvFileError(f"{where}.name", f"duplicate obstacle name {o['name']!r}")
        seen.add(o["name"])
        d = o["dist"]
        try:
            if d["type"] == "uniform":
                dist = Uniform(float(d["a"]), float(d["b"]))
            elif d["type"] == "gaussian":
                dist = Gaussian(float(d["mu"]), float(d["var"]))
            else:
                dist = Beta(float(d["alpha"]), float(d["beta"]))
        except ValueError as exc:
            raise EnvFileError(f"{where}.dist", str(exc)) from None
        poly = TriPoly([((t["x"], t["y"], t["w"]), float(t["c"])) for t in o["terms"]])
        if poly.is_zero():
            raise EnvFileError(f"{where}.terms", "obstacle polynomial is identically zero")
        obstacles.append(UncertainObstacle(poly, dist, o["name"]))
    return Environment(bounds, tuple(obstacles))


def load_env(path) -> Environment:
    path = FsPath(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise EnvFileError("$", f"not valid JSON: {exc}") from None
    return env_from_doc(doc)


def env_to_doc(env: Environment) -> dict:
    xmin, xmax, ymin, ymax = env.bounds
    obstacles = []
    for o in env.obstacles:
        d = o.dist
        if isinstance(d, Uniform):
            dist = {"type": "uniform", "a": d.a, "b": d.b}
        elif isinstance(d, Gaussian):
            dist = {"type": "gaussian", "mu": d.mu, "var": d.var}
        else:
            dist = {"type": "beta", "alpha": d.alpha, "beta": d.beta}
        terms = [{"x": ex, "y": ey, "w": ew, "c": c} for (ex, ey, ew), c in sorted(o.poly.terms.items())]
        obstacles.append({"name": o.name, "terms": terms, "dist": dist})
    return {"bounds": {"x": [xmin, xmax], "y": [ymin, ymax]}, "obstacles": obstacles}


def save_env(env: Environment, path) -> None:
    FsPath(path).write_text(json.dumps(env_to_doc(env), indent=2) + "\n")


def load_env_dir(directory) -> dict[str, Environment]:
    """Every ``*.json`` file in ``directory``, keyed by file stem, in sorted order."""
    files = sorted(FsPath(directory).glob("*.json"))
    if not files:
        raise FileNotFoundError(f"no environment files in {directory}")
    return {f.stem: load_env(f) for f in files}


# -- parallel plumbing ----------------------------------------------------------------


def worker_count() -> int:
    raw = os.environ.get("RISKPLAN_THREADS")
    if raw:
        n = int(raw)
        if n < 1:
            raise ValueError("RISKPLAN_THREADS must be at least 1")
        return n
    return os.cpu_count() or 1


def ordered_map(fn: Callable, items: Sequence, workers: Optional[int] = None) -> list:
    """``map`` over independent work items; results come back in input order."""
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def child_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for one work item; the stream depends only on (seed, key)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


# -- queries -------------------------------------------------------------------------


def sample_query(env: Environment, delta: float, rng: np.random.Generator, cs=None,
                 min_frac: float = 0.5, max_tries: int = 100_000) -> tuple[np.ndarray, np.ndarray]:
    """Safe start and goal at least ``min_frac`` of the workspace diagonal apart."""
    cs = cs if cs is not None else build_constraints(env, delta)
    min_dist = min_frac * env.diagonal
    for _ in range(max_tries):
        s = env.sample_uniform(rng)
        g = env.sample_uniform(rng)
        if math.dist(s, g) >= min_dist and verify_point(cs, s) and verify_point(cs, g):
            return s, g
    raise RuntimeError("could not sample a safe start/goal pair")


@dataclass(frozen=True)
class Query:
    env: str
    delta: float
    start: tuple[float, float]
    goal: tuple[float, float]
    seed: int

    def to_doc(self) -> dict:
        return {"env": self.env, "delta": self.delta, "start": list(self.start),
                "goal": list(self.goal), "seed": self.seed}


def make_queries(envs: dict[str, Environment], deltas: Sequence[float], n: int, seed: int) -> list[Query]:
    out = []
    for ei, (name, env) in enumerate(envs.items()):
        for di, delta in enumerate(deltas):
            cs = build_constraints(env, delta)
            for q in range(n):
                s, g = sample_query(env, delta, child_rng(seed, ei, di, q), cs)
                out.append(Query(name, float(delta), tuple(s.tolist()), tuple(g.tolist()),
                                 int(child_rng(seed, ei, di, q, 1).integers(2**63))))
    return out


def load_queries(path) -> list[Query]:
    doc = json.loads(FsPath(path).read_text())
    items = doc["queries"] if isinstance(doc, dict) else doc
    return [Query(q["env"], float(q["delta"]), tuple(q["start"]), tuple(q["goal"]), int(q["seed"])) for q in items]


def save_queries(queries: Sequence[Query], path) -> None:
    FsPath(path).write_text(json.dumps({"queries": [q.to_doc() for q in queries]}, indent=2) + "\n")


# -- expert dataset ------------------------------------------------------------------


def map_name(env_id: str, delta: float) -> str:
    return f"maps/{env_id}_d{delta:g}.ppm"


def path_samples(path: Path, bounds) -> list[dict]:
    """One record per consecutive waypoint pair, goal fixed to the last waypoint."""
    pts = [np.asarray(p) for p in path.waypoints]
    goal = normalize(pts[-1], bounds)
    seg = [math.dist(a, b) for a, b in zip(pts, pts[1:])]
    out = []
    for q in range(len(pts) - 1):
        out.append({
            "x_t": normalize(pts[q], bounds).tolist(),
            "x_goal": goal.tolist(),
            "x_next": normalize(pts[q + 1], bounds).tolist(),
            "cost_to_go": float(sum(seg[q:])),
        })
    return out


def _expert_item(args):
    env, delta, cfg, seed, key = args
    rng = child_rng(seed, *key)
    cs = build_constraints(env, delta)
    try:
        s, g = sample_query(env, delta, rng, cs)
    except RuntimeError as exc:
        return None, str(exc)
    rep = rrt_sos_plan(env, delta, s, g, cfg, rng, cs=cs)
    if not rep.solved:
        return None, rep.status.value
    return rep.path, None


def gen_dataset(envs: dict[str, Environment], deltas: Sequence[float], pairs: int,
                cfg: PlannerConfig, seed: int, out_dir, image_size: int = 64,
                workers: Optional[int] = None) -> dict:
    """Rasterise each (env, delta) map, solve random queries with RRT-SOS, write JSON-lines samples."""
    out = FsPath(out_dir)
    (out / "maps").mkdir(parents=True, exist_ok=True)
    bounds = {env.bounds for env in envs.values()}
    if len(bounds) != 1:
        raise ValueError("all environments in one dataset must share workspace bounds")
    items, heads = [], []
    for ei, (name, env) in enumerate(envs.items()):
        for di, delta in enumerate(deltas):
            cs = build_constraints(env, delta)
            rel = map_name(name, delta)
            rasterize(cs, env, image_size, image_size).save(out / rel)
            for q in range(pairs):
                items.append((env, float(delta), cfg, seed, (ei, di, q)))
                heads.append({"env": name, "delta": float(delta), "map": rel, "query": q})
    results = ordered_map(_expert_item, items, workers)
    n_paths = n_samples = 0
    failed = []
    with open(out / "dataset.jsonl", "w") as fh:
        for head, (path, err) in zip(heads, results):
            if path is None:
                log.warning("skipping %s delta=%g query %d: %s", head["env"], head["delta"], head["query"], err)
                failed.append({**head, "reason": err})
                continue
            n_paths += 1
            for rec in path_samples(path, next(iter(bounds))):
                fh.write(json.dumps({**head, **rec}) + "\n")
                n_samples += 1
    manifest = {
        "bounds": list(next(iter(bounds))),
        "image_size": image_size,
        "envs": list(envs),
        "deltas": [float(d) for d in deltas],
        "pairs": pairs,
        "seed": seed,
        "paths": n_paths,
        "samples": n_samples,
        "failed": failed,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


def load_dataset(directory) -> TrainingSet:
    root = FsPath(directory)
    manifest = json.loads((root / "manifest.json").read_text())
    images: list[MapImage] = []
    index: dict[str, int] = {}
    cols: dict[str, list] = {k: [] for k in ("img", "x_t", "x_goal", "delta", "x_next", "ctg")}
    with open(root / "dataset.jsonl") as fh:
        for line in fh:
            rec = json.loads(line)
            ref = rec["map"]
            if ref not in index:
                index[ref] = len(images)
                images.append(MapImage.load(root / ref))
            cols["img"].append(index[ref])
            cols["x_t"].append(rec["x_t"])
            cols["x_goal"].append(rec["x_goal"])
            cols["delta"].append(rec["delta"])
            cols["x_next"].append(rec["x_next"])
            cols["ctg"].append(rec["cost_to_go"])
    return TrainingSet(
        images,
        np.array(cols["img"], int),
        np.array(cols["x_t"], float).reshape(-1, 2),
        np.array(cols["x_goal"], float).reshape(-1, 2),
        np.array(cols["delta"], float),
        np.array(cols["x_next"], float).reshape(-1, 2),
        tuple(manifest["bounds"]),
        np.array(cols["ctg"], float),
    )


def train_from_dir(directory, epochs: int, seed: int, val_split: float = 0.1,
                   log_fn=None) -> tuple[ModelBundle, TrainHistory]:
    data = load_dataset(directory)
    size = data.images[0].width if data.images else 64
    cfg = TrainConfig(seed=seed, arch=Architecture(image_size=size))
    return train(data, val_split, epochs, cfg, log=log_fn)


# -- benchmarking --------------------------------------------------------------------

ALGOS = ("rrt-sos", "nr-rrt")


def _bench_item(args):
    algo, env, q, model, cfg, mc_draws, sampler_factory = args
    cfg = replace(cfg, seed=q.seed)
    rng = np.random.default_rng(q.seed)
    cs = build_constraints(env, q.delta)
    if algo == "rrt-sos":
        rep = rrt_sos_plan(env, q.delta, q.start, q.goal, cfg, rng, cs=cs)
    else:
        sampler = sampler_factory(model, env, q.delta) if sampler_factory else None
        rep = nr_rrt_plan(env, q.delta, q.start, q.goal, model, cfg, rng, cs=cs, sampler=sampler)
    return validate_report(rep, env, cs, q, mc_draws, cfg)


def validate_report(rep: PlanReport, env, cs, q: Query, mc_draws: int, cfg: PlannerConfig) -> dict:
    row = {
        "env": q.env, "delta": q.delta, "seed": q.seed,
        "status": rep.status.value, "time": rep.wall_time, "ra_calls": rep.ra_calls,
        "iterations": rep.iterations, "fallback": rep.status is Status.SOLVED_BY_FALLBACK,
        "length": None, "max_edge_risk": None, "path_risk": None, "valid": True, "waypoints": None,
    }
    if not rep.solved:
        return row
    path = rep.path
    r = cfg.resolved(env).r
    ok = (verify_path(cs, path) and math.dist(path.waypoints[0], q.start) < 1e-12
          and math.dist(path.waypoints[-1], q.goal) < r)
    worst = 0.0
    if mc_draws > 0:
        rng = np.random.default_rng([q.seed, 7])
        bound = q.delta + 4.0 * risk_stderr(q.delta, mc_draws)
        for a, b in zip(path.waypoints, path.waypoints[1:]):
            worst = max(worst, mc_edge_risk(env, a, b, mc_draws, rng=rng))
        ok = ok and worst <= bound
        # the budget is per edge; the whole-path figure is reported, not enforced
        row["path_risk"] = mc_path_risk(env, path, mc_draws, rng=np.random.default_rng([q.seed, 8]))
    row["max_edge_risk"] = worst
    row["valid"] = bool(ok)
    if ok:
        row["length"] = path.total_length
        row["waypoints"] = [list(p) for p in path.waypoints]
    else:
        # fail closed: an unsafe path is never reported as a solution
        row["status"] = "Invalid"
    return row


def _stats(xs: list[float]) -> dict:
    if not xs:
        return {"mean": None, "std": None, "median": None}
    return {"mean": statistics.fmean(xs), "std": statistics.pstdev(xs), "median": statistics.median(xs)}


def aggregate(rows: Sequence[dict]) -> dict:
    solved = [r for r in rows if r["status"] in (Status.SOLVED.value, Status.SOLVED_BY_FALLBACK.value)]
    n = len(rows)
    return {
        "queries": n,
        "time": _stats([r["time"] for r in rows]),
        "length": _stats([r["length"] for r in solved]),
        "success_rate": len(solved) / n if n else 0.0,
        "no_fallback_rate": sum(r["status"] == Status.SOLVED.value for r in rows) / n if n else 0.0,
        "fallback_rate": sum(bool(r["fallback"]) for r in rows) / n if n else 0.0,
        "ra_calls": _stats([float(r["ra_calls"]) for r in rows]),
        "invalid": sum(not r["valid"] for r in rows),
    }


def bench(envs: dict[str, Environment], queries: Sequence[Query], algos: Sequence[str],
          model: Optional[ModelBundle], cfg: PlannerConfig, mc_draws: int = 20_000,
          workers: Optional[int] = None, sampler_factory=None) -> dict:
    for a in algos:
        if a not in ALGOS:
            raise ValueError(f"unknown algorithm {a!r}")
    if "nr-rrt" in algos and model is None and sampler_factory is None:
        raise ValueError("nr-rrt needs a model")
    items = [(a, envs[q.env], q, model, cfg, mc_draws, sampler_factory) for a in algos for q in queries]
    # wall times are only comparable when queries do not compete for cores
    rows = ordered_map(_bench_item, items, workers)
    for row, (a, _, _, _, _, _, _) in zip(rows, items):
        row["algo"] = a
    report = {
        "algorithms": {a: aggregate([r for r in rows if r["algo"] == a]) for a in algos},
        "rows": rows,
    }
    report["valid"] = all(r["valid"] for r in rows)
    return report


def bench_table(report: dict) -> str:
    lines = [f"{'algo':<8} {'time(s)':>18} {'length':>16} {'success':>8} {'fallback':>9} {'RA calls':>10}"]
    for a, agg in report["algorithms"].items():
        t, ln = agg["time"], agg["length"]
        length = f"{ln['mean']:.3f}±{ln['std']:.3f}" if ln["mean"] is not None else "-"
        lines.append(
            f"{a:<8} {t['mean']:>9.3f}±{t['std']:<8.3f} {length:>16} {agg['success_rate']:>8.2f} "
            f"{agg['fallback_rate']:>9.2f} {agg['ra_calls']['mean']:>10.0f}"
        )
    if not report["valid"]:
        lines.append("INVALID RUN: at least one returned path failed safety validation")
    return "\n".join(lines)


# -- overlays -------------------------------------------------------------------------


def world_to_pixel(pt, bounds, width: int, height: int) -> tuple[int, int]:
    xmin, xmax, ymin, ymax = bounds
    col = int(math.floor((pt[0] - xmin) / (xmax - xmin) * width))
    row = int(math.floor((ymax - pt[1]) / (ymax - ymin) * height))
    return min(max(row, 0), height - 1), min(max(col, 0), width - 1)


def bresenham(r0: int, c0: int, r1: int, c1: int) -> list[tuple[int, int]]:
    pts = []
    dr, dc = abs(r1 - r0), -abs(c1 - c0)
    sr = 1 if r0 < r1 else -1
    sc = 1 if c0 < c1 else -1
    err = dr + dc
    while True:
        pts.append((r0, c0))
        if r0 == r1 and c0 == c1:
            return pts
        e2 = 2 * err
        if e2 >= dc:
            err += dc
            r0 += sr
        if e2 <= dr:
            err += dr
            c0 += sc


def render_overlay(env: Environment, delta: float, path: Optional[Path], width: int, height: int) -> MapImage:
    img = rasterize(build_constraints(env, delta), env, width, height)
    if path is None or not path.waypoints:
        return img
    px = img.pixels.copy()
    cells = [world_to_pixel(p, env.bounds, width, height) for p in path.waypoints]
    px[cells[0]] = OVERLAY_RGB
    for a, b in zip(cells, cells[1:]):
        for rc in bresenham(*a, *b):
            px[rc] = OVERLAY_RGB
    return MapImage(px)
