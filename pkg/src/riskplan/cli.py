"""Command-line entry point: ``riskplan <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path as FsPath

import numpy as np

from . import pipeline
from .neural import load_model, save_model
from .planners import PlannerConfig, Status, nr_rrt_plan, path_to_json, rrt_sos_plan
from .risk_map import build_constraints, rasterize
from .verifier import verify_edge


def _point(text: str) -> tuple[float, float]:
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y, got {text!r}") from None
    return x, y


def _edge(text: str):
    try:
        a, b = text.split(":")
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x1,y1:x2,y2, got {text!r}") from None
    return _point(a), _point(b)


def _size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None
    return w, h


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


def _add_planner_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--budget", type=float, default=30.0, help="per-query time budget in seconds")
    p.add_argument("--iters", type=int, default=100, help="bidirectional iterations N")
    p.add_argument("--replans", type=int, default=5, help="replanning rounds N_j")


def _planner_cfg(args, seed: int = 0) -> PlannerConfig:
    return PlannerConfig(N=args.iters, N_j=args.replans, time_budget_s=args.budget, seed=seed)


def cmd_rasterize(args) -> int:
    env = pipeline.load_env(args.env)
    w, h = args.size
    rasterize(build_constraints(env, args.delta), env, w, h).save(args.out)
    return 0


def cmd_verify(args) -> int:
    env = pipeline.load_env(args.env)
    u, v = args.edge
    cert = verify_edge(build_constraints(env, args.delta), u, v)
    print("SAFE" if cert.verdict else "UNSAFE")
    for (name, k), m in cert.margins.items():
        print(f"  {name} g{k}: endpoint margin {m:.6g}")
    if cert.rejected_constraint:
        name, k = cert.rejected_constraint
        print(f"  rejected by {name} g{k}")
    return 0 if cert.verdict else 1


def cmd_plan(args) -> int:
    env = pipeline.load_env(args.env)
    cfg = _planner_cfg(args, args.seed)
    rng = np.random.default_rng(args.seed)
    if args.algo == "rrt-sos":
        rep = rrt_sos_plan(env, args.delta, args.start, args.goal, cfg, rng)
    else:
        if not args.model:
            print("error: --model is required for nr-rrt", file=sys.stderr)
            return 2
        rep = nr_rrt_plan(env, args.delta, args.start, args.goal, load_model(args.model), cfg, rng)
    FsPath(args.out).write_text(path_to_json(rep.path, args.delta, rep.status, args.seed))
    if args.overlay:
        w, h = args.overlay_size
        pipeline.render_overlay(env, args.delta, rep.path, w, h).save(args.overlay)
    print(f"{rep.status.value}: iterations {rep.iterations}, RA calls {rep.ra_calls}, "
          f"{rep.wall_time:.3f} s", file=sys.stderr)
    return 0 if rep.solved else 1


def cmd_gen_dataset(args) -> int:
    envs = pipeline.load_env_dir(args.envs)
    cfg = _planner_cfg(args)
    manifest = pipeline.gen_dataset(envs, args.deltas, args.pairs, cfg, args.seed, args.out, args.image_size)
    print(f"{manifest['paths']} expert paths, {manifest['samples']} samples, "
          f"{len(manifest['failed'])} skipped", file=sys.stderr)
    return 0


def cmd_train(args) -> int:
    model, hist = pipeline.train_from_dir(
        args.dataset, args.epochs, args.seed, args.val_split,
        log_fn=lambda msg: print(msg, file=sys.stderr),
    )
    save_model(model, args.out)
    if args.history:
        FsPath(args.history).write_text(
            json.dumps({"train_mse": hist.train_mse, "val_mse": hist.val_mse}, indent=2) + "\n"
        )
    return 0


def cmd_bench(args) -> int:
    envs = pipeline.load_env_dir(args.envs)
    queries = pipeline.load_queries(args.queries)
    model = load_model(args.model) if args.model else None
    report = pipeline.bench(envs, queries, args.algos, model, _planner_cfg(args), args.mc_draws)
    FsPath(args.out).write_text(json.dumps(report, indent=2) + "\n")
    print(pipeline.bench_table(report))
    if not report["valid"]:
        print("error: safety validation failed for some paths; see the report rows", file=sys.stderr)
        return 3
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="riskplan", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rasterize", help="render the three-zone risk map as PPM")
    p.add_argument("--env", required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--size", type=_size, default=(64, 64), help="WxH")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rasterize)

    p = sub.add_parser("verify", help="certify one straight edge")
    p.add_argument("--env", required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--edge", type=_edge, required=True, help="x1,y1:x2,y2")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("plan", help="plan one query")
    p.add_argument("--algo", choices=pipeline.ALGOS, required=True)
    p.add_argument("--env", required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--start", type=_point, required=True)
    p.add_argument("--goal", type=_point, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model")
    p.add_argument("--out", required=True)
    p.add_argument("--overlay")
    p.add_argument("--overlay-size", type=_size, default=(256, 256))
    _add_planner_args(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("gen-dataset", help="expert demonstrations from RRT-SOS")
    p.add_argument("--envs", required=True, help="directory of environment JSON files")
    p.add_argument("--deltas", type=_floats, required=True)
    p.add_argument("--pairs", type=int, default=500, help="queries per environment and risk level")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--image-size", type=int, default=64)
    p.add_argument("--out", required=True)
    _add_planner_args(p)
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("train", help="train the neural sampler")
    p.add_argument("--dataset", required=True)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--val-split", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.add_argument("--history", help="optional JSON file for the loss curves")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bench", help="compare planners on a query set")
    p.add_argument("--envs", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--algos", type=lambda s: s.split(","), default=list(pipeline.ALGOS))
    p.add_argument("--model")
    p.add_argument("--mc-draws", type=int, default=20_000)
    p.add_argument("--out", required=True)
    _add_planner_args(p)
    p.set_defaults(func=cmd_bench)
    return ap


# coordinate values such as "-0.9,0.5" would otherwise be read as option flags
_COORD_OPTS = ("--edge", "--start", "--goal")


def _join_coords(argv: list[str]) -> list[str]:
    out = []
    it = iter(argv)
    for tok in it:
        if tok in _COORD_OPTS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_join_coords(argv))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (pipeline.EnvFileError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
