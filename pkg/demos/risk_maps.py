"""Three-zone risk maps and a Monte Carlo spot check of the safe zone.

For each risk level the map is rasterised and a handful of safe pixels are
checked against sampled obstacle realisations.

    python3 demos/risk_maps.py --env ellipse --out /tmp/maps
"""

import argparse
from pathlib import Path

import numpy as np

from riskplan.environments import circle_env, ellipse_env, heart_env
from riskplan.risk_map import (Zone, build_constraints, classify_point, mc_point_risk, rasterize,
                               risk_stderr, zone_counts)

ENVS = {"ellipse": ellipse_env, "circle": circle_env, "heart": heart_env}


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--env", choices=sorted(ENVS), default="ellipse")
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--draws", type=int, default=100_000)
    ap.add_argument("--out", default=None, help="directory for PPM images")
    args = ap.parse_args()

    env = ENVS[args.env]()
    rng = np.random.default_rng(0)
    print(f"{'delta':>5} {'safe':>6} {'risk':>6} {'danger':>6}  max MC risk over 20 safe points")
    for delta in (0.1, 0.2, 0.5, 0.8, 1.0):
        cs = build_constraints(env, delta)
        img = rasterize(cs, env, args.size, args.size)
        c = zone_counts(img)
        pts = []
        while len(pts) < 20:
            p = env.sample_uniform(rng)
            if classify_point(cs, p) is Zone.SAFE:
                pts.append(p)
        worst = max(mc_point_risk(env, p, args.draws, rng) for p in pts)
        bound = delta + 4 * risk_stderr(delta, args.draws)
        print(f"{delta:>5.1f} {c['safe']:>6} {c['risk']:>6} {c['dangerous']:>6}  {worst:.4f} (bound {bound:.4f})")
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            img.save(Path(args.out) / f"{args.env}_d{delta:g}.ppm")


if __name__ == "__main__":
    main()
