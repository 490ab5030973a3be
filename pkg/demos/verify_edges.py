"""Certify straight edges and compare each verdict with a Monte Carlo estimate.

An accepted edge never enters the risk zone, so its sampled collision
probability stays under the bound. A rejected edge names the constraint that
failed. The moment bound is conservative, so some rejected edges still show a
sampled risk below delta.

    python3 demos/verify_edges.py
"""

import argparse

import numpy as np

from riskplan.environments import ellipse_env
from riskplan.risk_map import build_constraints, risk_stderr
from riskplan.verifier import mc_edge_risk, verify_edge

EDGES = [((2.0, 2.0), (1.8, 2.0)), ((2.0, 2.0), (2.0, 1.5)), ((-1.9, 1.9), (1.9, 1.9)),
         ((-1.9, -1.0), (1.9, -1.0)), ((-1.0, 0.0), (1.0, 0.0))]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--delta", type=float, default=0.1)
    ap.add_argument("--draws", type=int, default=100_000)
    args = ap.parse_args()

    env = ellipse_env()
    cs = build_constraints(env, args.delta)
    rng = np.random.default_rng(1)
    bound = args.delta + 4 * risk_stderr(args.delta, args.draws)
    print(f"delta {args.delta}, MC bound {bound:.4f}")
    for u, v in EDGES:
        cert = verify_edge(cs, u, v)
        risk = mc_edge_risk(env, u, v, args.draws, rng=rng)
        why = "" if cert.verdict else f" rejected by {cert.rejected_constraint[0]} g{cert.rejected_constraint[1]}"
        print(f"{u} -> {v}: {'SAFE' if cert.verdict else 'UNSAFE'}{why}, MC risk {risk:.4f}")


if __name__ == "__main__":
    main()
