"""Plan on the circle environment with both planners.

RRT-SOS solves the query directly. NR-RRT runs with a deliberately useless
sampler that always proposes the start point, so the bidirectional search
cannot make progress and the standby planner finishes the job. An enclosed
goal shows the Infeasible outcome.

    python3 demos/plan_circle.py --overlay /tmp/circle_path.ppm
"""

import argparse

import numpy as np

from riskplan.environments import circle_env, walled_goal_env
from riskplan.pipeline import render_overlay
from riskplan.planners import PlannerConfig, nr_rrt_plan, rrt_sos_plan
from riskplan.risk_map import build_constraints
from riskplan.verifier import verify_path


class StuckSampler:
    def __init__(self, pt):
        self.pt = np.asarray(pt, float)

    def propose(self, x_t, x_goal, rng):
        return self.pt.copy()


def show(label, rep, cs):
    if rep.path is None:
        print(f"{label}: {rep.status.value}, no path, {rep.wall_time:.2f} s")
        return
    print(f"{label}: {rep.status.value}, {len(rep.path)} waypoints, length {rep.path.total_length:.3f}, "
          f"{rep.ra_calls} RA calls, {rep.wall_time:.2f} s, verified {verify_path(cs, rep.path)}")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--delta", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--overlay", default=None)
    args = ap.parse_args()

    env = circle_env()
    cs = build_constraints(env, args.delta)
    start, goal = (-0.9, -0.9), (0.9, 0.9)
    cfg = PlannerConfig(seed=args.seed)
    rep = rrt_sos_plan(env, args.delta, start, goal, cfg, cs=cs)
    show("RRT-SOS", rep, cs)
    if args.overlay and rep.path:
        render_overlay(env, args.delta, rep.path, 256, 256).save(args.overlay)
        print(f"overlay written to {args.overlay}")

    rep = nr_rrt_plan(env, args.delta, start, goal, None, PlannerConfig(N=10, seed=args.seed),
                      sampler=StuckSampler(start), cs=cs)
    show("NR-RRT, stuck sampler", rep, cs)

    wall = walled_goal_env()
    rep = nr_rrt_plan(wall, args.delta, (0.9, 0.9), (0.0, 0.0), None,
                      PlannerConfig(N=10, time_budget_s=3.0), sampler=StuckSampler((0.9, 0.9)))
    show("NR-RRT, enclosed goal", rep, build_constraints(wall, args.delta))


if __name__ == "__main__":
    main()
