"""Write the built-in environments as JSON files for the command line tools.

    python3 demos/make_envs.py --out demos/envs
"""

import argparse
from pathlib import Path

from riskplan import pipeline
from riskplan.environments import circle_env, cluttered_env, ellipse_env, heart_env, walled_goal_env


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="demos/envs")
    args = ap.parse_args()
    out = Path(args.out)
    (out / "single").mkdir(parents=True, exist_ok=True)
    (out / "cluttered").mkdir(parents=True, exist_ok=True)
    for name, env in [("ellipse", ellipse_env()), ("circle", circle_env()), ("heart", heart_env()),
                      ("walled_goal", walled_goal_env())]:
        pipeline.save_env(env, out / "single" / f"{name}.json")
    for seed in range(5):
        pipeline.save_env(cluttered_env(seed), out / "cluttered" / f"clutter{seed}.json")
    print(f"wrote environments under {out}")


if __name__ == "__main__":
    main()
