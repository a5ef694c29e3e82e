"""Run every shipped experiment config through the CLI and summarise verdicts.

    python scripts/run_experiments.py [--out results] [--only dichotomy]
"""
import argparse
import json
import time
from pathlib import Path

from collide.cli import run

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="results")
    p.add_argument("--only", help="run only configs for this experiment name")
    args = p.parse_args()
    for path in sorted(CONFIGS.glob("exp_*.json")):
        name = json.loads(path.read_text(encoding="utf-8"))["experiment"]
        if args.only and name != args.only:
            continue
        out = Path(args.out) / path.stem
        start = time.perf_counter()
        status = run(["experiment", "--name", name, "--config", str(path), "--out", str(out)])
        res = json.loads((out / f"{name}.json").read_text(encoding="utf-8")) if status == 0 else {}
        print(f"{path.stem:28s} exit={status} verdict={res.get('verdict')} "
              f"({time.perf_counter() - start:.0f}s)", flush=True)


if __name__ == "__main__":
    main()
