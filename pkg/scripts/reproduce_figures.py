"""Write the bias/NPV grid and the closed-form table for a config.

    python3 scripts/reproduce_figures.py configs/full.toml results/

Produces grid.csv and analytic.csv in the output directory; plotting is left
to whatever tool reads CSV.
"""

import argparse
import pathlib
import time

from spcd.cli import main


def run(config: str, outdir: pathlib.Path, parallelism: int | None) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    extra = ["--parallelism", str(parallelism)] if parallelism else []
    for cmd in ("analytic", "grid"):
        t0 = time.perf_counter()
        code = main([cmd, "--config", config, "--out", str(outdir / f"{cmd}.csv"), *extra])
        if code:
            raise SystemExit(code)
        print(f"{cmd}: {time.perf_counter() - t0:.1f}s -> {outdir / (cmd + '.csv')}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("outdir", type=pathlib.Path)
    ap.add_argument("--parallelism", type=int)
    args = ap.parse_args()
    run(args.config, args.outdir, args.parallelism)
