"""CSV data for r(b) of the three-body triangles and the pendulum frequencies against r."""
import argparse
from pathlib import Path

import numpy as np

from cotred.equilibria import sweep_csv, sweep_equilibria
from cotred.models import pendulum_system, three_body_system


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="sweeps", help="output directory")
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    tb = sweep_equilibria(three_body_system(), np.round(np.arange(5.0, 9.0001, 0.05), 10), args.jobs)
    (out / "three_body_b.csv").write_text(sweep_csv(tb))
    pd = sweep_equilibria(pendulum_system(), np.round(np.arange(0.2, 3.0001, 0.05), 10))
    (out / "pendulum_r.csv").write_text(sweep_csv(pd))

    best = max((row for row in tb if row.converged), key=lambda row: row.r)
    print(f"three-body: {sum(row.converged for row in tb)}/{len(tb)} converged, max r = {best.r:.6f} at b = {best.param}")
    print(f"pendulum: {sum(row.converged for row in pd)}/{len(pd)} converged")
    print(f"written to {out}/")


if __name__ == "__main__":
    main()
