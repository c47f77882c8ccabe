"""J1 at probe sites for K = 1, 2, 3 over a long horizon, and where (if anywhere) K=1 takes the lead."""

import numpy as np
from _common import parser, run_and_save

from carleman_hydro.analysis import crossover_step
from carleman_hydro.carleman_grad import CLOSURES


def main():
    p = parser(__doc__)
    p.add_argument("--steps", type=int, default=300)
    args = p.parse_args()
    for closure in CLOSURES:
        cfg, table = run_and_save(args.out, f"probe_{closure}.csv", kind="probe", closure=closure,
                                  steps=args.steps, K=(1, 2, 3), snapshot_every=1)
        rows = np.array([r for r in table.rows], dtype=float)
        for x1, x2 in cfg.sites:
            sel = rows[(rows[:, 2] == x1) & (rows[:, 3] == x2)]
            ref = sel[:, -1]
            err = {K: np.abs(sel[:, 4 + i] - ref) for i, K in enumerate(cfg.K)}
            found = {K: crossover_step(err[1], err[K], rtol=0.01, atol=1e-12) for K in (2, 3)}
            print(f"{closure:>9} site ({x1},{x2}): crossover step vs K=2: {found[2]}, vs K=3: {found[3]}")


if __name__ == "__main__":
    main()
