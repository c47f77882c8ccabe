"""Decay of a single shear mode in the Grad system and in the lattice Boltzmann model."""

import numpy as np
from _common import parser

from carleman_hydro import analysis, grad_dns, lbm_ref
from carleman_hydro.linalg import Grid


def main():
    p = parser(__doc__)
    p.add_argument("--L", type=int, default=32)
    args = p.parse_args()
    grid = Grid(args.L, args.L)
    k = 2 * np.pi / args.L
    target = k * k / 6

    params = grad_dns.GradParams(omega=2.0)
    ts, amps = [], []
    for n, f in grad_dns.run(grad_dns.kolmogorov_init(grid, 0.1, 0.0, params), params, 10000, every=100):
        ts.append(n * params.dt)
        amps.append(analysis.mode_amplitude(f.J[..., 0], k, 2))
    grad_rate = analysis.fit_decay_rate(ts, amps)

    ts, amps = [], []
    for n, _, J in lbm_ref.run(lbm_ref.kolmogorov_populations(grid, 0.1, 0.0), 1.0, 100):
        ts.append(n)
        amps.append(analysis.mode_amplitude(J[..., 0], k, 2))
    lbm_rate = analysis.fit_decay_rate(ts, amps)

    print(f"nu k^2       = {target:.6e}")
    print(f"Grad  rate   = {grad_rate:.6e}  ({grad_rate / target - 1:+.3%})")
    print(f"LBM   rate   = {lbm_rate:.6e}  ({lbm_rate / target - 1:+.3%})")


if __name__ == "__main__":
    main()
