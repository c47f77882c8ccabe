"""Carleman partial sums of the logistic equation inside and beyond the convergence horizon."""

from _common import parser, run_and_save

from carleman_hydro.logistic import LogisticParams, carleman_series, convergence_horizon, exact_solution


def main():
    args = parser(__doc__).parse_args()
    run_and_save(args.out, "logistic.csv", kind="logistic", a=-1.0, b=-1.0, x0=0.5,
                 K=(1, 2, 4, 8, 16), t_max=2.0, n_t=201)
    p = LogisticParams(-1.0, -1.0, 0.5)
    print(f"t_lim = {convergence_horizon(p):.6f}")
    for t in (0.5, 1.0, 1.2, 1.5):
        errs = [abs(carleman_series(p, t, K) - exact_solution(p, t)) for K in (10, 40, 160)]
        print(f"t={t:4.2f}  |S_K - x| for K=10,40,160: " + "  ".join(f"{e:.2e}" for e in errs))


if __name__ == "__main__":
    main()
