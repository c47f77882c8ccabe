"""Mean relative current error of truncated lifts against the Grad reference, per closure."""

from _common import parser, run_and_save

from carleman_hydro.carleman_grad import CLOSURES


def main():
    p = parser(__doc__)
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--kmax", type=int, default=5)
    args = p.parse_args()
    for closure in CLOSURES:
        _, table = run_and_save(args.out, f"error_compare_{closure}.csv", kind="error-compare",
                                closure=closure, steps=args.steps, K=tuple(range(1, args.kmax + 1)))
        last = table.rows[-1]
        print(f"{closure:>9} step {last[0]}: " + "  ".join(f"{h}={v:.3e}" for h, v in
                                                          zip(table.header[2:], last[2:])))


if __name__ == "__main__":
    main()
