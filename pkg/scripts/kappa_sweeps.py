"""Condition number of the lifted step against lattice size N and telescoping power T."""

from _common import parser, run_and_save


def main():
    p = parser(__doc__)
    p.add_argument("--quick", action="store_true", help="k = 1, 2 and N <= 64 only")
    args = p.parse_args()
    ks, sizes = ((1, 2), (16, 64)) if args.quick else ((1, 2, 3), (16, 64, 256))
    _, table = run_and_save(args.out, "kappa_N.csv", kind="kappa-sweep", sweep="N", K=ks, sizes=sizes)
    for key, fit in table.notes.items():
        print(f"N sweep {key}: exponent={fit['exponent']:+.3e}  R^2={fit['r2']:.3f}")
    _, table = run_and_save(args.out, "kappa_T.csv", kind="kappa-sweep", sweep="T", K=(1,), L=8,
                            t_values=tuple(range(1, 101)))
    for key, fit in table.notes.items():
        print(f"T sweep {key}: exponent={fit['exponent']:.3f}  R^2={fit['r2']:.3f}")


if __name__ == "__main__":
    main()
