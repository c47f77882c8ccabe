"""Gate-count scaling of HHL and CKS solvers for the lifted system."""

from _common import parser, run_and_save


def main():
    p = parser(__doc__)
    p.add_argument("--N", type=int, default=1024)
    p.add_argument("--kappa", type=float, default=100.0)
    p.add_argument("--eps", type=float, default=0.01)
    args = p.parse_args()
    _, table = run_and_save(args.out, "cost.csv", kind="cost", N=args.N, kappa=args.kappa,
                            eps=args.eps, K=(1, 2, 3, 4, 5))
    for row in table.rows:
        print(f"k={row[1]}  HHL={row[5]:.3e}  CKS={row[6]:.3e}  ratio={row[7]:.1f}")


if __name__ == "__main__":
    main()
