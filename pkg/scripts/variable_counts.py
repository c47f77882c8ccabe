"""Number of lifted variables and qubits for 9 and 19 discrete velocities, k = 1..10."""

from _common import parser, run_and_save


def main():
    args = parser(__doc__).parse_args()
    _, table = run_and_save(args.out, "counts.csv", kind="counts", velocities=(9, 19), kmax=10)
    print("  ".join(f"{h:>10}" for h in table.header))
    for row in table.rows:
        print("  ".join(f"{x:>10}" for x in row))


if __name__ == "__main__":
    main()
