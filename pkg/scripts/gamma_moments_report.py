"""Closed-form Gamma (k, s) moments next to brute-force ratio moments."""
import argparse

from jtcran.gamma_moments import moment_report

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--samples", type=int, default=200_000)
ap.add_argument("--max", type=int, default=4, help="largest M and N")
args = ap.parse_args()

print(f"{'M':>2} {'N':>2} {'k':>8} {'s':>8} {'mean':>9} {'oracle':>9} {'var':>9} {'oracle':>9}")
for row in moment_report(range(1, args.max + 1), range(1, args.max + 1), args.samples):
    print(f"{row['M']:>2} {row['N']:>2} {row['k']:8.4f} {row['s']:8.4f} {row['gamma_mean']:9.5f} "
          f"{row['oracle_mean']:9.5f} {row['gamma_var']:9.5f} {row['oracle_var']:9.5f}")
