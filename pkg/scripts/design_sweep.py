"""Sweep the correlation coefficient of a DC kernel and track the optimal design.

For each rho on a symmetric grid the script solves the design problem, tests
the impulsive correlation for stationarity, and emits one CSV row with how far
the optimum moved and how much it improved. At rho = 0 the kernel is diagonal
and the design stays at the impulsive point; any coupling moves it.
"""

import argparse
import csv
import sys

import numpy as np

from optinput.design_solver import DesignProblem, check_rdagger_optimality, eval_criterion, solve
from optinput.kernels import KernelSpec


def parse_args(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=4)
    parser.add_argument("--N", type=int, default=12)
    parser.add_argument("--energy", type=float, default=1.0)
    parser.add_argument("--sigma2", type=float, default=1.0)
    parser.add_argument("--c", type=float, default=1.0)
    parser.add_argument("--lam", type=float, default=0.9)
    parser.add_argument("--criterion", default="D", choices=("D", "A", "E"))
    parser.add_argument("--rho-max", type=float, default=0.9)
    parser.add_argument("--steps", type=int, default=19, help="grid points from -rho-max to rho-max")
    parser.add_argument("--out", default="-", help="CSV path (default stdout)")
    return parser.parse_args(argv)


def sweep_row(args, rho):
    if rho == 0.0:
        spec = KernelSpec("DI", args.n, {"c": args.c, "lam": args.lam})
    else:
        spec = KernelSpec("DC", args.n, {"c": args.c, "lam": args.lam, "rho": rho})
    problem = DesignProblem(spec, args.sigma2, args.n, args.N, args.energy, args.criterion)
    sol = solve(problem)
    v_dag = eval_criterion(problem, problem.r_dagger())
    chk = check_rdagger_optimality(problem)
    return {
        "rho": rho,
        "moved": float(np.max(np.abs(sol.r - problem.r_dagger()))),
        "improvement": v_dag - sol.value,
        "value": sol.value,
        "min_directional_derivative": float(np.min(chk["directional_derivatives"])),
        "stationary": int(chk["is_stationary"]),
        "gap": sol.certificate.gap,
    }


def main(argv=None) -> int:
    args = parse_args(argv)
    rhos = np.linspace(-args.rho_max, args.rho_max, args.steps)
    rows = [sweep_row(args, float(round(rho, 12))) for rho in rhos]
    out = sys.stdout if args.out == "-" else open(args.out, "w", newline="", encoding="utf-8")
    try:
        writer = csv.DictWriter(out, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
