"""Convergence table for lambda1 on the unit square and the unit disk.

    python scripts/eigen_convergence.py --resolutions 32,64,128,256
"""

import argparse
import math

from scipy import special

from perforated import assemble, build_grid, first_eigenpair, richardson, unit_ball, unit_square


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--resolutions", default="32,64,128,256")
    args = p.parse_args()
    resolutions = [int(r) for r in args.resolutions.split(",")]

    exact = {"square": 2 * math.pi**2, "disk": float(special.jn_zeros(0, 1)[0]) ** 2}
    domains = {"square": unit_square(), "disk": unit_ball(2)}
    order = {"square": 2, "disk": 1}
    for name, spec in domains.items():
        print(f"{name}: exact {exact[name]:.8f}")
        print(f"{'res':>6} {'lambda1':>14} {'rel err':>10} {'richardson':>14} {'rel err':>10}")
        prev = None
        for r in resolutions:
            lam = first_eigenpair(assemble(build_grid(spec, r)), tol=1e-10).lambda1
            row = f"{r:>6} {lam:>14.8f} {abs(lam - exact[name]) / exact[name]:>10.2e}"
            if prev is not None:
                ext = richardson(prev, lam, order[name])
                row += f" {ext:>14.8f} {abs(ext - exact[name]) / exact[name]:>10.2e}"
            print(row)
            prev = lam
        print()


if __name__ == "__main__":
    main()
