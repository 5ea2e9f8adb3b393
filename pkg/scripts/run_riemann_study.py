"""Exact mean-square error of left-point Riemann sums, baseline h = g = 1.

The error at partition level l does not depend on the basis level L >= l;
for the Gaussian family it is 2^-(l+1).
"""

import argparse

from iterchaos.dist_moments import Model
from iterchaos.grid_basis import BasisSpec, Grid, StepFn
from iterchaos.stochastic_integral import IntegralSpec, double_integral, riemann_sum


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--families", default="gaussian,centered_exponential,rademacher")
    p.add_argument("--level", type=int, default=8)
    args = p.parse_args()

    grid = Grid(1.0, args.level)
    one = StepFn.constant(grid)
    print("family,basis_level,partition_level,sq_error,relative")
    for tag in args.families.split(","):
        spec = IntegralSpec(one, one, 1.0, BasisSpec(grid), Model.parse(tag))
        z = double_integral(spec)
        ez2 = z.second_moment()
        for l in range(1, args.level + 1):
            e = (riemann_sum(spec, Grid(1.0, l)) - z).second_moment()
            print(f"{tag},{args.level},{l},{e!r},{e / ez2!r}")


if __name__ == "__main__":
    main()
