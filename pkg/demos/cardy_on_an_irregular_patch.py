"""Crossing probability of a patch of an irregular lattice against Cardy's formula.

The nine-face patch of the ``fig1`` torus is a marked quadrilateral. Its
conformal modulus is computed on successive subdivisions; the crossing
probability of the finest subdivision is then compared with the formula.

    python3 demos/cardy_on_an_irregular_patch.py [trials]
"""

import sys

from mesoperc.conformal import cardy, modulus_sequence
from mesoperc.lattices import build_mesoscopic, builtin_torus
from mesoperc.percolation import CrossingSpec, crossing_probability

WINDOW = (0.0, 0.0, 0.05, 0.05)


def main(trials: int = 20_000, level: int = 6) -> None:
    t, e = builtin_torus("fig1")
    patch = build_mesoscopic(t, e, 0.125, 1, WINDOW).coarse_domain()
    print(f"patch: {patch.triangulation.n_faces} faces, marks {patch.marks}")

    rho = modulus_sequence(patch, range(level + 1))
    for n, r in rho.items():
        print(f"  level {n}: rho = {r:.5f}")

    fine = patch.refined(level)
    est = crossing_probability(fine.triangulation, CrossingSpec.from_domain(fine), trials, seed=7)
    lo, hi = est.interval
    print(f"crossing on {fine.triangulation.n_vertices} vertices: {est.estimate:.4f} [{lo:.4f}, {hi:.4f}]")
    print(f"Cardy at rho = {rho[level]:.5f}: {cardy(rho[level]):.4f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 20_000)
