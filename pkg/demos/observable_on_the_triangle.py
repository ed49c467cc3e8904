"""Monte Carlo observable H on the equilateral triangle versus the conformal prediction.

For the triangle itself the conformal map is the identity, so H should
approach the face centroids (rescaled to the unit-side reference triangle).
The script prints the deviation on a few mesh sizes.

    python3 demos/observable_on_the_triangle.py [trials]
"""

import sys

import numpy as np

from mesoperc.conformal import predict_H
from mesoperc.lattices import triangle_domain
from mesoperc.percolation import estimate_H


def main(trials: int = 20_000) -> None:
    base = triangle_domain()
    for side in (4, 8, 16, 32):
        d = base.refined_side(side)
        h = predict_H(d, 0).faces
        H = estimate_H(d, trials, seed=3)
        dev = np.abs(H.H - h)
        print(f"side {2 * side:3d}: faces {len(dev):5d}  max|H-h| {dev.max():.4f}  "
              f"mean {dev.mean():.4f}  max half-width {H.half_width.max():.4f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 20_000)
