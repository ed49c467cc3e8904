"""Regenerate ``src/mesoperc/data/fig1.mesh``.

Nine points on a jittered 3 x 3 grid (one pinned at the origin) are
triangulated by the periodic Delaunay construction. The resulting torus
triangulation has vertex degrees between 4 and 8 and no symmetry.
"""

from pathlib import Path

import numpy as np

from mesoperc.io import write_mesh
from mesoperc.lattices import periodic_delaunay
from mesoperc.mesh import validate


def fig1_points() -> np.ndarray:
    rng = np.random.default_rng(11)
    grid = np.array([(i / 3, j / 3) for j in range(3) for i in range(3)])
    for _ in range(24):
        pts = grid + rng.uniform(-0.12, 0.12, grid.shape)
    pts[0] = 0.0
    return np.round(pts % 1.0, 4)


if __name__ == "__main__":
    t, e = periodic_delaunay(fig1_points())
    report = validate(t, e)
    assert report.ok, report
    out = Path(__file__).resolve().parents[1] / "src" / "mesoperc" / "data" / "fig1.mesh"
    out.write_text("# asymmetric periodic triangulation of the unit torus\n" + write_mesh(t, e, with_shifts=True))
    print(f"wrote {out}: V={t.n_vertices} E={t.n_edges} F={t.n_faces}")
