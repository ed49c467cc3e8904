"""Built-in periodic triangulations, marked planar domains and mesoscopic lattices."""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from typing import Optional, Sequence

import numpy as np

from .mesh import (
    Embedding,
    InvalidTriangulationError,
    Triangulation,
    face_beltrami,
    refine_with_parents,
    validate,
)

W60 = np.exp(1j * np.pi / 3)


# --------------------------------------------------------------------------
# periodic families


def regular_torus(m: int = 3):
    """Square lattice with north-east diagonals, ``m`` x ``m`` vertices per unit square."""
    idx = lambda x, y: (x % m) + m * (y % m)
    faces, shifts = [], []
    for y in range(m):
        for x in range(m):
            sx, sy = (x + 1) // m, (y + 1) // m
            faces.append((idx(x, y), idx(x + 1, y), idx(x + 1, y + 1)))
            shifts.append(((0, 0), (sx, 0), (sx, sy)))
            faces.append((idx(x, y), idx(x + 1, y + 1), idx(x, y + 1)))
            shifts.append(((0, 0), (sx, sy), (0, sy)))
    coords = np.array([(x / m, y / m) for y in range(m) for x in range(m)])
    t = Triangulation(np.array(faces), m * m, "torus")
    return t, Embedding(coords, np.eye(2), np.array(shifts))


def symmetric90_torus(m: int = 3):
    """Tetrakis square tiling: each of the ``m`` x ``m`` squares is split into 4 by its centre.

    The embedding is invariant under rotation by 90 degrees about any centre.
    """
    corner = lambda x, y: (x % m) + m * (y % m)
    centre = lambda x, y: m * m + x + m * y
    faces, shifts = [], []
    for y in range(m):
        for x in range(m):
            sx, sy = (x + 1) // m, (y + 1) // m
            c = centre(x, y)
            ring = [
                (corner(x, y), (0, 0)),
                (corner(x + 1, y), (sx, 0)),
                (corner(x + 1, y + 1), (sx, sy)),
                (corner(x, y + 1), (0, sy)),
            ]
            for k in range(4):
                (u, su), (v, sv) = ring[k], ring[(k + 1) % 4]
                faces.append((u, v, c))
                shifts.append((su, sv, (0, 0)))
    coords = [(x / m, y / m) for y in range(m) for x in range(m)]
    coords += [((x + 0.5) / m, (y + 0.5) / m) for y in range(m) for x in range(m)]
    t = Triangulation(np.array(faces), 2 * m * m, "torus")
    return t, Embedding(np.array(coords), np.eye(2), np.array(shifts))


def equilateral_torus(m: int = 3, k: int = 3):
    """Equilateral triangular lattice with periods 1 and (k/m) e^{i pi/3}; edge length 1/m."""
    idx = lambda x, y: (x % m) + m * (y % k)
    faces, shifts = [], []
    for y in range(k):
        for x in range(m):
            sx, sy = (x + 1) // m, (y + 1) // k
            # lattice directions 1 and e^{i pi/3}: up triangle (x,y),(x+1,y),(x,y+1)
            faces.append((idx(x, y), idx(x + 1, y), idx(x, y + 1)))
            shifts.append(((0, 0), (sx, 0), (0, sy)))
            faces.append((idx(x + 1, y), idx(x + 1, y + 1), idx(x, y + 1)))
            shifts.append(((sx, 0), (sx, sy), (0, sy)))
    w = W60
    coords = np.array([((x + y * w.real) / m, y * w.imag / m) for y in range(k) for x in range(m)])
    periods = np.array([[1.0, 0.0], [k / m * w.real, k / m * w.imag]])
    t = Triangulation(np.array(faces), m * k, "torus")
    return t, Embedding(coords, periods, np.array(shifts))


def k7_torus():
    """The 7-vertex triangulation of the torus (complete graph K7).

    Triangular lattice Z^2 (steps (1,0), (0,1), (1,1)) modulo the kernel of
    (x, y) -> x + 2y mod 7.
    """
    periods = np.array([[1.0, 3.0], [-2.0, 1.0]])
    coords = np.array([(v, 0.0) for v in range(7)])
    inv = np.linalg.inv(periods)
    faces, shifts = [], []
    for v in range(7):
        for steps in (((0, 0), (1, 0), (1, 1)), ((0, 0), (1, 1), (0, 1))):
            pos = np.array([(v + x, y) for x, y in steps], dtype=float)
            ids = [(v + x + 2 * y) % 7 for x, y in steps]
            faces.append(ids)
            shifts.append(np.rint((pos - coords[ids]) @ inv).astype(int))
    t = Triangulation(np.array(faces), 7, "torus")
    return t, Embedding(coords, periods, np.array(shifts))


def periodic_delaunay(points: np.ndarray):
    """Torus triangulation of points in the unit square (unit-square periods)."""
    from scipy.spatial import Delaunay

    pts = np.asarray(points, dtype=float) % 1.0
    n = len(pts)
    offs = np.array([(i, j) for j in (-1, 0, 1) for i in (-1, 0, 1)])
    tiled = (pts[None, :, :] + offs[:, None, :]).reshape(-1, 2)
    tri = Delaunay(tiled)
    simp = tri.simplices
    cen = tiled[simp].mean(axis=1)
    keep = np.all((cen >= 0) & (cen < 1), axis=1)
    simp = simp[keep]
    orbit = simp % n
    shift = offs[simp // n]
    corners = tiled[simp]
    area = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
    flip = area < 0
    orbit[flip] = orbit[flip][:, [0, 2, 1]]
    shift[flip] = shift[flip][:, [0, 2, 1]]
    t = Triangulation(orbit, n, "torus")
    return t, Embedding(pts, np.eye(2), shift)


def fig1_torus():
    """Asymmetric periodic triangulation shipped with the package (``data/fig1.mesh``)."""
    from .io import read_mesh

    text = resources.files("mesoperc.data").joinpath("fig1.mesh").read_text()
    t, e = read_mesh(text)
    return t, e.with_shifts(t)


BUILTIN_TORI = {
    "regular": regular_torus,
    "fig1": fig1_torus,
    "symmetric90": symmetric90_torus,
    "k7": k7_torus,
}


def builtin_torus(name: str):
    try:
        return BUILTIN_TORI[name]()
    except KeyError:
        raise KeyError(f"unknown lattice family {name!r}; choose from {sorted(BUILTIN_TORI)}") from None


# --------------------------------------------------------------------------
# marked planar domains


@dataclass(frozen=True, eq=False)
class MarkedDomain:
    """Disk triangulation with marked boundary vertices in counterclockwise order.

    Arcs are half-open: the arc from mark ``m_k`` to ``m_{k+1}`` contains
    ``m_k`` but not ``m_{k+1}``, so the arcs partition the boundary vertices.
    """

    triangulation: Triangulation
    embedding: Optional[Embedding]
    marks: tuple

    def __post_init__(self):
        t = self.triangulation
        if t.topology != "disk":
            raise InvalidTriangulationError("marked domains must be disks")
        marks = tuple(int(m) for m in self.marks)
        object.__setattr__(self, "marks", marks)
        if len(set(marks)) != len(marks):
            raise ValueError("marks must be distinct")
        pos = self._positions()
        rolled = np.roll(pos, -int(np.argmin(pos)))
        if not np.all(np.diff(rolled) > 0):
            raise ValueError("marks are not in counterclockwise boundary order")

    def _positions(self) -> np.ndarray:
        b = self.triangulation.boundary
        where = {int(v): k for k, v in enumerate(b)}
        try:
            return np.array([where[m] for m in self.marks])
        except KeyError as exc:
            raise ValueError(f"mark {exc.args[0]} is not a boundary vertex") from None

    def arcs(self) -> list[np.ndarray]:
        """Boundary vertex arcs ``[m_k, m_{k+1})`` for consecutive marks."""
        b = self.triangulation.boundary
        pos = self._positions()
        out = []
        for k in range(len(pos)):
            s, e = pos[k], pos[(k + 1) % len(pos)]
            idx = np.arange(s, e if e > s else e + len(b)) % len(b)
            out.append(b[idx])
        return out

    def closed_arc(self, k: int) -> np.ndarray:
        """Arc from mark k to mark k+1 including both ends."""
        b = self.triangulation.boundary
        pos = self._positions()
        s, e = pos[k], pos[(k + 1) % len(pos)]
        idx = np.arange(s, (e if e > s else e + len(b)) + 1) % len(b)
        return b[idx]

    def refined(self, n: int):
        """The marked domain on ``G^(n)`` (side ``2**n`` patches); marks keep their ids."""
        t, e, _ = refine_with_parents(self.triangulation, self.embedding, 2**n)
        return type(self)(t, e, self.marks)

    def refined_side(self, n_side: int):
        t, e, _ = refine_with_parents(self.triangulation, self.embedding, n_side)
        return type(self)(t, e, self.marks)


class MarkedRectangleDomain(MarkedDomain):
    """Four marks (a, b, c, d); crossings run between arcs ab and cd."""

    def __post_init__(self):
        if len(self.marks) != 4:
            raise ValueError("need four marks a, b, c, d")
        super().__post_init__()

    @property
    def a(self):
        return self.marks[0]


class MarkedTriangleDomain(MarkedDomain):
    """Three marks (a, b, c) for the separation observables."""

    def __post_init__(self):
        if len(self.marks) != 3:
            raise ValueError("need three marks a, b, c")
        super().__post_init__()


def _planar(faces, coords) -> tuple[Triangulation, Embedding]:
    faces = np.asarray(faces)
    coords = np.asarray(coords, dtype=complex)
    return Triangulation(faces, len(coords), "disk"), Embedding(np.stack([coords.real, coords.imag], 1))


def rhombus_domain() -> MarkedRectangleDomain:
    """Two equilateral triangles forming a 60-degree rhombus; marks at its corners.

    The reflection through the long diagonal swaps (a, b, c, d) -> (c, b, a, d),
    exchanging the arc pairs, so the modulus is 1.
    """
    z = [0, 1, 1 + W60, W60]
    t, e = _planar([(0, 1, 3), (1, 2, 3)], z)
    return MarkedRectangleDomain(t, e, (1, 2, 3, 0))


def parallelogram_domain(length: int = 2) -> MarkedRectangleDomain:
    """``length`` x 1 strip of equilateral triangles (60-degree parallelogram), corners marked."""
    z = [k for k in range(length + 1)] + [k + W60 for k in range(length + 1)]
    top = lambda k: length + 1 + k
    faces = []
    for k in range(length):
        faces.append((k, k + 1, top(k)))
        faces.append((k + 1, top(k + 1), top(k)))
    t, e = _planar(faces, z)
    return MarkedRectangleDomain(t, e, (length, top(length), top(0), 0))


def _zip_rows(lo: np.ndarray, up: np.ndarray, xlo: np.ndarray, xup: np.ndarray) -> list:
    """Triangulate the strip between two rows of vertices sorted by x."""
    faces, i, k = [], 0, 0
    while i < len(lo) - 1 or k < len(up) - 1:
        if k == len(up) - 1 or (i < len(lo) - 1 and xlo[i + 1] < xup[k + 1]):
            faces.append((lo[i], lo[i + 1], up[k]))
            i += 1
        else:
            faces.append((lo[i], up[k + 1], up[k]))
            k += 1
    return faces


def rectangle_lattice_domain(aspect: float, rows: int) -> MarkedRectangleDomain:
    """Regular triangular lattice filling the ``aspect`` x 1 rectangle, corners marked.

    Rows are horizontal with spacing ``1/rows``; odd rows are shifted by half
    an edge, so the left and right sides zigzag. Marks are (a, b, c, d) =
    (lower right, upper right, upper left, lower left): arc ab is the right
    side and arc cd the left side, so the continuum modulus is ``aspect``.
    """
    if rows < 1 or aspect <= 0:
        raise ValueError("need rows >= 1 and aspect > 0")
    h = 2 / (math.sqrt(3) * rows)
    nx = max(1, int(round(aspect / h)))
    z, ids = [], []
    for j in range(rows + 1):
        xs = np.arange(nx + 1) * h if j % 2 == 0 else (np.arange(nx) + 0.5) * h
        ids.append(np.arange(len(z), len(z) + len(xs)))
        z.extend(xs + 1j * j / rows)
    z = np.array(z)
    faces = []
    for j in range(rows):
        lo, up = ids[j], ids[j + 1]
        faces += _zip_rows(lo, up, z[lo].real, z[up].real)
    t, e = _planar(faces, z)
    top = ids[rows]
    return MarkedRectangleDomain(t, e, (int(ids[0][-1]), int(top[-1]), int(top[0]), int(ids[0][0])))


def triangle_domain() -> MarkedTriangleDomain:
    """Equilateral triangle with corners (1, tau, tau^2), subdivided once (6 vertices)."""
    tau = np.exp(2j * np.pi / 3)
    c = [1, tau, tau**2]
    z = c + [(c[0] + c[1]) / 2, (c[1] + c[2]) / 2, (c[2] + c[0]) / 2]
    faces = [(0, 3, 5), (3, 1, 4), (5, 4, 2), (3, 4, 5)]
    t, e = _planar(faces, z)
    return MarkedTriangleDomain(t, e, (0, 1, 2))


def triangle_lattice_domain(side: int) -> MarkedTriangleDomain:
    """Equilateral triangle (1, tau, tau^2) cut into side-``side`` lattice triangles, corners marked."""
    tau = np.exp(2j * np.pi / 3)
    t, e = _planar([(0, 1, 2)], [1, tau, tau**2])
    # a single face has a 3-vertex outer face; refine before marking
    t2, e2, _ = refine_with_parents(t, e, side)
    return MarkedTriangleDomain(t2, e2, (0, 1, 2))


def nearest_boundary_marks(t: Triangulation, e: Embedding, targets: Sequence[complex]) -> tuple:
    """Distinct boundary vertices nearest to each target point (in order)."""
    b = t.boundary
    z = e.coords[b, 0] + 1j * e.coords[b, 1]
    chosen = []
    for p in targets:
        d = np.abs(z - p)
        d[np.isin(b, chosen)] = np.inf
        chosen.append(int(b[np.argmin(d)]))
    return tuple(chosen)


# --------------------------------------------------------------------------
# lifts and mesoscopic lattices


def lift_faces(t: Triangulation, e: Embedding, picks: np.ndarray, scale: float = 1.0):
    """Planar triangulation formed by lifted copies of torus faces.

    ``picks`` is an (M, 3) integer array of (face, m, n): face ``face`` translated
    by ``m * p1 + n * p2``. Returns the planar triangulation, its embedding, and
    the lifted vertex keys (orbit vertex, m, n) of the planar vertices.
    """
    e = e.with_shifts(t)
    picks = np.asarray(picks, dtype=np.int64).reshape(-1, 3)
    f = picks[:, 0]
    orbit = t.faces[f]  # (M, 3)
    trans = picks[:, None, 1:] + e.shifts[f]  # (M, 3, 2)
    keys = np.concatenate([orbit[..., None], trans], axis=-1).reshape(-1, 3)
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    faces = inv.reshape(-1, 3)
    coords = scale * (e.coords[uniq[:, 0]] + uniq[:, 1:] @ e.periods)
    return Triangulation(faces, len(uniq), "disk"), Embedding(coords), uniq


def _tri_rect_overlap(tri: np.ndarray, rect: tuple, eps: float) -> np.ndarray:
    """Positive-area overlap of triangles (M, 3, 2) with an axis-aligned rectangle (SAT)."""
    x0, y0, x1, y1 = rect
    ok = (tri[..., 0].max(1) > x0 + eps) & (tri[..., 0].min(1) < x1 - eps)
    ok &= (tri[..., 1].max(1) > y0 + eps) & (tri[..., 1].min(1) < y1 - eps)
    box = np.array([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])
    for k in range(3):
        d = tri[:, (k + 1) % 3] - tri[:, k]
        nrm = np.stack([-d[:, 1], d[:, 0]], 1)
        tproj = np.einsum("mkd,md->mk", tri, nrm)
        bproj = box @ nrm.T  # (4, M)
        sep = (tproj.max(1) <= bproj.min(0) + eps) | (bproj.max(0) <= tproj.min(1) + eps)
        ok &= ~sep
    return ok


@dataclass(frozen=True, eq=False)
class MesoscopicLattice:
    """Refined periodic lattice ``T_{delta,N}`` cut to a window.

    ``cell[f]`` is the coarse (delta-scale) face containing fine face ``f``;
    ``cell_orbit[c]`` the torus face that coarse face ``c`` copies.
    """

    triangulation: Triangulation
    embedding: Embedding
    cell: np.ndarray
    delta: float
    N: int
    mu_cell: np.ndarray
    coarse: Triangulation
    coarse_embedding: Embedding
    cell_orbit: np.ndarray
    window: tuple

    @property
    def mu(self) -> np.ndarray:
        """Per fine face Beltrami coefficient (constant on cells)."""
        return self.mu_cell[self.cell]

    def coarse_domain(self, corners: Optional[Sequence[complex]] = None) -> MarkedRectangleDomain:
        """Coarse cell patch with marks nearest the window corners (a=SE, b=NE, c=NW, d=SW)."""
        x0, y0, x1, y1 = self.window
        corners = corners or [complex(x1, y0), complex(x1, y1), complex(x0, y1), complex(x0, y0)]
        marks = nearest_boundary_marks(self.coarse, self.coarse_embedding, corners)
        return MarkedRectangleDomain(self.coarse, self.coarse_embedding, marks)

    def domain(self, corners: Optional[Sequence[complex]] = None) -> MarkedRectangleDomain:
        """Fine marked domain; marks are the coarse corner vertices (ids are preserved)."""
        cd = self.coarse_domain(corners)
        return MarkedRectangleDomain(self.triangulation, self.embedding, cd.marks)


def _faces_around(t: Triangulation, e: Embedding, key) -> list:
    v, m, n = key
    out = []
    for f, k in zip(*np.nonzero(t.faces == v)):
        s = e.shifts[f, k]
        out.append((int(f), int(m - s[0]), int(n - s[1])))
    return out


def coarse_patch(t: Triangulation, e: Embedding, delta: float, window: tuple):
    """Delta-scaled lifted faces meeting the window, as a planar disk triangulation."""
    x0, y0, x1, y1 = map(float, window)
    if not (x1 > x0 and y1 > y0):
        raise ValueError("window must have positive width and height")
    e = e.with_shifts(t)
    P = delta * e.periods
    inv = np.linalg.inv(P)
    box = np.array([(x0, y0), (x1, y0), (x1, y1), (x0, y1)]) @ inv
    lo = np.floor(box.min(0)).astype(int) - 2
    hi = np.ceil(box.max(0)).astype(int) + 2
    mm, nn = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1), indexing="ij")
    trans = np.stack([mm.ravel(), nn.ravel()], 1)
    F = t.n_faces
    picks = np.concatenate(
        [np.repeat(np.arange(F), len(trans))[:, None], np.tile(trans, (F, 1))], axis=1
    )
    base = e.corners(t)  # (F, 3, 2)
    tri = delta * (base[picks[:, 0]] + (picks[:, None, 1:] @ e.periods))
    scale = delta * np.abs(e.periods).max()
    inside = _tri_rect_overlap(tri, (x0, y0, x1, y1), 1e-12 * scale)
    if not inside.any():
        raise ValueError("window too small to contain one cell")
    contained = np.all(
        (tri[..., 0] >= x0 - 1e-12) & (tri[..., 0] <= x1 + 1e-12)
        & (tri[..., 1] >= y0 - 1e-12) & (tri[..., 1] <= y1 + 1e-12), axis=1)
    if not contained.any():
        raise ValueError("window too small to contain one cell")
    chosen = {tuple(p) for p in picks[inside].tolist()}
    for _ in range(100):
        pt, pe, keys = lift_faces(t, e, np.array(sorted(chosen)), delta)
        bh = np.flatnonzero(pt.twin < 0)
        origins = pt.origin[bh]
        vals, counts = np.unique(origins, return_counts=True)
        pinched = vals[counts > 1]
        if not len(pinched) and pt.euler_characteristic() == 2:
            break
        extra = set()
        for v in pinched:
            extra.update(_faces_around(t, e, tuple(keys[v])))
        if not extra:
            raise InvalidTriangulationError("window patch is not a disk")
        chosen |= extra
    picks_sorted = np.array(sorted(chosen))
    pt, pe, keys = lift_faces(t, e, picks_sorted, delta)
    return pt, pe, picks_sorted[:, 0], keys


def build_mesoscopic(t: Triangulation, e: Embedding, delta: float, N: int, window: tuple) -> MesoscopicLattice:
    """Tile ``window`` by delta-scaled fundamental domains and refine every cell with side N.

    Cells meeting the window are kept whole.
    """
    if t.topology != "torus":
        raise InvalidTriangulationError("build_mesoscopic needs a torus triangulation")
    rep = validate(t, e)
    if not rep.ok:
        raise InvalidTriangulationError(str(rep))
    ct, ce, orbit, _ = coarse_patch(t, e, delta, window)
    rep = validate(ct, ce)
    if not rep.ok:
        raise InvalidTriangulationError(f"window patch invalid: {rep}")
    ft, fe, parents = refine_with_parents(ct, ce, N)
    return MesoscopicLattice(
        triangulation=ft,
        embedding=fe,
        cell=parents,
        delta=float(delta),
        N=int(N),
        mu_cell=face_beltrami(ct, ce),
        coarse=ct,
        coarse_embedding=ce,
        cell_orbit=orbit,
        window=tuple(map(float, window)),
    )
