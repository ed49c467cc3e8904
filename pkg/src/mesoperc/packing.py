"""Circle packings of triangulations: radii, layout, the map psi_N and torus periods.

Radii are found in log coordinates. Bulk-synchronous Collins–Stephenson
sweeps (uniform-neighbour model) bring the angle sums close to 2*pi, then a
damped Newton iteration on the sparse angle-sum Jacobian finishes the job.
Every accepted step is required not to increase the worst residual, so the
recorded residual history is monotone by construction.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import Embedding, Triangulation, refine

TWO_PI = 2.0 * math.pi
ANGLE_TOL = 1e-10
LAYOUT_TOL = 1e-8


class PackingError(ValueError):
    """Solver or layout failure; carries the worst residual seen."""

    def __init__(self, msg: str, residual: float = float("nan"), vertex: int = -1):
        super().__init__(f"{msg} (worst residual {residual:.3e} at vertex {vertex})")
        self.residual = residual
        self.vertex = vertex


@dataclass(frozen=True, eq=False)
class PackingProblem:
    """A triangulation plus its boundary condition.

    Disk problems prescribe the radii of the boundary vertices (in boundary
    order) and solve the interior; torus problems solve every vertex, with
    the overall scale fixed by vertex 0.
    """

    triangulation: Triangulation
    boundary_radii: Optional[np.ndarray] = None

    def __post_init__(self):
        t = self.triangulation
        if t.topology == "disk":
            if t.boundary is None or not len(t.boundary):
                raise ValueError("disk packing needs a boundary cycle")
            br = 1.0 if self.boundary_radii is None else self.boundary_radii
            br = np.broadcast_to(np.asarray(br, dtype=float), (len(t.boundary),)).copy()
            if (br <= 0).any():
                raise ValueError("boundary radii must be positive")
            object.__setattr__(self, "boundary_radii", br)
        elif self.boundary_radii is not None:
            raise ValueError("a torus packing has no boundary radii")

    @property
    def solved(self) -> np.ndarray:
        """Mask of the vertices whose angle sum must be 2*pi."""
        t = self.triangulation
        m = np.ones(t.n_vertices, dtype=bool)
        if t.topology == "disk":
            m[t.boundary] = False
        return m

    def initial_radii(self) -> np.ndarray:
        t = self.triangulation
        if t.topology == "torus":
            return np.ones(t.n_vertices)
        r = np.full(t.n_vertices, float(np.mean(self.boundary_radii)))
        r[t.boundary] = self.boundary_radii
        return r


def face_angles(t: Triangulation, radii: np.ndarray) -> np.ndarray:
    """(F, 3) angle at each corner of each face in the tangency triangle.

    Uses tan(a_i / 2) = sqrt(r_j r_k / (r_i (r_i + r_j + r_k))), which is
    accurate for all radius ratios.
    """
    r = radii[t.faces]
    ri, rj, rk = r[:, 0], r[:, 1], r[:, 2]
    s = ri + rj + rk
    a0 = 2.0 * np.arctan2(np.sqrt(rj * rk), np.sqrt(ri * s))
    a1 = 2.0 * np.arctan2(np.sqrt(rk * ri), np.sqrt(rj * s))
    a2 = 2.0 * np.arctan2(np.sqrt(ri * rj), np.sqrt(rk * s))
    return np.stack([a0, a1, a2], axis=1)


def angle_sums(t: Triangulation, radii: np.ndarray) -> np.ndarray:
    return np.bincount(t.faces.reshape(-1), weights=face_angles(t, radii).reshape(-1), minlength=t.n_vertices)


def _residual(t, radii, solved) -> np.ndarray:
    return np.where(solved, angle_sums(t, radii) - TWO_PI, 0.0)


def _jacobian(t: Triangulation, radii: np.ndarray) -> sp.csr_matrix:
    """d(angle sum)/d(log r) as a sparse matrix."""
    f = t.faces
    r = radii[f]
    s = r.sum(axis=1, keepdims=True)
    half_sin = 0.5 * np.sin(face_angles(t, radii))  # (F, 3)
    rows, cols, vals = [], [], []
    for i in range(3):
        for m in range(3):
            rows.append(f[:, i])
            cols.append(f[:, m])
            if m == i:
                vals.append(-half_sin[:, i] * (1.0 + r[:, i] / s[:, 0]))
            else:
                vals.append(half_sin[:, i] * (1.0 - r[:, m] / s[:, 0]))
    n = t.n_vertices
    return sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)).tocsr()


@dataclass(frozen=True)
class RadiiResult:
    radii: np.ndarray
    residual: float
    history: np.ndarray  # worst residual after every accepted sweep or step
    sweeps: int
    newton_steps: int


def _cs_proposal(t, radii, solved, deg):
    theta = angle_sums(t, radii)
    k = deg.astype(float)
    beta = np.sin(theta / (2.0 * k))
    delta = np.sin(math.pi / k)
    rhat = radii * beta / (1.0 - beta)
    new = rhat * (1.0 - delta) / delta
    return np.where(solved, new, radii)


def _accept(t, x_old, x_new, solved, current, max_halvings=40):
    """Largest step fraction 2^-m from x_old toward x_new that does not raise the worst residual."""
    lam = 1.0
    for _ in range(max_halvings):
        x = x_old + lam * (x_new - x_old)
        res = float(np.abs(_residual(t, np.exp(x), solved)).max())
        if res <= current:
            return x, res
        lam *= 0.5
    return None, current


def solve_radii(problem: PackingProblem, tol: float = ANGLE_TOL, max_iter: int = 500,
                cs_sweeps: int = 200, switch: float = 1e-3) -> RadiiResult:
    """Radii whose angle sums are 2*pi at every solved vertex.

    At most ``cs_sweeps`` Collins–Stephenson sweeps run until the worst
    residual drops below ``switch``; Newton steps follow. ``max_iter`` bounds
    the total number of accepted sweeps and steps.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    t = problem.triangulation
    solved = problem.solved
    deg = np.bincount(t.faces.reshape(-1), minlength=t.n_vertices)
    x = np.log(problem.initial_radii())
    res = float(np.abs(_residual(t, np.exp(x), solved)).max())
    hist = [res]
    sweeps = steps = 0
    free = np.flatnonzero(solved)
    if t.topology == "torus":
        free = free[1:]  # scale is fixed by vertex 0
    while res > tol and sweeps + steps < max_iter:
        if sweeps < cs_sweeps and res > switch:
            x_new, new_res = _accept(t, x, np.log(_cs_proposal(t, np.exp(x), solved, deg)), solved, res)
            if x_new is None:
                cs_sweeps = sweeps  # stalled: hand over to Newton
                continue
            sweeps += 1
        else:
            r = np.exp(x)
            F = _residual(t, r, solved)
            J = _jacobian(t, r)[free][:, free].tocsc()
            try:
                dx = spla.spsolve(J, -F[free])
            except RuntimeError as exc:  # singular factorization
                raise PackingError(f"Newton system singular: {exc}", res) from None
            step = x.copy()
            step[free] += dx
            x_new, new_res = _accept(t, x, step, solved, res)
            if x_new is None:
                v = int(np.argmax(np.abs(_residual(t, np.exp(x), solved))))
                raise PackingError("Newton step could not reduce the residual", res, v)
            steps += 1
        x, res = x_new, new_res
        hist.append(res)
    if res > tol:
        v = int(np.argmax(np.abs(_residual(t, np.exp(x), solved))))
        raise PackingError(f"no convergence in {max_iter} iterations", res, v)
    if t.topology == "torus":
        x = x - x.mean()
    return RadiiResult(np.exp(x), res, np.array(hist), sweeps, steps)


# --------------------------------------------------------------------------
# layout


@dataclass(frozen=True, eq=False)
class CirclePacking:
    """Radii and centres.

    ``face_centers[f, k]`` is the centre of corner ``k`` of face ``f`` in the
    layout; on a torus these are lifted copies differing by the image periods
    ``omega``, and ``centers`` holds one representative per vertex.
    """

    radii: np.ndarray
    centers: np.ndarray
    face_centers: np.ndarray
    closure_gap: float
    pins: tuple = ()
    omega: Optional[np.ndarray] = None
    tau: Optional[complex] = None
    meta: dict = field(default_factory=dict)

    def tangency_error(self, t: Triangulation) -> float:
        fc = self.face_centers
        r = self.radii[t.faces]
        err = 0.0
        for k in range(3):
            d = np.abs(fc[:, (k + 1) % 3] - fc[:, k])
            err = max(err, float(np.abs(d - r[:, k] - r[:, (k + 1) % 3]).max()))
        return err

    def max_overlap(self, t: Triangulation) -> float:
        """Largest overlap depth between non-adjacent circles (0 if interiors are disjoint).

        Only meaningful for disk layouts, where ``centers`` is a single sheet.
        """
        from scipy.spatial import cKDTree

        z = self.centers
        pts = np.column_stack([z.real, z.imag])
        tree = cKDTree(pts)
        rmax = float(self.radii.max())
        adj = {tuple(e) for e in t.edges.tolist()}
        worst = 0.0
        for i, j in tree.query_pairs(2 * rmax):
            if (min(i, j), max(i, j)) in adj:
                continue
            depth = self.radii[i] + self.radii[j] - abs(z[i] - z[j])
            worst = max(worst, depth)
        return worst

    def to_json(self) -> dict:
        doc = {
            "vertices": [
                {"id": v, "radius": float(r), "center": [float(c.real), float(c.imag)]}
                for v, (r, c) in enumerate(zip(self.radii, self.centers))
            ],
            "closure_gap": self.closure_gap,
            "pins": list(self.pins),
        }
        if self.tau is not None:
            doc["tau"] = [float(self.tau.real), float(self.tau.imag)]
            doc["omega"] = [[float(w.real), float(w.imag)] for w in self.omega]
        return doc


def _third(cu, cw, ru, rw, rt):
    """Centre of the circle tangent to u and w, left of the directed line u -> w."""
    s = ru + rw + rt
    a = 2.0 * math.atan2(math.sqrt(rw * rt), math.sqrt(ru * s))
    d = cw - cu
    return cu + (ru + rt) * (d / abs(d)) * complex(math.cos(a), math.sin(a))


def _bfs_faces(t: Triangulation, radii: np.ndarray, f0: int):
    """Face-local centres, placing faces in breadth-first order across edges."""
    F = t.n_faces
    faces = t.faces
    nb = t.face_neighbors
    fc = np.full((F, 3), np.nan + 0j)
    r = radii
    a, b, c = faces[f0]
    fc[f0, 0] = 0.0
    fc[f0, 1] = r[a] + r[b]
    fc[f0, 2] = _third(fc[f0, 0], fc[f0, 1], r[a], r[b], r[c])
    seen = np.zeros(F, dtype=bool)
    seen[f0] = True
    tree = []  # (parent, corner in parent, child, corner in child) of a shared vertex
    q = deque([f0])
    while q:
        f = q.popleft()
        for k in range(3):
            g = nb[f, k]
            if g < 0 or seen[g]:
                continue
            u, w = faces[f, k], faces[f, (k + 1) % 3]
            # in g the shared edge runs w -> u
            l = int(np.flatnonzero(faces[g] == w)[0])
            cu, cw = fc[f, k], fc[f, (k + 1) % 3]
            fc[g, l] = cw
            fc[g, (l + 1) % 3] = cu
            tv = faces[g, (l + 2) % 3]
            fc[g, (l + 2) % 3] = _third(cw, cu, r[w], r[u], r[tv])
            seen[g] = True
            tree.append((f, k, g, (l + 1) % 3))
            q.append(g)
    if not seen.all():
        raise PackingError("triangulation is not connected across faces")
    return fc, tree


def _find_pins(t: Triangulation, e: Optional[Embedding]) -> tuple:
    if e is None:
        return ()
    z = e.coords[:, 0] + 1j * e.coords[:, 1]
    zero = np.flatnonzero(np.abs(z) < 1e-12)
    one = np.flatnonzero(np.abs(z - 1) < 1e-12)
    if len(zero) and (len(one) or e.periods is not None):
        return (int(zero[0]), int(one[0]) if len(one) else -1)
    return ()


def layout(t: Triangulation, radii: np.ndarray, embedding: Optional[Embedding] = None,
           normalize: bool = True, tol: float = LAYOUT_TOL) -> CirclePacking:
    """Place the circles by a breadth-first walk over faces.

    With an ``embedding`` and ``normalize``, the vertices embedded at 0 and 1
    are pinned to 0 and 1 (on a torus, the image of the first period is
    scaled to 1). Without pins the first face is placed with its first corner
    at the origin and its first edge along the positive real axis.
    Raises when the walk closes up with a gap above ``tol`` times the sum of
    radii.
    """
    radii = np.asarray(radii, dtype=float)
    if len(radii) != t.n_vertices or (radii <= 0).any():
        raise ValueError("need one positive radius per vertex")
    pins = _find_pins(t, embedding) if normalize else ()
    f0 = 0
    if pins:
        f0 = int(np.flatnonzero((t.faces == pins[0]).any(axis=1))[0])
    fc, tree = _bfs_faces(t, radii, f0)
    scale = tol * float(radii.sum())
    faces = t.faces
    omega = tau = None
    if t.topology == "torus":
        if embedding is None:
            raise ValueError("torus layout needs the source embedding for its period shifts")
        sh = embedding.with_shifts(t).shifts.copy()  # (F, 3, 2) corner shifts
        # move each face's source lift onto the sheet the walk placed it in
        for f, k, g, l in tree:
            sh[g] += sh[f, k] - sh[g, l]
        fc, centers, omega, gap = _fit_periods(t, fc, sh)
    else:
        centers = np.full(t.n_vertices, np.nan + 0j)
        centers[faces[:, 0]] = fc[:, 0]
        centers[faces[:, 1]] = fc[:, 1]
        centers[faces[:, 2]] = fc[:, 2]
        gap = float(np.abs(fc - centers[faces]).max())
    if gap > scale:
        raise PackingError("layout does not close up", gap)
    if pins:
        z0 = centers[pins[0]]
        z1 = omega[0] + z0 if (pins[1] < 0 and omega is not None) else centers[pins[1]]
        a = 1.0 / (z1 - z0)
        centers = (centers - z0) * a
        fc = (fc - z0) * a
        radii = radii * abs(a)
        if omega is not None:
            omega = omega * a
    if omega is not None:
        tau = complex(omega[1] / omega[0])
    return CirclePacking(radii, centers, fc, gap, pins, omega, tau)


def _fit_periods(t: Triangulation, fc: np.ndarray, shifts: np.ndarray):
    """Least-squares image periods from all face corners of each vertex.

    Corner (f, k) of vertex v satisfies fc[f, k] = c_v + s_fk . omega.
    """
    faces = t.faces
    F = t.n_faces
    V = t.n_vertices
    v = faces.reshape(-1)
    s = shifts.reshape(-1, 2).astype(float)
    z = fc.reshape(-1)
    # unknowns: c_0..c_{V-1}, omega_1, omega_2 (complex; real system solved per part)
    A = sp.hstack([sp.csr_matrix((np.ones(3 * F), (np.arange(3 * F), v)), shape=(3 * F, V)),
                   sp.csr_matrix(s)]).tocsr()
    sol_re = spla.lsqr(A, z.real, atol=1e-15, btol=1e-15, iter_lim=20000)[0]
    sol_im = spla.lsqr(A, z.imag, atol=1e-15, btol=1e-15, iter_lim=20000)[0]
    sol = sol_re + 1j * sol_im
    centers = sol[:V]
    omega = sol[V:]
    gap = float(np.abs(A @ sol_re + 1j * (A @ sol_im) - z).max())
    return fc, centers, omega, gap


# --------------------------------------------------------------------------
# the piecewise-linear map psi_N


@dataclass(frozen=True, eq=False)
class PiecewiseLinearMap:
    """Affine on each source face, sending source corners to image corners."""

    source: np.ndarray  # (F, 3) complex, lifted
    image: np.ndarray  # (F, 3) complex
    periods: Optional[np.ndarray] = None  # source periods as complex pair
    omega: Optional[np.ndarray] = None  # image periods

    def _locate(self, z: complex):
        s = self.source
        a, b, c = s[:, 0], s[:, 1], s[:, 2]
        det = ((b - a).conjugate() * (c - a)).imag
        l1 = ((z - a).conjugate() * (c - a)).imag / det
        l2 = ((b - a).conjugate() * (z - a)).imag / det
        l0 = 1.0 - l1 - l2
        eps = -1e-12
        hit = np.flatnonzero((l0 >= eps) & (l1 >= eps) & (l2 >= eps))
        if not len(hit):
            return None
        f = int(hit[0])
        return f, np.array([l0[f], l1[f], l2[f]])

    def __call__(self, z) -> np.ndarray:
        zs = np.atleast_1d(np.asarray(z, dtype=complex))
        out = np.empty(zs.shape, dtype=complex)
        for i, q in enumerate(zs.reshape(-1)):
            out.reshape(-1)[i] = self._eval_one(complex(q))
        return out if np.ndim(z) else out[0]

    def _eval_one(self, q: complex) -> complex:
        hit = self._locate(q)
        if hit is not None:
            f, lam = hit
            return complex(lam @ self.image[f])
        if self.periods is not None:
            P = np.array([[self.periods[0].real, self.periods[1].real], [self.periods[0].imag, self.periods[1].imag]])
            lo = self.source.reshape(-1)
            base = np.linalg.solve(P, [q.real - lo.real.mean(), q.imag - lo.imag.mean()])
            m0, n0 = np.rint(base).astype(int)
            for dm in (0, -1, 1, -2, 2):
                for dn in (0, -1, 1, -2, 2):
                    m, n = m0 + dm, n0 + dn
                    hit = self._locate(q - m * self.periods[0] - n * self.periods[1])
                    if hit is not None:
                        f, lam = hit
                        return complex(lam @ self.image[f]) + m * self.omega[0] + n * self.omega[1]
        raise ValueError("query point outside the embedded domain")


def psi_map(cp: CirclePacking, t: Triangulation, e: Embedding) -> PiecewiseLinearMap:
    """psi_N: affine on each source face, vertices to their circle centres."""
    src = e.complex_corners(t)
    if e.periods is None:
        return PiecewiseLinearMap(src, cp.face_centers)
    per = e.periods[:, 0] + 1j * e.periods[:, 1]
    # the layout may place a face on another sheet than its source lift; shift it back
    w = cp.omega
    W = np.array([[w[0].real, w[1].real], [w[0].imag, w[1].imag]])
    d = cp.face_centers - cp.centers[t.faces]
    s_img = np.rint(np.linalg.solve(W, np.stack([d.real.reshape(-1), d.imag.reshape(-1)]))).T.reshape(-1, 3, 2)
    s_src = e.with_shifts(t).shifts
    off = (s_img - s_src)[:, 0, :]
    image = cp.face_centers - (off[:, 0] * w[0] + off[:, 1] * w[1])[:, None]
    return PiecewiseLinearMap(src, image, per, cp.omega)


# --------------------------------------------------------------------------
# tori


def pack(t: Triangulation, e: Optional[Embedding] = None, boundary_radii=None, tol: float = ANGLE_TOL,
         max_iter: int = 500) -> tuple[CirclePacking, RadiiResult]:
    """Solve radii and lay out in one call."""
    prob = PackingProblem(t, boundary_radii if t.topology == "disk" else None)
    res = solve_radii(prob, tol, max_iter)
    return layout(t, res.radii, e), res


def torus_period(t: Triangulation, e: Embedding, N: int = 1, tol: float = ANGLE_TOL) -> complex:
    """Period ratio of the packing of the side-``N`` refinement of a torus.

    The packed torus has image periods omega_1, omega_2 for the source
    periods; the estimate is omega_2 / omega_1 (for unit-square source
    periods this is the tau_G with phi(z + x + iy) = phi(z) + x + tau y).
    """
    if t.topology != "torus":
        raise ValueError("torus_period needs a torus triangulation")
    tN, eN = refine(t, e, int(N))
    cp, _ = pack(tN, eN, tol=tol)
    tau = cp.tau
    if tau.imag <= 0:
        raise PackingError("packing reversed orientation", abs(tau.imag))
    return tau


def period_sequence(t: Triangulation, e: Embedding, Ns: Sequence[int], tol: float = ANGLE_TOL) -> np.ndarray:
    return np.array([torus_period(t, e, N, tol) for N in Ns])
