"""Triangulations of the torus and of planar disks.

Combinatorics live in :class:`Triangulation` (faces as counterclockwise vertex
triples, half-edge links derived lazily); geometry lives in :class:`Embedding`.
Torus embeddings carry two period vectors and, per face corner, the integer
lattice shift that lifts the face to a genuine plane triangle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

TAU = np.exp(2j * np.pi / 3)

# relative area threshold below which a face counts as degenerate
DEGENERACY_TOL = 1e-12


class DegenerateFaceError(ValueError):
    pass


class InvalidTriangulationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Triangulation:
    """Combinatorial triangulation of a torus or of a disk.

    Parameters
    ----------
    faces : (F, 3) int array
        Inner faces, each listed counterclockwise.
    n_vertices : int
    topology : {"torus", "disk"}
    boundary : int array, optional
        For disks, the outer face as a counterclockwise vertex cycle. Derived
        from the faces when omitted.
    """

    faces: np.ndarray
    n_vertices: int
    topology: str = "disk"
    boundary: Optional[np.ndarray] = None

    def __post_init__(self):
        faces = np.ascontiguousarray(np.asarray(self.faces, dtype=np.int64).reshape(-1, 3))
        object.__setattr__(self, "faces", faces)
        if self.topology not in ("torus", "disk"):
            raise ValueError(f"unknown topology {self.topology!r}")
        if self.topology == "disk" and self.boundary is None:
            object.__setattr__(self, "boundary", _trace_boundary(faces))
        elif self.boundary is not None:
            object.__setattr__(self, "boundary", np.asarray(self.boundary, dtype=np.int64))

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    # --- half-edge structure -------------------------------------------------
    # halfedge h = 3 * f + k runs from faces[f, k] to faces[f, (k + 1) % 3]

    @cached_property
    def origin(self) -> np.ndarray:
        return self.faces.reshape(-1)

    @cached_property
    def target(self) -> np.ndarray:
        return self.faces[:, [1, 2, 0]].reshape(-1)

    @cached_property
    def next(self) -> np.ndarray:
        h = np.arange(3 * self.n_faces)
        return 3 * (h // 3) + (h % 3 + 1) % 3

    @cached_property
    def twin(self) -> np.ndarray:
        """Opposite half-edge, or -1 on the boundary."""
        n = max(self.n_vertices, 1)
        key = self.origin * n + self.target
        rev = self.target * n + self.origin
        order = np.argsort(key, kind="stable")
        pos = np.searchsorted(key[order], rev)
        pos = np.minimum(pos, len(key) - 1)
        found = key[order][pos] == rev
        return np.where(found, order[pos], -1)

    @cached_property
    def edges(self) -> np.ndarray:
        """Undirected edges as sorted (u, v) pairs, in a fixed canonical order."""
        e = np.sort(np.stack([self.origin, self.target], axis=1), axis=1)
        return np.unique(e, axis=0)

    @cached_property
    def halfedge_edge(self) -> np.ndarray:
        """Index into :attr:`edges` for every half-edge."""
        n = max(self.n_vertices, 1)
        lo = np.minimum(self.origin, self.target)
        hi = np.maximum(self.origin, self.target)
        keys = self.edges[:, 0] * n + self.edges[:, 1]
        return np.searchsorted(keys, lo * n + hi)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def degree(self) -> np.ndarray:
        return np.bincount(self.edges.reshape(-1), minlength=self.n_vertices)

    @cached_property
    def adjacency(self):
        """Vertex adjacency as a CSR matrix (symmetric, unit entries)."""
        from scipy import sparse

        e = self.edges
        data = np.ones(2 * len(e), dtype=np.int8)
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        m = sparse.csr_matrix((data, (rows, cols)), shape=(self.n_vertices,) * 2)
        m.sort_indices()
        return m

    @cached_property
    def face_neighbors(self) -> np.ndarray:
        """(F, 3) face across edge k of each face (edge k runs from corner k to k+1), -1 if none."""
        tw = self.twin.reshape(-1, 3)
        return np.where(tw >= 0, tw // 3, -1)

    def euler_characteristic(self) -> int:
        outer = 1 if self.topology == "disk" else 0
        return self.n_vertices - self.n_edges + self.n_faces + outer

    def boundary_vertices(self) -> np.ndarray:
        if self.boundary is None:
            return np.zeros(0, dtype=np.int64)
        return self.boundary


def _trace_boundary(faces: np.ndarray) -> np.ndarray:
    """Counterclockwise outer cycle from the unmatched half-edges of `faces`."""
    if len(faces) == 0:
        return np.zeros(0, dtype=np.int64)
    orig = faces.reshape(-1)
    targ = faces[:, [1, 2, 0]].reshape(-1)
    pairs = set(zip(orig.tolist(), targ.tolist()))
    succ: dict[int, list[int]] = {}
    for u, v in pairs:
        if (v, u) not in pairs:
            succ.setdefault(u, []).append(v)
    if not succ:
        return np.zeros(0, dtype=np.int64)
    if any(len(s) > 1 for s in succ.values()):
        # pinched boundary; reported by validate()
        return np.array(sorted(succ), dtype=np.int64)
    start = min(succ)
    cycle = [start]
    v = succ[start][0]
    while v != start:
        cycle.append(v)
        if v not in succ or len(cycle) > len(succ):
            break
        v = succ[v][0]
    return np.array(cycle, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class Embedding:
    """Straight-line embedding.

    For a torus, ``periods`` holds the two period vectors as rows and
    ``shifts[f, k]`` the integer combination of periods to add to the stored
    coordinate of corner ``k`` of face ``f``. When ``shifts`` is omitted it is
    reconstructed by the minimal-image rule (see :func:`lift_shifts`).
    """

    coords: np.ndarray
    periods: Optional[np.ndarray] = None
    shifts: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "coords", np.asarray(self.coords, dtype=float).reshape(-1, 2))
        if self.periods is not None:
            object.__setattr__(self, "periods", np.asarray(self.periods, dtype=float).reshape(2, 2))
        if self.shifts is not None:
            object.__setattr__(self, "shifts", np.asarray(self.shifts, dtype=np.int64))

    @property
    def is_periodic(self) -> bool:
        return self.periods is not None

    def corners(self, t: Triangulation) -> np.ndarray:
        """(F, 3, 2) plane coordinates of each face's corners, lifted on the torus."""
        c = self.coords[t.faces]
        if self.periods is None:
            return c
        shifts = self.shifts if self.shifts is not None else lift_shifts(t, self.coords, self.periods)
        return c + shifts @ self.periods

    def complex_corners(self, t: Triangulation) -> np.ndarray:
        c = self.corners(t)
        return c[..., 0] + 1j * c[..., 1]

    def with_shifts(self, t: Triangulation) -> "Embedding":
        if self.periods is None or self.shifts is not None:
            return self
        return Embedding(self.coords, self.periods, lift_shifts(t, self.coords, self.periods))


def lift_shifts(t: Triangulation, coords: np.ndarray, periods: np.ndarray) -> np.ndarray:
    """Minimal-image period shifts for each face corner, relative to corner 0."""
    p = coords[t.faces]
    shifts = np.zeros(t.faces.shape + (2,), dtype=np.int64)
    cand = np.array([(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)])
    offsets = cand @ periods
    for k in (1, 2):
        d = p[:, k, None, :] + offsets[None] - p[:, 0, None, :]
        best = np.argmin((d**2).sum(-1), axis=1)
        shifts[:, k] = cand[best]
    return shifts


def wrap(coords: np.ndarray, periods: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reduce points into the fundamental parallelogram; return (reduced, integer shift)."""
    inv = np.linalg.inv(periods)
    lam = coords @ inv
    n = np.floor(lam + 1e-9).astype(np.int64)
    return coords - n @ periods, n


def signed_areas(corners: np.ndarray) -> np.ndarray:
    a, b, c = corners[:, 0], corners[:, 1], corners[:, 2]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


# --------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def add(self, msg: str) -> None:
        self.violations.append(msg)

    def __str__(self) -> str:
        return "valid" if self.ok else "; ".join(self.violations)


def validate(t: Triangulation, e: Optional[Embedding] = None) -> ValidationReport:
    """Check every structural invariant; violations are collected, never raised."""
    rep = ValidationReport()
    f = t.faces
    if len(f) == 0:
        rep.add("no faces")
        return rep
    if f.min() < 0 or f.max() >= t.n_vertices:
        rep.add("face references unknown vertex")
        return rep
    if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
        rep.add("loop: face repeats a vertex")
    directed = t.origin * t.n_vertices + t.target
    if len(np.unique(directed)) != len(directed):
        rep.add("not simple or inconsistently oriented: repeated directed edge")
    unmatched = int((t.twin < 0).sum())
    if t.topology == "torus" and unmatched:
        rep.add(f"torus has {unmatched} unmatched half-edges")
    used = np.zeros(t.n_vertices, dtype=bool)
    used[f.reshape(-1)] = True
    if not used.all():
        rep.add(f"{int((~used).sum())} isolated vertices")
    expected = 0 if t.topology == "torus" else 2
    chi = t.euler_characteristic()
    if chi != expected:
        rep.add(f"Euler characteristic {chi} != {expected}")
    if t.topology == "disk":
        _check_disk_boundary(t, rep)
    if e is not None:
        _check_embedding(t, e, rep)
    return rep


def _check_disk_boundary(t: Triangulation, rep: ValidationReport) -> None:
    b = t.boundary
    bh = np.flatnonzero(t.twin < 0)
    origins = t.origin[bh]
    if len(np.unique(origins)) != len(origins):
        rep.add("boundary is not a simple cycle (pinched vertex)")
        return
    if len(b) != len(bh):
        rep.add("boundary is not a single cycle")
        return
    if len(b) < 4:
        rep.add(f"outer face < 4 vertices ({len(b)})")


def _check_embedding(t: Triangulation, e: Embedding, rep: ValidationReport) -> None:
    if len(e.coords) != t.n_vertices:
        rep.add("embedding size does not match vertex count")
        return
    corners = e.corners(t)
    area = signed_areas(corners)
    d = corners - corners[:, [1, 2, 0]]
    longest = np.sqrt((d**2).sum(-1)).max(axis=1)
    degenerate = np.abs(area) < DEGENERACY_TOL * longest**2
    if degenerate.any():
        rep.add(f"degenerate face ({int(degenerate.sum())})")
    if np.any((area < 0) & ~degenerate):
        rep.add(f"negative face orientation ({int(((area < 0) & ~degenerate).sum())})")
    if e.periods is not None:
        # each edge must be the same plane vector seen from both incident faces
        vec = (corners[:, [1, 2, 0]] - corners).reshape(-1, 2)
        tw = t.twin
        has = tw >= 0
        mismatch = np.abs(vec[has] + vec[tw[has]]).max() if has.any() else 0.0
        if mismatch > 1e-9 * max(1.0, np.abs(e.periods).max()):
            rep.add("torus embedding does not lift consistently")


# --------------------------------------------------------------------------
# Beltrami coefficient


def beltrami(a: complex, b: complex, c: complex) -> complex:
    """Beltrami coefficient of the real-linear map sending triangle (a, b, c) to an equilateral one.

    Corners must be given counterclockwise. Raises :class:`DegenerateFaceError`
    for (nearly) collinear input.
    """
    a, b, c = complex(a), complex(b), complex(c)
    area = 0.5 * ((b - a).conjugate() * (c - a)).imag
    longest = max(abs(b - a), abs(c - b), abs(a - c))
    if abs(area) < DEGENERACY_TOL * longest**2 or longest == 0:
        raise DegenerateFaceError("collinear triangle")
    if area < 0:
        raise DegenerateFaceError("triangle is clockwise")
    tau, tau2 = TAU, TAU * TAU
    num = a + tau * b + tau2 * c
    den = a.conjugate() + tau * b.conjugate() + tau2 * c.conjugate()
    return -num / den


def face_beltrami(t: Triangulation, e: Embedding) -> np.ndarray:
    """Vectorised :func:`beltrami` over all faces."""
    z = e.complex_corners(t)
    num = z[:, 0] + TAU * z[:, 1] + TAU**2 * z[:, 2]
    zc = np.conj(z)
    den = zc[:, 0] + TAU * zc[:, 1] + TAU**2 * zc[:, 2]
    return -num / den


# --------------------------------------------------------------------------
# refinement


@dataclass(frozen=True)
class _Patch:
    """Index bookkeeping for the side-n triangular patch, points (i, j) with i + j <= n."""

    n: int
    ij: np.ndarray  # (P, 2)
    tris: np.ndarray  # (n*n, 3) local point indices, counterclockwise

    @classmethod
    def build(cls, n: int) -> "_Patch":
        ij = np.array([(i, j) for j in range(n + 1) for i in range(n + 1 - j)], dtype=np.int64)
        index = {tuple(p): k for k, p in enumerate(ij.tolist())}
        tris = []
        for j in range(n):
            for i in range(n - j):
                tris.append((index[i, j], index[i + 1, j], index[i, j + 1]))
                if i + j <= n - 2:
                    tris.append((index[i + 1, j], index[i + 1, j + 1], index[i, j + 1]))
        return cls(n, ij, np.array(tris, dtype=np.int64))


def refine_with_parents(t: Triangulation, e: Optional[Embedding], n_side: int):
    """Like :func:`refine` but also returns the parent face of every new face."""
    n = int(n_side)
    if n <= 0:
        raise ValueError("n_side must be a positive integer")
    if n == 1:
        return t, e, np.arange(t.n_faces)
    V, E, F = t.n_vertices, t.n_edges, t.n_faces
    patch = _Patch.build(n)
    i, j = patch.ij[:, 0], patch.ij[:, 1]
    P = len(patch.ij)

    # global id of every patch point, per face
    gid = np.empty((F, P), dtype=np.int64)
    faces = t.faces
    gid[:, (i == 0) & (j == 0)] = faces[:, [0]]
    gid[:, (i == n) & (j == 0)] = faces[:, [1]]
    gid[:, (i == 0) & (j == n)] = faces[:, [2]]
    he_edge = t.halfedge_edge.reshape(F, 3)
    edges = t.edges
    # positions along each side, counted from the side's starting corner
    sides = [
        ((j == 0) & (i > 0) & (i < n), i),          # corner0 -> corner1
        ((i + j == n) & (i > 0) & (j > 0), j),      # corner1 -> corner2
        ((i == 0) & (j > 0) & (j < n), n - j),      # corner2 -> corner0
    ]
    for k, (mask, step) in enumerate(sides):
        cols = np.flatnonzero(mask)
        s = step[cols]
        eid = he_edge[:, k]
        forward = faces[:, k] == edges[eid, 0]
        pos = np.where(forward[:, None], s[None, :], n - s[None, :])
        gid[:, cols] = V + eid[:, None] * (n - 1) + (pos - 1)
    inner = np.flatnonzero((i > 0) & (j > 0) & (i + j < n))
    n_in = len(inner)
    gid[:, inner] = V + E * (n - 1) + np.arange(F)[:, None] * n_in + np.arange(n_in)[None, :]
    new_faces = gid[:, patch.tris].reshape(-1, 3)
    parents = np.repeat(np.arange(F), len(patch.tris))
    n_new = V + E * (n - 1) + F * n_in

    boundary = None
    if t.topology == "disk" and t.boundary is not None and len(t.boundary):
        b = t.boundary
        out = []
        lookup = {tuple(p): k for k, p in enumerate(edges.tolist())}
        for u, v in zip(b, np.roll(b, -1)):
            out.append(u)
            eid = lookup[(min(u, v), max(u, v))]
            pts = V + eid * (n - 1) + np.arange(n - 1)
            out.extend(pts if u < v else pts[::-1])
        boundary = np.array(out, dtype=np.int64)
    t_new = Triangulation(new_faces, n_new, t.topology, boundary)

    if e is None:
        return t_new, None, parents
    corners = e.corners(t)  # (F, 3, 2)
    A, B, C = corners[:, 0], corners[:, 1], corners[:, 2]
    lifted = (A[:, None, :] + (i[None, :, None] / n) * (B - A)[:, None, :]
              + (j[None, :, None] / n) * (C - A)[:, None, :])  # (F, P, 2)
    coords = np.empty((n_new, 2))
    flat_gid = gid.reshape(-1)
    flat_pts = lifted.reshape(-1, 2)
    if e.periods is None:
        coords[flat_gid] = flat_pts
        return t_new, Embedding(coords), parents
    # keep the lift of the first occurrence as the stored coordinate, reduced mod periods
    _, first = np.unique(flat_gid, return_index=True)
    red, _ = wrap(flat_pts[first], e.periods)
    coords[flat_gid[first]] = red
    coords[:V] = e.coords
    face_lifted = lifted[:, patch.tris, :].reshape(-1, 3, 2)
    inv = np.linalg.inv(e.periods)
    shifts = np.rint((face_lifted - coords[new_faces]) @ inv).astype(np.int64)
    return t_new, Embedding(coords, e.periods, shifts), parents


def refine(t: Triangulation, e: Optional[Embedding], n_side: int):
    """Replace every face by the side-``n_side`` patch of the triangular lattice.

    Original vertices keep their ids; points on a shared edge are generated once
    from the edge's canonical (lower id first) orientation, so both incident faces
    reference the same vertices.
    """
    t2, e2, _ = refine_with_parents(t, e, n_side)
    return t2, e2


def subdivide(t: Triangulation, e: Embedding):
    """One step of 4-to-1 midpoint subdivision."""
    rep = validate(t, e)
    if not rep.ok:
        raise InvalidTriangulationError(str(rep))
    return refine(t, e, 2)
