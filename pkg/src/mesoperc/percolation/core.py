"""Critical site percolation on triangulations: sampling, crossings, observables."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence, Union

import numba
import numpy as np

from ..lattices import MarkedDomain, MarkedRectangleDomain, MarkedTriangleDomain, MesoscopicLattice
from .._numeric import midpoint_sum
from ..mesh import TAU, Embedding, Triangulation
from . import kernels
from .rng import as_seed, uniforms

Z95 = 1.96

# exhaustive enumeration is limited to this many vertices
MAX_EXHAUSTIVE = 25


def _triangulation(lattice) -> Triangulation:
    if isinstance(lattice, Triangulation):
        return lattice
    if isinstance(lattice, (MarkedDomain, MesoscopicLattice)):
        return lattice.triangulation
    if isinstance(lattice, tuple):
        return lattice[0]
    raise TypeError(f"cannot read a triangulation from {type(lattice).__name__}")


def _csr(t: Triangulation):
    a = t.adjacency
    return a.indptr.astype(np.int64), a.indices.astype(np.int64)


def resolve_threads(threads: Optional[int] = None) -> int:
    """Worker count: explicit argument, else ``MESOPERC_THREADS``, else numba's default."""
    if threads is None:
        env = os.environ.get("MESOPERC_THREADS")
        threads = int(env) if env else numba.config.NUMBA_NUM_THREADS
    threads = max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(threads)
    return threads


def half_width(phat, trials: int):
    phat = np.asarray(phat, dtype=float)
    return Z95 * np.sqrt(phat * (1.0 - phat) / trials)


def _check_exhaustive(n: int, p: float) -> None:
    if n > MAX_EXHAUSTIVE:
        raise ValueError(f"exhaustive enumeration needs <= {MAX_EXHAUSTIVE} vertices, got {n}")
    if p != 0.5:
        raise ValueError("exhaustive enumeration weights colourings uniformly (p = 1/2)")


# --------------------------------------------------------------------------
# samples and crossings


@dataclass(frozen=True, eq=False)
class PercolationSample:
    """One colouring (1 = black) with the (seed, trial) that produced it."""

    colour: np.ndarray
    seed: int
    trial: int
    p: float
    triangulation: Triangulation

    def __post_init__(self):
        if len(self.colour) != self.triangulation.n_vertices:
            raise ValueError("colouring size does not match the vertex set")

    @property
    def black(self) -> np.ndarray:
        return self.colour.astype(bool)

    @cached_property
    def _labels(self) -> dict:
        return {}

    def components(self, colour: int = 1, active: Optional[np.ndarray] = None) -> np.ndarray:
        """Union-find component labels of ``colour`` vertices inside ``active`` (-1 elsewhere)."""
        key = (colour, None if active is None else active.tobytes())
        cache = self._labels
        if key not in cache:
            member = self.colour == colour
            if active is not None:
                member &= active
            indptr, indices = _csr(self.triangulation)
            cache[key] = kernels.union_find_labels(indptr, indices, member.astype(np.uint8))
        return cache[key]

    def to_rle(self) -> str:
        """Run-length encoding, e.g. ``"b3w2b1"``."""
        out, c = [], self.colour
        if len(c) == 0:
            return ""
        starts = np.flatnonzero(np.diff(c.astype(np.int8))) + 1
        bounds = np.concatenate([[0], starts, [len(c)]])
        for s, e in zip(bounds[:-1], bounds[1:]):
            out.append(("b" if c[s] else "w") + str(e - s))
        return "".join(out)

    @staticmethod
    def from_rle(text: str) -> np.ndarray:
        import re

        parts = re.findall(r"([bw])(\d+)", text)
        return np.concatenate([np.full(int(n), 1 if c == "b" else 0, np.uint8) for c, n in parts])


def sample(lattice, p: float = 0.5, seed: int = 0, trial: int = 0) -> PercolationSample:
    """Colour every vertex black independently with probability ``p``.

    The colouring is a pure function of ``(seed, trial)``; vertex ``v`` is black
    iff its counter-based uniform is below ``p``.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    t = _triangulation(lattice)
    colour = (uniforms(seed, trial, t.n_vertices) < p).astype(np.uint8)
    return PercolationSample(colour, int(seed), int(trial), float(p), t)


@dataclass(frozen=True, eq=False)
class CrossingSpec:
    """Two disjoint boundary arcs of a domain, and the vertices the domain retains."""

    arc1: np.ndarray
    arc2: np.ndarray
    active: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        a1 = np.unique(np.asarray(self.arc1, dtype=np.int64))
        a2 = np.unique(np.asarray(self.arc2, dtype=np.int64))
        if not len(a1) or not len(a2):
            raise ValueError("crossing arcs must be nonempty")
        if np.intersect1d(a1, a2).size:
            raise ValueError("crossing arcs must be disjoint")
        object.__setattr__(self, "arc1", np.asarray(self.arc1, dtype=np.int64))
        object.__setattr__(self, "arc2", np.asarray(self.arc2, dtype=np.int64))
        if self.active is not None:
            object.__setattr__(self, "active", np.asarray(self.active, dtype=bool))

    @classmethod
    def from_domain(cls, d: MarkedRectangleDomain, dual: bool = False) -> "CrossingSpec":
        """Closed arcs [a, b] and [c, d], or [b, c] and [d, a] when ``dual``.

        With closed arcs on both sides, a black crossing of one pair happens
        iff no white crossing of the other pair does.
        """
        if dual:
            return cls(d.closed_arc(1), d.closed_arc(3))
        return cls(d.closed_arc(0), d.closed_arc(2))

    def active_mask(self, n: int) -> np.ndarray:
        if self.active is None:
            return np.ones(n, dtype=bool)
        if len(self.active) != n:
            raise ValueError("active mask size does not match the lattice")
        return self.active

    def check(self, n: int) -> None:
        arcs = np.concatenate([self.arc1, self.arc2])
        if arcs.min() < 0 or arcs.max() >= n:
            raise ValueError("arc vertex outside domain")
        if not self.active_mask(n)[arcs].all():
            raise ValueError("arc vertex outside domain")


def crosses(s: PercolationSample, spec: CrossingSpec, colour: int = 1) -> bool:
    """Whether a path of ``colour`` vertices inside the domain joins the two arcs."""
    n = s.triangulation.n_vertices
    spec.check(n)
    lab = s.components(colour, spec.active)
    l1 = lab[spec.arc1]
    l2 = lab[spec.arc2]
    return bool(np.intersect1d(l1[l1 >= 0], l2[l2 >= 0]).size)


@dataclass(frozen=True)
class CrossingEstimate:
    estimate: float
    half_width: float
    trials: int
    hits: int
    seed: int
    p: float
    exhaustive: bool = False

    @property
    def interval(self) -> tuple:
        return (self.estimate - self.half_width, self.estimate + self.half_width)


def _contiguous_start(pos: np.ndarray, nb: int) -> int:
    """First position of a cyclically contiguous run, or -1 if not contiguous."""
    inside = np.zeros(nb, dtype=bool)
    inside[pos] = True
    starts = np.flatnonzero(inside & ~np.roll(inside, 1))
    if len(starts) != 1 or len(pos) == nb:
        return -1
    return int(starts[0])


def exploration_geometry(t: Triangulation, spec: CrossingSpec) -> Optional[tuple]:
    """Domain plus four outer ghost vertices, for :func:`kernels.explore_outcomes`.

    Applies when the domain is a whole disk triangulation and both arcs are
    contiguous boundary paths separated by nonempty gaps; returns None
    otherwise. The boundary splits into arc 1, gap, arc 2, gap, each with its
    own ghost vertex joined to all of its vertices; consecutive ghosts are
    joined where the arcs meet, and the diagonal of each such junction goes
    to the white ghost so black adjacency is exactly that of the arcs.
    """
    if t.topology != "disk" or spec.active is not None:
        return None
    b = np.asarray(t.boundary, dtype=np.int64)
    nb = len(b)
    where = np.full(t.n_vertices, -1, dtype=np.int64)
    where[b] = np.arange(nb)
    p1, p2 = where[np.unique(spec.arc1)], where[np.unique(spec.arc2)]
    if (p1 < 0).any() or (p2 < 0).any():
        return None
    s1, s2 = _contiguous_start(p1, nb), _contiguous_start(p2, nb)
    if s1 < 0 or s2 < 0:
        return None
    label = np.full(nb, -1, dtype=np.int64)
    label[p1] = 0
    label[p2] = 2
    order = np.roll(np.arange(nb), -s1)
    cur = 0
    for i in order:
        if label[i] == 0:
            continue
        if label[i] == 2:
            cur = 2
            continue
        label[i] = cur + 1
    if not ((label == 1).any() and (label == 3).any()):
        return None
    n = t.n_vertices
    ghost = n + label
    faces = [tuple(f) for f in t.faces.tolist()]
    F = len(faces)
    fnb = t.face_neighbors.astype(np.int64).tolist()
    extra, start = [], -1
    for i in range(nb):
        j = (i + 1) % nb
        u, w = int(b[i]), int(b[j])
        gi, gj = int(ghost[i]), int(ghost[j])
        if label[j] == label[i]:
            extra.append((w, u, gi))
        elif label[i] % 2 == 0:
            # black arc ends at u: only the white ghost gj gains a real neighbour
            extra.append((w, u, gj))
            if label[i] == 0:
                start = F + len(extra)
            extra.append((u, gj, gi))
        else:
            extra.append((w, u, gi))
            extra.append((w, gi, gj))
    allf = faces + extra
    owner = {}
    for f in range(F, len(allf)):
        fnb.append([-1, -1, -1])
        for k in range(3):
            x, y = allf[f][k], allf[f][(k + 1) % 3]
            owner.setdefault((min(x, y), max(x, y)), []).append((f, k))
    bh = np.flatnonzero(t.twin < 0)
    for h in bh:
        f, k = int(h // 3), int(h % 3)
        x, y = faces[f][k], faces[f][(k + 1) % 3]
        owner.setdefault((min(x, y), max(x, y)), []).append((f, k))
    for slots in owner.values():
        if len(slots) == 2:
            (f, k), (g, l) = slots
            fnb[f][k] = g
            fnb[g][l] = f
    fv = np.array(allf, dtype=np.int64)
    gcol = np.array([1, 0, 1, 0], dtype=np.uint8)
    return fv, np.array(fnb, dtype=np.int64), n, gcol, start, n, n + 1, n + 2


def crossing_outcomes(lattice, spec: CrossingSpec, trials: int, seed: int = 0, p: float = 0.5,
                      threads: Optional[int] = None, exhaustive: bool = False, trial0: int = 0,
                      method: str = "auto") -> np.ndarray:
    """Per-trial crossing indicators.

    ``method`` is ``"explore"`` (interface walk, disk domains with contiguous
    arcs), ``"flood"`` (cluster growth from arc 1, any domain) or ``"auto"``.
    Both read the same colours, so they agree trial by trial.
    """
    t = _triangulation(lattice)
    n = t.n_vertices
    spec.check(n)
    if exhaustive:
        _check_exhaustive(n, p)
        trials, trial0 = 2**n, 0
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if method not in ("auto", "explore", "flood"):
        raise ValueError(f"unknown crossing method {method!r}")
    workers = resolve_threads(threads)
    if method != "flood":
        geo = exploration_geometry(t, spec)
        if geo is not None:
            return kernels.explore_outcomes(*geo, as_seed(seed), np.int64(trial0), np.int64(trials),
                                            float(p), bool(exhaustive), workers)
        if method == "explore":
            raise ValueError("exploration needs a disk domain with two contiguous, non-adjacent arcs")
    indptr, indices = _csr(t)
    is_arc2 = np.zeros(n, dtype=np.uint8)
    is_arc2[spec.arc2] = 1
    return kernels.crossing_outcomes(
        indptr, indices, spec.active_mask(n).astype(np.uint8), spec.arc1, is_arc2,
        as_seed(seed), np.int64(trial0), np.int64(trials), float(p), bool(exhaustive), workers,
    )


def crossing_probability(lattice, spec: CrossingSpec, trials: int, seed: int = 0, p: float = 0.5,
                         threads: Optional[int] = None, exhaustive: bool = False,
                         method: str = "auto") -> CrossingEstimate:
    """Monte Carlo (or exhaustive) probability of a black crossing between the arcs."""
    out = crossing_outcomes(lattice, spec, trials, seed, p, threads, exhaustive, method=method)
    hits = int(out.sum())
    n = len(out)
    est = hits / n
    hw = 0.0 if exhaustive else float(half_width(est, n))
    return CrossingEstimate(est, hw, n, hits, int(seed), float(p), exhaustive)


# --------------------------------------------------------------------------
# separation events and observables


_MARK = {"a": 0, "b": 1, "c": 2}


def separation_geometry(domain: MarkedTriangleDomain) -> tuple:
    """Static arrays for the separation kernels (one boundary rotation per mark)."""
    t = domain.triangulation
    n = t.n_vertices
    indptr, indices = _csr(t)
    rows = np.repeat(np.arange(n), np.diff(indptr))
    keys = rows * n + indices
    rev = np.searchsorted(keys, indices * n + rows).astype(np.int64)
    he_csr = np.searchsorted(keys, t.origin * n + t.target).astype(np.int64)
    face_nb = t.face_neighbors.reshape(-1).astype(np.int64)
    arcs = domain.arcs()  # ab, bc, ca
    marks = [int(m) for m in domain.marks]
    # closed landing arcs per mark x: [m_{x-1}, m_x] then [m_x, m_{x+1}]
    fan_list = []
    for x in range(3):
        fan_list.append(np.append(arcs[(x + 2) % 3], marks[x]))
        fan_list.append(np.append(arcs[x], marks[(x + 1) % 3]))
    fans = np.concatenate(fan_list).astype(np.int64)
    fan_off = np.concatenate([[0], np.cumsum([len(a) for a in fan_list])]).astype(np.int64)
    b = t.boundary
    nb = len(b)
    bh = np.flatnonzero(t.twin < 0)
    he_from = {int(t.origin[h]): int(h) for h in bh}
    arc_id = np.zeros((3, n), dtype=np.int64)
    bstart = np.empty((3, nb), dtype=np.int64)
    bface = np.empty((3, nb), dtype=np.int64)
    bcsr = np.empty((3, nb), dtype=np.int64)
    he_bpos = np.full((3, 3 * t.n_faces), -1, dtype=np.int64)
    where = {int(v): k for k, v in enumerate(b)}
    for x in range(3):
        arc_id[x, fan_list[2 * x]] = 1
        arc_id[x, fan_list[2 * x + 1]] = 2
        arc_id[x, marks[x]] = 3
        s0 = where[int(arcs[(x + 2) % 3][0])]
        order = np.roll(b, -s0)
        bstart[x] = order
        hs = np.array([he_from[int(v)] for v in order], dtype=np.int64)
        bface[x] = hs // 3
        bcsr[x] = he_csr[hs]
        he_bpos[x, hs] = np.arange(nb)
    return (indptr, indices, rev, he_csr, face_nb, fans, fan_off, arc_id, bstart, bface, bcsr, he_bpos)


def separation_indicators(colour: np.ndarray, domain: MarkedTriangleDomain, geometry: Optional[tuple] = None) -> np.ndarray:
    """(3, F) indicators of E_a, E_b, E_c for one colouring (1 = black)."""
    geo = geometry if geometry is not None else separation_geometry(domain)
    nb = len(domain.triangulation.boundary)
    return kernels.events_for_colouring(geo, np.asarray(colour, dtype=np.uint8), nb)


def separating_event(s: PercolationSample, f: int, domain: MarkedTriangleDomain, mark: str = "a") -> bool:
    """E_mark(f): a black chain from the arc before the mark to the arc after it separates f and the mark from the other two marks.

    Decided exactly through planar duality: ghost vertices outside the two
    arcs, joined by a ghost edge, turn every such chain into a cycle; ``f`` is
    separated iff it lies off the outer face of the biconnected block of the
    ghost edge in the black graph.
    """
    t = domain.triangulation
    if not 0 <= f < t.n_faces:
        raise ValueError("face outside domain")
    if s.triangulation is not t and s.triangulation.n_vertices != t.n_vertices:
        raise ValueError("sample does not colour this domain")
    ev = separation_indicators(s.colour, domain)
    return bool(ev[_MARK[mark], f])


@dataclass(frozen=True, eq=False)
class ObservableField:
    """Per-face counts of E_a, E_b, E_c over shared samples."""

    counts: np.ndarray  # (3, F) int
    trials: int
    seed: int
    exhaustive: bool = False

    @property
    def Ha(self) -> np.ndarray:
        return self.counts[0] / self.trials

    @property
    def Hb(self) -> np.ndarray:
        return self.counts[1] / self.trials

    @property
    def Hc(self) -> np.ndarray:
        return self.counts[2] / self.trials

    @property
    def components(self) -> np.ndarray:
        return self.counts / self.trials

    @property
    def H(self) -> np.ndarray:
        return self.Ha + TAU * self.Hb + TAU**2 * self.Hc

    @property
    def half_width(self) -> np.ndarray:
        if self.exhaustive:
            return np.zeros(self.counts.shape)
        return half_width(self.components, self.trials)

    def edge_difference(self, t: Triangulation, x: int = 0) -> np.ndarray:
        """Integer count difference along every half-edge: count(head) - count(tail); 0 on the boundary."""
        tf = t.face_neighbors.reshape(-1)
        tail = np.arange(3 * t.n_faces) // 3
        c = self.counts[x]
        return np.where(tf >= 0, c[np.maximum(tf, 0)] - c[tail], 0)


@dataclass(frozen=True, eq=False)
class EdgeProbabilities:
    """Per directed dual edge counts of E_x(head) and not E_x(tail).

    Directed dual edge ``h`` is half-edge ``h``: from face ``h // 3`` (tail)
    across its edge to the neighbouring face (head).
    """

    counts: np.ndarray  # (3, 3F) int
    trials: int
    tail: np.ndarray
    head: np.ndarray
    twin: np.ndarray
    seed: int
    exhaustive: bool = False

    @property
    def interior(self) -> np.ndarray:
        return self.head >= 0

    @property
    def P(self) -> np.ndarray:
        return self.counts / self.trials

    def derivative_counts(self, x: int = 0) -> np.ndarray:
        """count P_x(e) - count P_x(-e) on interior edges (0 on the boundary)."""
        tw = self.twin
        c = self.counts[x]
        return np.where(tw >= 0, c - c[np.maximum(tw, 0)], 0)


def _observable_run(domain: MarkedTriangleDomain, trials, seed, p, threads, exhaustive, with_edges):
    t = domain.triangulation
    n = t.n_vertices
    if exhaustive:
        _check_exhaustive(n, p)
        trials = 2**n
    if trials < 1:
        raise ValueError("trials must be at least 1")
    geo = separation_geometry(domain)
    workers = resolve_threads(threads)
    hc, pc = kernels.observable_counts(
        geo, len(t.boundary), as_seed(seed), np.int64(0), np.int64(trials),
        float(p), bool(exhaustive), workers, bool(with_edges),
    )
    return hc, pc, trials


def estimate_H(domain: MarkedTriangleDomain, trials: int = 10_000, seed: int = 0, p: float = 0.5,
               threads: Optional[int] = None, exhaustive: bool = False) -> ObservableField:
    """Empirical probabilities of E_a, E_b, E_c for every face (one sample serves all faces)."""
    hc, _, n = _observable_run(domain, trials, seed, p, threads, exhaustive, False)
    return ObservableField(hc, n, int(seed), exhaustive)


def estimate_P(domain: MarkedTriangleDomain, trials: int = 10_000, seed: int = 0, p: float = 0.5,
               threads: Optional[int] = None, exhaustive: bool = False) -> EdgeProbabilities:
    """Empirical P_x(e) for every directed dual edge."""
    t = domain.triangulation
    _, pc, n = _observable_run(domain, trials, seed, p, threads, exhaustive, True)
    head = t.face_neighbors.reshape(-1)
    tail = np.arange(3 * t.n_faces) // 3
    return EdgeProbabilities(pc, n, tail, head, t.twin, int(seed), exhaustive)


@dataclass(frozen=True)
class ColorSwitchReport:
    max_ab: float
    max_ac: float
    n_dual_vertices: int
    trials: int
    exhaustive: bool
    joint_se: float = 0.0

    @property
    def max_discrepancy(self) -> float:
        return max(self.max_ab, self.max_ac)


def color_switch_check(domain: MarkedTriangleDomain, exhaustive: bool = True, trials: int = 100_000,
                       seed: int = 0, threads: Optional[int] = None) -> ColorSwitchReport:
    """Compare P_a(e), P_b(e'), P_c(e'') at every dual vertex of degree 3.

    For a face z with counterclockwise half-edges h0, h1, h2 (outgoing dual
    edges), every rotation (e, e', e'') = (h_k, h_{k+1}, h_{k+2}) is checked.
    Faces on the boundary (fewer than three neighbours) are skipped.
    """
    ep = estimate_P(domain, trials, seed, 0.5, threads, exhaustive)
    t = domain.triangulation
    nb = t.face_neighbors
    inner = np.flatnonzero((nb >= 0).all(axis=1))
    if not len(inner):
        raise ValueError("no dual vertex of degree 3")
    c = ep.counts
    h = 3 * inner[:, None] + np.arange(3)[None, :]
    d_ab = d_ac = 0
    for k in range(3):
        e0, e1, e2 = h[:, k], h[:, (k + 1) % 3], h[:, (k + 2) % 3]
        d_ab = max(d_ab, int(np.abs(c[0, e0] - c[1, e1]).max()))
        d_ac = max(d_ac, int(np.abs(c[0, e0] - c[2, e2]).max()))
    n = ep.trials
    se = 0.0
    if not exhaustive:
        pm = ep.P[:, h.reshape(-1)].max()
        se = math.sqrt(2 * pm * (1 - pm) / n)
    return ColorSwitchReport(d_ab / n, d_ac / n, len(inner), n, exhaustive, se)


# --------------------------------------------------------------------------
# discrete contour integrals


def _evaluate(field_, gamma, positions):
    if callable(field_):
        return np.asarray(field_(positions[gamma] if positions is not None else gamma), dtype=complex)
    if isinstance(field_, ObservableField):
        return field_.H[gamma]
    return np.asarray(field_, dtype=complex)[gamma]


def contour_integral(H, Phi, gamma, lattice: Optional[Triangulation] = None,
                     positions: Optional[np.ndarray] = None) -> complex:
    """Midpoint-rule integral ``sum (H_{k+1} + H_k) / 2 * (Phi_{k+1} - Phi_k)`` around a closed chain.

    ``gamma`` is either a sequence of face ids (dual vertices; ``positions``
    gives their complex locations for callable fields, ``lattice`` enables the
    nearest-neighbour check) or a sequence of complex points. The chain must be
    closed: its last entry repeats the first.

    The sum is evaluated exactly as in :func:`mesoperc._numeric.midpoint_sum`,
    so constant H and H = Phi give exactly zero.
    """
    g = np.asarray(gamma)
    if len(g) < 2 or g[0] != g[-1]:
        raise ValueError("open chain: the last vertex must repeat the first")
    if np.iscomplexobj(g):
        pts = g
        Hv = np.asarray(H(pts) if callable(H) else H, dtype=complex)
        Pv = np.asarray(Phi(pts) if callable(Phi) else Phi, dtype=complex)
    else:
        g = g.astype(np.int64)
        body = g[:-1]
        if len(np.unique(body)) != len(body):
            raise ValueError("chain vertices must be pairwise distinct")
        if lattice is not None:
            nb = lattice.face_neighbors
            for u, v in zip(g[:-1], g[1:]):
                if v not in nb[u]:
                    raise ValueError(f"faces {u} and {v} are not dual neighbours")
        Hv = _evaluate(H, g, positions)
        Pv = _evaluate(Phi, g, positions)
    return midpoint_sum(Hv, Pv)


def face_centroids(t: Triangulation, e: Embedding) -> np.ndarray:
    return e.complex_corners(t).mean(axis=1)


def dual_cycle(t: Triangulation, inside: np.ndarray) -> np.ndarray:
    """Closed chain of faces around the vertex set ``inside`` (counterclockwise).

    The chain visits the faces having vertices on both sides; consecutive faces
    share an edge leaving the set. The set must be a connected, hole-free
    cluster away from the boundary.
    """
    inside = np.asarray(inside, dtype=bool)
    fin = inside[t.faces]
    mixed = np.flatnonzero(fin.any(1) & ~fin.all(1))
    if not len(mixed):
        raise ValueError("vertex set has no boundary faces")
    nb = t.face_neighbors
    # from a mixed face, leave through the edge whose origin is inside and target outside
    start = int(mixed[0])
    chain = [start]
    f = start
    for _ in range(len(mixed) + 1):
        k = [k for k in range(3) if fin[f, k] and not fin[f, (k + 1) % 3]]
        if len(k) != 1 or nb[f, k[0]] < 0:
            raise ValueError("vertex set touches the boundary or is not a simple cluster")
        f = int(nb[f, k[0]])
        chain.append(f)
        if f == start:
            break
    else:
        raise ValueError("dual chain did not close")
    if len(chain) - 1 != len(mixed):
        raise ValueError("vertex set boundary is not a single cycle")
    # the walk keeps the set on its right; reverse for counterclockwise
    return np.array(chain[::-1], dtype=np.int64)


# --------------------------------------------------------------------------
# rectangles and the RSW harness


def rectangle_spec(t: Triangulation, e: Embedding, center: complex, width: float, height: float,
                   angle: float = 0.0) -> CrossingSpec:
    """Lengthwise crossing of a rotated rectangle (``angle`` in degrees).

    The domain keeps the vertices inside the rectangle; arc 1 and arc 2 are the
    retained vertices within one edge length of the two short sides.
    """
    z = e.coords[:, 0] + 1j * e.coords[:, 1]
    w = (z - complex(center)) * np.exp(-1j * np.deg2rad(angle))
    x, y = w.real, w.imag
    active = (np.abs(x) <= width / 2) & (np.abs(y) <= height / 2)
    ed = t.edges
    h = float(np.abs(z[ed[:, 0]] - z[ed[:, 1]]).max())
    arc1 = np.flatnonzero(active & (x < -width / 2 + h))
    arc2 = np.flatnonzero(active & (x > width / 2 - h))
    meta = dict(center=complex(center), width=float(width), height=float(height), angle=float(angle))
    return CrossingSpec(arc1, arc2, active, meta)


@dataclass(frozen=True)
class RSWRow:
    delta: float
    N: int
    angle: float
    aspect: float
    estimate: float
    half_width: float
    trials: int


def rsw_harness(torus, scales: Sequence[tuple], aspect: float, height: float, angles: Sequence[float],
                trials: int, seed: int = 0, center: complex = 0j, threads: Optional[int] = None) -> list[RSWRow]:
    """Lengthwise crossing estimates of a ``aspect * height`` by ``height`` rectangle.

    ``torus`` is a (Triangulation, Embedding) pair; for each ``(delta, N)`` in
    ``scales`` the mesoscopic lattice covering all rotated rectangles is built
    once and every orientation is measured on it.
    """
    from ..lattices import build_mesoscopic

    if aspect <= 1:
        raise ValueError("aspect ratio must exceed 1")
    t0, e0 = torus
    width = aspect * height
    corners = np.array([complex(sx * width / 2, sy * height / 2) for sx in (-1, 1) for sy in (-1, 1)])
    pts = np.concatenate([center + corners * np.exp(1j * np.deg2rad(a)) for a in angles])
    rows = []
    for delta, N in scales:
        m = 1.5 * delta * np.abs(e0.periods).sum(axis=0).max()
        window = (pts.real.min() - m, pts.imag.min() - m, pts.real.max() + m, pts.imag.max() + m)
        L = build_mesoscopic(t0, e0, delta, N, window)
        for a in angles:
            spec = rectangle_spec(L.triangulation, L.embedding, center, width, height, a)
            est = crossing_probability(L, spec, trials, seed, threads=threads)
            rows.append(RSWRow(float(delta), int(N), float(a), float(aspect), est.estimate, est.half_width, est.trials))
    return rows
