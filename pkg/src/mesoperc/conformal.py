"""Conformal data of the equilateral-glued surface.

Every face of a triangulation is treated as a unit equilateral triangle. On
that surface:

* :func:`modulus` solves the first-order finite-element Dirichlet problem
  between arcs ab and cd (uniform weights, cot 60 deg / 2 per face and edge);
* :func:`cardy` is the crossing probability of a conformal rectangle;
* :func:`predict_H` maps a three-marked domain onto the triangle (1, tau,
  tau^2) through a rectangle, the Jacobi sn function and the equilateral
  Schwarz–Christoffel integral;
* :func:`morera_qc_check` evaluates the discrete integral of phi d(phi_0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components
from scipy.special import gamma, hyp2f1

from ._numeric import midpoint_sum
from .lattices import MarkedDomain, MarkedRectangleDomain, MarkedTriangleDomain
from .mesh import TAU, Triangulation

FACE_WEIGHT = 1.0 / (2.0 * math.sqrt(3.0))  # cot(60 deg) / 2
CG_RTOL = 1e-10
CARDY_CONST = gamma(2.0 / 3.0) / (gamma(1.0 / 3.0) * gamma(4.0 / 3.0))
BETA13 = gamma(1.0 / 3.0) ** 2 / gamma(2.0 / 3.0)  # B(1/3, 1/3)


class SolverError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# modulus


def edge_weights(t: Triangulation) -> tuple[np.ndarray, np.ndarray]:
    """Edges and their conductances: 1/sqrt(3) inside, 1/(2 sqrt(3)) on the boundary."""
    he = t.halfedge_edge
    w = np.bincount(he, minlength=t.n_edges) * FACE_WEIGHT
    return t.edges, w


def laplacian(t: Triangulation) -> sp.csr_matrix:
    ed, w = edge_weights(t)
    n = t.n_vertices
    i, j = ed[:, 0], ed[:, 1]
    W = sp.coo_matrix((np.concatenate([w, w]), (np.concatenate([i, j]), np.concatenate([j, i]))), shape=(n, n))
    d = np.asarray(W.sum(axis=1)).ravel()
    return (sp.diags(d) - W).tocsr()


def dirichlet(t: Triangulation, ones: np.ndarray, zeros: np.ndarray, rtol: float = CG_RTOL,
              x0: Optional[np.ndarray] = None) -> tuple[np.ndarray, float]:
    """Harmonic u with u = 1 on ``ones``, u = 0 on ``zeros``, natural condition elsewhere.

    Returns (u, energy). Conjugate gradients with Jacobi preconditioning.
    """
    n = t.n_vertices
    L = laplacian(t)
    fixed = np.zeros(n, dtype=bool)
    fixed[ones] = True
    fixed[zeros] = True
    if len(ones) == 0 or len(zeros) == 0:
        raise SolverError("singular linear system: an arc is empty")
    if np.intersect1d(ones, zeros).size:
        raise SolverError("singular linear system: the two arcs share a vertex")
    free = np.flatnonzero(~fixed)
    u = np.zeros(n)
    u[ones] = 1.0
    if len(free):
        A = L[free][:, free].tocsr()
        # every free component must touch a fixed vertex
        ncomp, lab = connected_components(L.astype(bool), directed=False)
        touched = np.zeros(ncomp, dtype=bool)
        touched[lab[fixed]] = True
        if not touched[lab].all():
            raise SolverError("singular linear system: part of the domain is disconnected from the arcs")
        b = -(L[free][:, fixed] @ u[fixed])
        M = sp.diags(1.0 / A.diagonal())
        guess = None if x0 is None else x0[free]
        sol, info = spla.cg(A, b, x0=guess, rtol=rtol, atol=0.0, M=M, maxiter=20 * len(free) + 100)
        if info != 0:
            raise SolverError(f"conjugate gradients did not converge (info={info})")
        u[free] = sol
    energy = float(u @ (L @ u))
    return u, energy


@dataclass(frozen=True, eq=False)
class ModulusResult:
    """Modulus of a marked quadrilateral at refinement level n.

    ``u`` is the potential on G^(n) (1 on arc ab, 0 on arc cd), ``energy`` its
    Dirichlet energy, equal to the effective conductance, and ``rho`` its
    reciprocal. ``error`` is |rho_n - rho_{n-1}| (nan when not computed).
    """

    rho: float
    level: int
    u: np.ndarray
    energy: float
    error: float
    domain: MarkedRectangleDomain
    history: dict = field(default_factory=dict)

    @property
    def conductance(self) -> float:
        return self.energy

    def to_json(self) -> dict:
        return {"rho": self.rho, "level": self.level, "energy": self.energy, "error": self.error,
                "n_vertices": int(self.domain.triangulation.n_vertices),
                "history": {str(k): v for k, v in self.history.items()}}

    def potential_rows(self):
        return [(v, float(x)) for v, x in enumerate(self.u)]


def _modulus_at(d: MarkedDomain, n: int, ones_arc: int, zeros_arc: int):
    dn = d.refined(n) if n > 0 else d
    u, energy = dirichlet(dn.triangulation, dn.closed_arc(ones_arc), dn.closed_arc(zeros_arc))
    if energy <= 0:
        raise SolverError("zero conductance")
    return dn, u, energy


def modulus(d: MarkedRectangleDomain, n: int = 0, estimate_error: bool = True) -> ModulusResult:
    """rho(a, b, c, d) = 1 / (effective conductance between arcs ab and cd on G^(n))."""
    if n < 0:
        raise ValueError("refinement level must be non-negative")
    if len(d.marks) != 4:
        raise ValueError("modulus needs four marks")
    dn, u, energy = _modulus_at(d, n, 0, 2)
    rho = 1.0 / energy
    hist = {n: rho}
    err = float("nan")
    if estimate_error and n > 0:
        _, _, e_prev = _modulus_at(d, n - 1, 0, 2)
        hist[n - 1] = 1.0 / e_prev
        err = abs(rho - 1.0 / e_prev)
    return ModulusResult(rho, n, u, energy, err, dn, hist)


def modulus_sequence(d: MarkedRectangleDomain, levels) -> dict:
    """rho at each level (no error estimates; consecutive levels give them)."""
    return {int(n): 1.0 / _modulus_at(d, int(n), 0, 2)[2] for n in levels}


# --------------------------------------------------------------------------
# elliptic functions and Cardy's formula


def _theta(q: float, z, nterms: int):
    """Jacobi theta functions 1..4 at complex z with real nome q."""
    z = np.asarray(z, dtype=complex)
    t1 = np.zeros_like(z)
    t2 = np.zeros_like(z)
    t3 = np.ones_like(z)
    t4 = np.ones_like(z)
    for m in range(nterms):
        a = q ** ((m + 0.5) ** 2)
        t1 += 2.0 * (-1) ** m * a * np.sin((2 * m + 1) * z)
        t2 += 2.0 * a * np.cos((2 * m + 1) * z)
        if m >= 1:
            b = q ** (m * m)
            t3 += 2.0 * b * np.cos(2 * m * z)
            t4 += 2.0 * (-1) ** m * b * np.cos(2 * m * z)
    return t1, t2, t3, t4


def _nterms(q: float, extra_growth: float = 0.0) -> int:
    # terms until q^(m^2 - m) e^(2 m g) is negligible
    lq = -math.log(q)
    m = 2
    while m * m * lq - 2 * m * (extra_growth + lq) > 42.0:
        break
    m = 2
    while (m * (m - 1)) * lq - 2 * m * extra_growth < 42.0:
        m += 1
    return m + 1


def lambda_pair(rho: float) -> tuple[float, float]:
    """(lambda, 1 - lambda) of the modular lambda function at i*rho, both to full relative precision.

    lambda = theta_2^4 / theta_3^4 at nome exp(-pi rho); the smaller nome of
    rho and 1/rho is used, and lambda(i/rho) = 1 - lambda(i rho).
    """
    if rho <= 0:
        raise ValueError("modulus must be positive")
    swap = rho < 1.0
    r = 1.0 / rho if swap else rho
    q = math.exp(-math.pi * r)
    n = _nterms(q)
    z = np.zeros(1, dtype=complex)
    _, t2, t3, t4 = (float(x.real[0]) for x in _theta(q, z, n))
    lam = (t2 / t3) ** 4
    lam_c = (t4 / t3) ** 4
    return (lam_c, lam) if swap else (lam, lam_c)


def _cardy_eta(eta: float) -> float:
    return float(CARDY_CONST * eta ** (1.0 / 3.0) * hyp2f1(1.0 / 3.0, 2.0 / 3.0, 4.0 / 3.0, eta))


def cardy(rho: float) -> float:
    """Crossing probability between the two sides at distance ``rho`` of a 1 x rho conformal rectangle.

    C(rho) = Gamma(2/3) / (Gamma(1/3) Gamma(4/3)) eta^(1/3) 2F1(1/3, 2/3; 4/3; eta)
    with eta = lambda(i rho) the cross-ratio of the rectangle's corners in the
    half-plane. For eta > 1/2 the equivalent form 1 - C(1 - eta) is used,
    which keeps full precision near 1.
    """
    rho = float(rho)
    if not rho > 0 or not math.isfinite(rho):
        raise ValueError("modulus must be a positive finite number")
    eta, eta_c = lambda_pair(rho)
    if eta <= 0.5:
        return _cardy_eta(eta)
    return 1.0 - _cardy_eta(eta_c)


def cardy_eta(eta: float) -> float:
    """Cardy's function of the cross-ratio directly (for checks)."""
    return _cardy_eta(float(eta))


def elliptic_nome(rho: float) -> float:
    """Nome q with K'(k)/K(k) = 2 / rho, i.e. the 2K x K' rectangle of aspect rho."""
    return math.exp(-2.0 * math.pi / rho)


def sn_rectangle(w, rho: float):
    """sn(w, k) for the modulus k whose rectangle [-K, K] x [0, K'] has aspect 2K/K' = rho.

    Returns (sn values, K, K', k).
    """
    q = elliptic_nome(rho)
    w = np.asarray(w, dtype=complex)
    zero = np.zeros(1, dtype=complex)
    _, t2z, t3z, t4z = (float(x.real[0]) for x in _theta(q, zero, _nterms(q)))
    K = 0.5 * math.pi * t3z**2
    Kp = 2.0 * K / rho
    k = (t2z / t3z) ** 2
    z = w / t3z**2
    growth = float(np.abs(z.imag).max()) if z.size else 0.0
    t1, _, _, t4 = _theta(q, z, _nterms(q, growth))
    return (t3z / t2z) * t1 / t4, K, Kp, k


# --------------------------------------------------------------------------
# equilateral Schwarz–Christoffel map


_GL_X, _GL_W = np.polynomial.legendre.leggauss(48)
_GL_S = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W
F_INF = BETA13 * np.exp(1j * math.pi / 3.0)


def _cx(re, im):
    out = np.empty(np.shape(re), dtype=complex)
    out.real = re
    out.imag = im
    return out


def triangle_map(zeta) -> np.ndarray:
    """f(zeta) = integral_0^zeta t^(-2/3) (1 - t)^(-2/3) dt on the closed upper half-plane.

    Maps 0, 1, infinity to 0, B, B e^(i pi/3) with B = B(1/3, 1/3). The
    integral is taken from whichever vertex is nearest, after a cube-root
    substitution that removes the endpoint singularity; 48-point Gauss–Legendre.
    """
    z = np.atleast_1d(np.asarray(zeta, dtype=complex)).copy()
    z.imag = np.maximum(z.imag, 0.0)
    out = np.empty_like(z)
    s3 = _GL_S**3
    near0 = (np.abs(z) <= np.abs(z - 1.0)) & (np.abs(z) <= 1.5)
    near1 = ~near0 & (np.abs(z - 1.0) <= 1.5)
    far = ~(near0 | near1) & np.isfinite(z)
    if near0.any():
        zz = z[near0][:, None]
        g = (1.0 - zz * s3) ** (-2.0 / 3.0)
        out[near0] = 3.0 * zz[:, 0] ** (1.0 / 3.0) * (g @ _GL_W)
    if near1.any():
        zz = z[near1]
        w = _cx(1.0 - zz.real, -zz.imag)  # 1 - zeta on the lower side of the cut
        g = (1.0 - w[:, None] * s3) ** (-2.0 / 3.0)
        out[near1] = BETA13 - 3.0 * w ** (1.0 / 3.0) * (g @ _GL_W)
    if far.any():
        zz = z[far]
        d = _cx(s3[None, :] - zz.real[:, None], -np.broadcast_to(zz.imag[:, None], (len(zz), len(s3))))
        g = d ** (-2.0 / 3.0)
        out[far] = F_INF - 3.0 * zz ** (1.0 / 3.0) * (g @ _GL_W)
    out[~np.isfinite(z)] = F_INF
    return out if np.ndim(zeta) else out[0]


def to_triangle(fz) -> np.ndarray:
    """Affine map sending the Schwarz–Christoffel triangle (0, B, B e^(i pi/3)) to (tau, tau^2, 1)."""
    return TAU + (TAU**2 - TAU) * np.asarray(fz) / BETA13


# --------------------------------------------------------------------------
# predicted observable


@dataclass(frozen=True, eq=False)
class PredictedField:
    """Predicted limit h on the faces (and vertices) of G^(n)."""

    faces: np.ndarray
    vertices: np.ndarray
    rho: float
    fourth_mark: int
    domain: MarkedTriangleDomain
    path_error: float
    rectangle_faces: np.ndarray  # face coordinates in [0, rho] x [0, 1]


def _discrete_conjugate(t: Triangulation, X: np.ndarray) -> tuple[np.ndarray, float]:
    """Face values Y with Y(left) - Y(right) = w_e (X_j - X_i) across every interior edge i -> j.

    Integrated along a breadth-first spanning tree of the dual graph; returns
    the largest violation over non-tree edges (zero up to round-off when X is
    discrete harmonic at every interior vertex).
    """
    _, w = edge_weights(t)
    he_w = w[t.halfedge_edge]
    dX = X[t.target] - X[t.origin]
    nb = t.face_neighbors.reshape(-1)
    F = t.n_faces
    Y = np.full(F, np.nan)
    Y[0] = 0.0
    order = [0]
    head = 0
    while head < len(order):
        f = order[head]
        head += 1
        for k in range(3):
            h = 3 * f + k
            g = nb[h]
            if g >= 0 and np.isnan(Y[g]):
                Y[g] = Y[f] - he_w[h] * dX[h]
                order.append(g)
    if np.isnan(Y).any():
        raise SolverError("dual graph is disconnected")
    inner = np.flatnonzero(nb >= 0)
    viol = np.abs(Y[inner // 3] - Y[nb[inner]] - he_w[inner] * dX[inner])
    return Y, float(viol.max()) if len(viol) else 0.0


def predict_H(d: MarkedTriangleDomain, n: int = 0, fourth: Optional[int] = None) -> PredictedField:
    """Discrete uniformization of (domain; a, b, c) onto the triangle (1, tau, tau^2).

    A fourth mark on arc ca (the middle boundary vertex of that arc in
    G^(n) unless given) makes a quadrilateral; its potential u and discrete
    conjugate give rectangle coordinates X = rho (1 - u), Y in [0, 1]. The
    rectangle goes to the half-plane by sn, the marks are moved to
    (infinity, 0, 1) by a real Mobius map, and the equilateral
    Schwarz–Christoffel integral finishes the map.
    """
    t0 = d.triangulation
    b0 = list(t0.boundary)
    pos = [b0.index(int(m)) for m in d.marks]
    nb0 = len(b0)
    for i in range(3):
        if (pos[(i + 1) % 3] - pos[i]) % nb0 == 1 and nb0 > 3:
            raise ValueError("degenerate marks: two marks share a boundary edge of the coarse graph")
    dn = d.refined(n) if n > 0 else d
    t = dn.triangulation
    a, b, c = (int(m) for m in dn.marks)
    bd = list(t.boundary)
    if fourth is None:
        ca = list(dn.closed_arc(2))  # c ... a
        if len(ca) < 3:
            raise ValueError("arc ca has no interior vertex for the fourth mark")
        fourth = int(ca[len(ca) // 2])
    quad = MarkedRectangleDomain(t, dn.embedding, (a, b, c, int(fourth)))
    u, energy = dirichlet(t, quad.closed_arc(0), quad.closed_arc(2))
    rho = 1.0 / energy
    X = rho * (1.0 - u)
    Yf, viol = _discrete_conjugate(t, X)
    # faces on the two Neumann arcs carry constant Y (no flux leaves there)
    bh = np.flatnonzero(t.twin < 0)
    bpos = {v: i for i, v in enumerate(bd)}
    arcs = quad.arcs()
    on_bc = np.isin(t.origin[bh], arcs[1]) & np.isin(t.target[bh], np.append(arcs[1], c))
    on_da = np.isin(t.origin[bh], arcs[3]) & np.isin(t.target[bh], np.append(arcs[3], a))
    y_bc = float(np.mean(Yf[bh[on_bc] // 3]))
    y_da = float(np.mean(Yf[bh[on_da] // 3]))
    # orient so Y grows from bc to da, then centre the span inside [0, 1]
    Yf = (Yf - y_bc) / (1.0 if y_da > y_bc else -1.0)
    span = abs(y_da - y_bc)
    Yf = Yf + 0.5 * (1.0 - span)
    Xf = X[t.faces].mean(axis=1)
    Yv = np.bincount(t.faces.reshape(-1), weights=np.repeat(Yf, 3), minlength=t.n_vertices)
    Yv /= np.bincount(t.faces.reshape(-1), minlength=t.n_vertices)
    Yv[arcs[1]] = 0.0
    Yv[c] = 0.0
    Yv[arcs[3]] = 1.0
    Yv[a] = 1.0
    hf = _rectangle_to_triangle(Xf, Yf, rho)
    hv = _rectangle_to_triangle(X, Yv, rho)
    return PredictedField(hf, hv, rho, int(fourth), dn, viol, Xf + 1j * Yf)


def _rectangle_to_triangle(X, Y, rho):
    X = np.clip(np.asarray(X, dtype=float), 0.0, rho)
    Y = np.clip(np.asarray(Y, dtype=float), 0.0, 1.0)
    _, K, Kp, k = sn_rectangle(np.zeros(1), rho)
    W = (X / rho) * 2.0 * K - K + 1j * Y * Kp
    zeta, _, _, _ = sn_rectangle(W, rho)
    za, zb, zc = -1.0 / k, -1.0, 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        m = (zeta - zb) * (zc - za) / ((zeta - za) * (zc - zb))
    m = np.where(np.isfinite(m), m, np.inf)
    # corners exactly: sn(+-K) = +-1 only to round-off, amplified by the cube roots
    m = np.where((Y == 0.0) & (X == 0.0), 0.0, m)
    m = np.where((Y == 0.0) & (X == rho), 1.0, m)
    out = to_triangle(triangle_map(m))
    at_a = (X == 0.0) & (Y == 1.0)
    out = np.where(at_a, 1.0 + 0j, out)
    return out


# --------------------------------------------------------------------------
# Morera-type check


@dataclass(frozen=True)
class HolomorphyReport:
    contour: str
    value: complex
    magnitude: float
    tolerance: float
    passed: bool

    def to_json(self) -> dict:
        return {"contour": self.contour, "value": [self.value.real, self.value.imag],
                "magnitude": self.magnitude, "tolerance": self.tolerance, "passed": self.passed}


def morera_qc_check(phi: Union[Callable, np.ndarray], phi0: Union[Callable, np.ndarray], gamma,
                    tol: float = 1e-10, name: str = "polyline") -> HolomorphyReport:
    """Midpoint-rule integral of phi d(phi_0) along a closed polyline.

    ``gamma`` is a sequence of complex points whose last entry repeats the
    first; ``phi`` and ``phi0`` are callables or arrays sampled at those points.
    """
    g = np.asarray(gamma, dtype=complex)
    if len(g) < 3 or g[0] != g[-1]:
        raise ValueError("open polyline: the last point must repeat the first")
    fv = phi(g) if callable(phi) else np.asarray(phi, dtype=complex)
    f0 = phi0(g) if callable(phi0) else np.asarray(phi0, dtype=complex)
    if len(fv) != len(g) or len(f0) != len(g):
        raise ValueError("sampled maps must have one value per polyline point")
    val = midpoint_sum(fv, f0)
    mag = abs(val)
    return HolomorphyReport(name, val, mag, float(tol), bool(mag <= tol))
