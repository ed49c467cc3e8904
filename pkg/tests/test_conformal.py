import json
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mesoperc.conformal import (
    BETA13,
    SolverError,
    cardy,
    cardy_eta,
    dirichlet,
    modulus,
    modulus_sequence,
    morera_qc_check,
    predict_H,
    sn_rectangle,
    to_triangle,
    triangle_map,
)
from mesoperc.lattices import (
    MarkedRectangleDomain,
    MarkedTriangleDomain,
    parallelogram_domain,
    rectangle_lattice_domain,
    rhombus_domain,
    triangle_domain,
    triangle_lattice_domain,
)
from mesoperc.mesh import TAU
from mesoperc.percolation import CrossingSpec, crossing_probability

from oracles import aitken, cardy_mp, parallelogram_modulus_q1, sc_triangle_mp


def rotated(d, k=1):
    m = d.marks
    return MarkedRectangleDomain(d.triangulation, d.embedding, m[k:] + m[:k])


def barycentric(h):
    """Barycentric coordinates of complex points with respect to (1, tau, tau^2)."""
    A = np.array([[1.0, TAU.real, (TAU**2).real], [0.0, TAU.imag, (TAU**2).imag], [1.0, 1.0, 1.0]])
    rhs = np.stack([np.real(h), np.imag(h), np.ones(len(h))])
    return np.linalg.solve(A, rhs)


# ---------------------------------------------------------------- modulus


def test_rhombus_symmetric_and_tends_to_one():
    d = rhombus_domain()
    rhos = [modulus(d, n, estimate_error=False).rho for n in range(5)]
    dual = [modulus(rotated(d), n, estimate_error=False).rho for n in range(5)]
    # the reflection swapping the arc pairs makes both problems identical
    assert np.allclose(rhos, dual, rtol=1e-9)
    assert all(r < 1 for r in rhos)
    assert np.all(np.diff(rhos) > 0)
    assert abs(aitken(*rhos[-3:]) - 1.0) < 1e-3


def test_parallelogram_agrees_with_bilinear_oracle():
    d = parallelogram_domain(2)
    p1 = [modulus(d, n, estimate_error=False).rho for n in (4, 5, 6)]
    q1 = [parallelogram_modulus_q1(2, math.pi / 3, n) for n in (16, 32, 64)]
    assert abs(aitken(*p1) - aitken(*q1)) < 1e-4


def test_parallelogram_oracle_gives_one_on_the_rhombus():
    q1 = [parallelogram_modulus_q1(1, math.pi / 3, n) for n in (16, 32, 64)]
    assert abs(aitken(*q1) - 1.0) < 1e-4


def test_level_differences_shrink(fig1_quad):
    rhos = modulus_sequence(fig1_quad, range(6))
    diffs = np.abs(np.diff([rhos[n] for n in range(6)]))
    assert np.all(diffs[1:] < diffs[:-1])
    res = modulus(fig1_quad, 5)
    assert res.error == pytest.approx(diffs[-1], rel=1e-12)
    assert res.history == {5: rhos[5], 4: rhos[4]}


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_reciprocity_within_error_estimate(fig1_quad, n):
    r, rp = modulus(fig1_quad, n), modulus(rotated(fig1_quad), n)
    # first-order propagation of the level errors into the product
    est = rp.rho * r.error + r.rho * rp.error
    assert abs(r.rho * rp.rho - 1.0) < 2 * est
    # conforming elements overestimate both conductances
    assert r.rho * rp.rho <= 1.0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 6), st.integers(1, 6))
def test_extending_arc_ab_never_increases_rho(start, step):
    d = rectangle_lattice_domain(1.5, 6)
    b = list(d.triangulation.boundary)
    a, bb, c, dd = (b.index(m) for m in d.marks)
    # slide b towards c along the boundary
    j0 = (a + 1 + start) % len(b)
    j1 = (j0 + step) % len(b)
    n = len(b)
    if not ((j0 - a) % n < (j1 - a) % n < (c - a) % n):
        return
    r0 = modulus(MarkedRectangleDomain(d.triangulation, d.embedding, (b[a], b[j0], b[c], b[dd]))).rho
    r1 = modulus(MarkedRectangleDomain(d.triangulation, d.embedding, (b[a], b[j1], b[c], b[dd]))).rho
    assert r1 <= r0 * (1 + 1e-9)


def test_rectangle_lattice_modulus_tends_to_width():
    d = rectangle_lattice_domain(2.0, 64)
    width = d.embedding.coords[d.marks[0], 0]
    assert abs(modulus(d).rho - width) < 0.02


def test_shared_vertex_is_singular():
    d = rhombus_domain()
    with pytest.raises(SolverError, match="singular"):
        dirichlet(d.triangulation, np.array([0, 1]), np.array([1, 2]))


def test_empty_arc_is_singular():
    d = rhombus_domain()
    with pytest.raises(SolverError, match="singular"):
        dirichlet(d.triangulation, np.array([0]), np.array([], dtype=int))


def test_negative_level_rejected():
    with pytest.raises(ValueError):
        modulus(rhombus_domain(), -1)


def test_modulus_exports(fig1_quad):
    res = modulus(fig1_quad, 2)
    doc = json.loads(json.dumps(res.to_json()))
    assert doc["rho"] == res.rho and doc["level"] == 2
    rows = res.potential_rows()
    assert len(rows) == res.domain.triangulation.n_vertices
    assert all(0.0 <= u <= 1.0 + 1e-12 for _, u in rows)
    assert res.conductance == pytest.approx(1 / res.rho)


# ---------------------------------------------------------------- Cardy


def test_cardy_square_is_half():
    assert abs(cardy(1.0) - 0.5) < 1e-15


def test_cardy_duality_at_two():
    assert abs(cardy(2.0) + cardy(0.5) - 1.0) < 1e-15


@settings(max_examples=200, deadline=None)
@given(st.floats(1 / 20, 20))
def test_cardy_duality_and_range(rho):
    c = cardy(rho)
    assert 0.0 < c < 1.0
    assert abs(c + cardy(1 / rho) - 1.0) < 1e-12


def test_cardy_strictly_decreasing():
    rho = np.geomspace(1 / 20, 20, 400)
    c = np.array([cardy(r) for r in rho])
    assert np.all(np.diff(c) < 0)


@pytest.mark.parametrize("rho", [0.05, 0.3, 1.0, 1.7, 2.0, 5.0, 20.0])
def test_cardy_against_mpmath(rho):
    assert cardy(rho) == pytest.approx(cardy_mp(rho), rel=1e-12, abs=1e-15)


def test_cardy_eta_endpoints():
    assert cardy_eta(0.0) == 0.0
    assert cardy_eta(1.0) == pytest.approx(1.0, abs=1e-12)


def test_cardy_rejects_nonpositive():
    with pytest.raises(ValueError):
        cardy(0.0)


def test_cardy_at_two_against_lattice_crossings():
    d = rectangle_lattice_domain(2.0, 240)  # edge 1/208
    est = crossing_probability(d.triangulation, CrossingSpec.from_domain(d), 20_000, seed=2024)
    assert abs(est.estimate - cardy(2.0)) < 0.01


# ---------------------------------------------------------------- sn and Schwarz–Christoffel


@pytest.mark.parametrize("rho", [0.4, 1.0, 2.3])
def test_sn_against_mpmath(rho):
    w = np.array([0.1 + 0.0j, -0.7 + 0.2j, 0.3 + 0.9j, 1.1 + 0.05j])
    sn, K, Kp, k = sn_rectangle(w, rho)
    with mp.workdps(40):
        q = mp.exp(-2 * mp.pi / rho)
        m = (mp.jtheta(2, 0, q) / mp.jtheta(3, 0, q)) ** 4
        assert k == pytest.approx(float(mp.sqrt(m)), rel=1e-14)
        assert K == pytest.approx(float(mp.ellipk(m)), rel=1e-13)
        assert Kp == pytest.approx(float(mp.ellipk(1 - m)), rel=1e-13)
        want = [complex(mp.ellipfun("sn", complex(x), m=m)) for x in w]
    assert np.allclose(sn, want, rtol=1e-12, atol=1e-13)


def test_sc_against_incomplete_beta():
    pts = [0.3, 0.7, 2.0, -1.5, 0.2 + 0.3j, 3 + 4j, -5 + 0.1j, 0.5 + 1e-3j, 1e6]
    got = triangle_map(np.array(pts, dtype=complex))
    want = np.array([sc_triangle_mp(complex(p)) for p in pts])
    assert np.allclose(got, want, rtol=0, atol=1e-12)
    assert triangle_map(1.0) == pytest.approx(float(mp.beta(mp.mpf(1) / 3, mp.mpf(1) / 3)), abs=1e-13)
    assert abs(BETA13 - float(mp.beta(mp.mpf(1) / 3, mp.mpf(1) / 3))) < 1e-13


def test_sc_vertices_go_to_marks():
    out = to_triangle(triangle_map(np.array([0.0, 1.0, np.inf])))
    assert np.allclose(out, [TAU, TAU**2, 1.0], atol=1e-12)


# ---------------------------------------------------------------- predict_H


def test_predict_marks():
    p = predict_H(triangle_domain(), 3)
    a, b, c = p.domain.marks
    assert np.allclose(p.vertices[[a, b, c]], [1.0, TAU, TAU**2], atol=1e-12)


def test_predict_marks_asymmetric(fig1_tri):
    p = predict_H(fig1_tri, 3)
    assert np.allclose(p.vertices[list(p.domain.marks)], [1.0, TAU, TAU**2], atol=1e-12)
    assert p.path_error < 1e-8


def test_predict_near_identity_on_the_triangle():
    errs = []
    for n in range(1, 5):
        p = predict_H(triangle_domain(), n)
        t, e = p.domain.triangulation, p.domain.embedding
        z = e.coords[:, 0] + 1j * e.coords[:, 1]
        errs.append(np.abs(p.faces - z[t.faces].mean(axis=1)).max())
    assert np.all(np.diff(errs) < 0)
    assert errs[-1] < 0.03


def test_arc_bc_lands_on_the_edge(fig1_tri):
    p = predict_H(fig1_tri, 3)
    d = p.domain
    bc = d.closed_arc(1)
    hv = p.vertices[bc]
    # the edge from tau to tau^2 is Re = -1/2, |Im| <= sqrt(3)/2
    assert np.abs(hv.real + 0.5).max() < 1e-12
    assert np.all(np.abs(hv.imag) <= math.sqrt(3) / 2 + 1e-12)
    # moving from b to c runs down the edge
    assert np.all(np.diff(hv.imag) <= 1e-12)


def test_arc_bc_matches_quadrature_oracle():
    # on bc the half-plane coordinate m is real in [0, 1]; the oracle gives the same edge points
    m = np.linspace(0.05, 0.95, 7)
    want = np.array([sc_triangle_mp(complex(x)) for x in m])
    assert np.abs(want.imag).max() < 1e-14
    got = to_triangle(triangle_map(m + 0j))
    assert np.allclose(got, to_triangle(want), atol=1e-12)
    assert np.abs(got.real + 0.5).max() < 1e-12


@pytest.mark.parametrize("which", ["triangle", "fig1", "lattice"])
def test_predict_image_in_triangle(which, fig1_tri):
    d = {"triangle": triangle_domain(), "fig1": fig1_tri, "lattice": triangle_lattice_domain(4)}[which]
    p = predict_H(d, 3)
    for h in (p.faces, p.vertices):
        assert barycentric(h).min() > -1e-12


def test_degenerate_marks_rejected():
    d = triangle_lattice_domain(2)
    b = d.triangulation.boundary
    with pytest.raises(ValueError, match="degenerate"):
        predict_H(MarkedTriangleDomain(d.triangulation, d.embedding, (b[0], b[1], b[3])))


# ---------------------------------------------------------------- Morera


def circle(n=1000, r=1.0, c=0.0):
    z = c + r * np.exp(2j * np.pi * np.arange(n) / n)
    return np.append(z, z[0])


def square(n_side=50):
    s = np.linspace(0, 1, n_side, endpoint=False)
    z = np.concatenate([s, 1 + 1j * s, 1 - s + 1j, 1j * (1 - s)])
    return np.append(z, z[0])


def test_morera_identity():
    for g in (circle(), square()):
        rep = morera_qc_check(lambda z: z, lambda z: z, g, tol=1e-12)
        assert rep.passed and rep.magnitude == abs(rep.value)


def test_morera_square_of_identity():
    for g in (circle(c=0.3 + 0.1j), square()):
        rep = morera_qc_check(lambda z: z**2, lambda z: z, g, tol=1e-12)
        assert rep.passed


def test_morera_conjugate_on_unit_square_is_2i():
    g = np.array([0, 1, 1 + 1j, 1j, 0], dtype=complex)
    rep = morera_qc_check(np.conj, lambda z: z, g)
    assert rep.value == 2j
    assert not rep.passed


def test_morera_open_polyline():
    with pytest.raises(ValueError, match="open polyline"):
        morera_qc_check(np.conj, lambda z: z, [0, 1, 1j])


def test_morera_report_json():
    rep = morera_qc_check(np.conj, lambda z: z, np.array([0, 1, 1 + 1j, 1j, 0], dtype=complex), name="square")
    doc = json.loads(json.dumps(rep.to_json()))
    assert doc == {"contour": "square", "value": [0.0, 2.0], "magnitude": 2.0, "tolerance": 1e-10, "passed": False}
