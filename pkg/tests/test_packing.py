import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mesoperc.lattices import builtin_torus, equilateral_torus, triangle_lattice_domain
from mesoperc.mesh import Embedding, Triangulation, refine
from mesoperc.packing import (
    ANGLE_TOL,
    PackingError,
    PackingProblem,
    angle_sums,
    face_angles,
    layout,
    pack,
    period_sequence,
    psi_map,
    solve_radii,
    torus_period,
)


def hexagon():
    """Vertex 0 surrounded by six neighbours 1..6."""
    faces = [(0, k, k % 6 + 1) for k in range(1, 7)]
    z = [0j] + [cmath.exp(1j * math.pi / 3 * (k - 1)) for k in range(1, 7)]
    return Triangulation(np.array(faces), 7, "disk"), Embedding(np.array([(w.real, w.imag) for w in z]))


def test_degree_six_equal_radii_sum_to_two_pi():
    t, _ = hexagon()
    s = angle_sums(t, np.ones(7))
    assert abs(s[0] - 2 * math.pi) < 1e-14


def test_face_angles_sum_to_pi():
    t, _ = hexagon()
    r = np.array([1.0, 0.5, 2.0, 1.5, 0.7, 1.1, 0.9])
    assert np.allclose(face_angles(t, r).sum(axis=1), math.pi, atol=1e-13)


def test_regular_patch_uniform_boundary_gives_equal_radii():
    d = triangle_lattice_domain(6)
    res = solve_radii(PackingProblem(d.triangulation, 1.0))
    assert np.allclose(res.radii, 1.0, atol=1e-12)


def test_uniform_layout_is_the_lattice_scaled_by_2r():
    d = triangle_lattice_domain(4)
    t, e = d.triangulation, d.embedding
    cp = layout(t, np.full(t.n_vertices, 0.5), e, normalize=False)
    # edge length of the source lattice is sqrt(3)/4; the layout has edge 2r = 1
    z = e.coords[:, 0] + 1j * e.coords[:, 1]
    ratio = (cp.centers[t.edges[:, 1]] - cp.centers[t.edges[:, 0]]) / (z[t.edges[:, 1]] - z[t.edges[:, 0]])
    assert np.allclose(np.abs(ratio), 4 / math.sqrt(3), atol=1e-12)
    assert np.allclose(ratio, ratio[0], atol=1e-12)
    assert cp.tangency_error(t) < 1e-12


def test_two_tangent_circles():
    t = Triangulation(np.array([(0, 1, 2), (0, 2, 3)]), 4, "disk")
    cp = layout(t, np.array([1.0, 2.0, 1.0, 1.0]))
    assert abs(abs(cp.centers[1] - cp.centers[0]) - 3.0) < 1e-14


@pytest.mark.parametrize("name", ["regular", "fig1", "symmetric90", "k7"])
def test_torus_packings_solve(name):
    t, e = builtin_torus(name)
    cp, res = pack(t, e)
    assert res.residual < ANGLE_TOL
    assert (res.radii > 0).all()
    assert cp.tangency_error(t) < 1e-8
    assert np.all(np.diff(res.history) <= 0)


def test_disk_packing_is_a_packing():
    d = triangle_lattice_domain(5)
    t = d.triangulation
    rng = np.random.default_rng(3)
    cp, res = pack(t, d.embedding, boundary_radii=rng.uniform(0.5, 2.0, len(t.boundary)))
    assert res.residual < ANGLE_TOL
    assert np.all(np.diff(res.history) <= 0)
    assert cp.tangency_error(t) < 1e-8 * res.radii.sum()
    assert cp.max_overlap(t) < 1e-8


def test_fig1_at_n16_packs_every_vertex():
    t, e = builtin_torus("fig1")
    t16, e16 = refine(t, e, 16)
    cp, res = pack(t16, e16)
    assert res.residual < ANGLE_TOL
    assert len(cp.radii) == t16.n_vertices
    assert cp.tangency_error(t16) < 1e-8


@settings(max_examples=10, deadline=None)
@given(st.floats(0.05, 20.0))
def test_scaling_covariance(s):
    d = triangle_lattice_domain(4)
    t = d.triangulation
    br = np.linspace(0.5, 1.5, len(t.boundary))
    r1 = solve_radii(PackingProblem(t, br)).radii
    r2 = solve_radii(PackingProblem(t, s * br)).radii
    assert np.allclose(r2, s * r1, rtol=1e-9)


def test_non_convergence_reports_residual():
    d = triangle_lattice_domain(6)
    t = d.triangulation
    br = np.linspace(0.1, 3.0, len(t.boundary))
    with pytest.raises(PackingError) as info:
        solve_radii(PackingProblem(t, br), max_iter=1)
    assert info.value.residual > 0


def test_relayout_from_other_root_agrees_after_normalisation():
    t, e = builtin_torus("fig1")
    res = solve_radii(PackingProblem(t))
    cp = layout(t, res.radii, e)
    # relabel faces so the walk starts elsewhere
    perm = np.roll(np.arange(t.n_faces), 7)
    t2 = Triangulation(t.faces[perm], t.n_vertices, "torus")
    e2 = Embedding(e.coords, e.periods, e.with_shifts(t).shifts[perm])
    cp2 = layout(t2, res.radii, e2)
    assert abs(cp.tau - cp2.tau) < 1e-9
    assert np.allclose(cp.centers, cp2.centers, atol=1e-9)


def test_psi_interpolates():
    d = triangle_lattice_domain(3)
    t, e = d.triangulation, d.embedding
    cp, _ = pack(t, e, boundary_radii=np.linspace(1, 2, len(t.boundary)))
    psi = psi_map(cp, t, e)
    z = e.coords[:, 0] + 1j * e.coords[:, 1]
    assert np.allclose(psi(z), cp.centers, atol=1e-12)
    zf = z[t.faces].mean(axis=1)
    assert np.allclose(psi(zf), cp.centers[t.faces].mean(axis=1), atol=1e-12)
    with pytest.raises(ValueError, match="outside the embedded domain"):
        psi(5 + 5j)


def test_psi_on_regular_lattice_is_affine():
    t, e = builtin_torus("regular")
    cp, _ = pack(t, e)
    psi = psi_map(cp, t, e)
    # affine: psi(z) = z_re + tau z_im with the pins at 0 and 1
    pts = np.array([0.1 + 0.2j, 0.77 + 0.31j, 0.5 + 0.9j, 1.3 + 0.4j])
    want = pts.real + cp.tau * pts.imag
    assert np.allclose(psi(pts), want, atol=1e-9)


def test_periods():
    t, e = builtin_torus("regular")
    assert abs(torus_period(t, e) - cmath.exp(2j * math.pi / 3)) < 1e-9
    t, e = builtin_torus("symmetric90")
    assert abs(torus_period(t, e) - 1j) < 1e-9
    t, e = builtin_torus("k7")
    assert abs(torus_period(t, e) - cmath.exp(1j * math.pi / 3)) < 1e-9


@pytest.mark.parametrize("k", [3, 4, 5])
def test_equilateral_torus_keeps_its_period_ratio(k):
    t, e = equilateral_torus(3, k)
    src = complex(*e.periods[1]) / complex(*e.periods[0])
    assert abs(torus_period(t, e, 2) - src) < 1e-9


def test_fig1_periods_stabilise():
    t, e = builtin_torus("fig1")
    taus = period_sequence(t, e, [4, 8, 16, 32])
    d = np.abs(np.diff(taus))
    assert np.all(np.diff(d) < 0)
    assert all(tau.imag > 0 for tau in taus)


def test_torus_period_needs_torus():
    d = triangle_lattice_domain(3)
    with pytest.raises(ValueError):
        torus_period(d.triangulation, d.embedding)


def test_packing_json():
    t, e = builtin_torus("k7")
    cp, _ = pack(t, e)
    doc = cp.to_json()
    assert len(doc["vertices"]) == 7
    assert doc["tau"][1] > 0
